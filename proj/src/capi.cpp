#include "seqcal.h"

#include <cstring>
#include <sstream>
#include <string>

#include "seqcal/emulator.hpp"
#include "seqcal/experiment.hpp"
#include "seqcal/testbeds.hpp"
#include "seqcal/types.hpp"

namespace {

thread_local std::string g_last_error = "";

seqcal_status fail(seqcal_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

seqcal_status classify(const std::exception& ex) {
    if (dynamic_cast<const std::invalid_argument*>(&ex))
        return fail(SEQCAL_ERR_INVALID_ARGUMENT, ex.what());
    if (dynamic_cast<const seqcal::EmulatorSingular*>(&ex) ||
        dynamic_cast<const seqcal::CovarianceSingular*>(&ex) ||
        dynamic_cast<const seqcal::NonPositiveDeterminant*>(&ex))
        return fail(SEQCAL_ERR_SINGULAR, ex.what());
    if (dynamic_cast<const seqcal::SimTimeout*>(&ex) ||
        dynamic_cast<const seqcal::SimProtocol*>(&ex) ||
        dynamic_cast<const seqcal::SimCrashed*>(&ex))
        return fail(SEQCAL_ERR_SIMULATOR, ex.what());
    return fail(SEQCAL_ERR_INTERNAL, ex.what());
}

}  // namespace

extern "C" {

struct seqcal_emulator {
    seqcal::Emulator impl;
};

const char* seqcal_last_error(void) { return g_last_error.c_str(); }

seqcal_status seqcal_run_spec_file(const char* spec_path,
                                   const char* out_dir_override,
                                   int workers_override) {
    if (!spec_path) return fail(SEQCAL_ERR_INVALID_ARGUMENT, "spec_path is NULL");
    try {
        seqcal::ExperimentSpec spec;
        try {
            spec = seqcal::ExperimentSpec::parse_file(spec_path);
            if (out_dir_override) spec.out_dir = out_dir_override;
            if (workers_override > 0) spec.workers = workers_override;
            if (spec.out_dir.empty())
                throw std::invalid_argument(
                    "spec: missing 'out' (and no override given)");
            spec.validate();
        } catch (const std::exception& ex) {
            return fail(SEQCAL_ERR_INVALID_SPEC, ex.what());
        }
        const seqcal::ExperimentResults res = seqcal::run_experiment(spec);
        seqcal::write_results(res, spec.out_dir);
        if (!res.all_complete()) {
            std::ostringstream os;
            for (const auto& s : res.statuses)
                if (!s.complete)
                    os << "replicate " << s.replicate << " method " << s.method
                       << ": " << s.error << "; ";
            return fail(SEQCAL_ERR_PARTIAL, os.str());
        }
        return SEQCAL_OK;
    } catch (const std::exception& ex) {
        return classify(ex);
    }
}

seqcal_status seqcal_report(const char* results_dir) {
    if (!results_dir)
        return fail(SEQCAL_ERR_INVALID_ARGUMENT, "results_dir is NULL");
    try {
        std::ostringstream log;
        const int rc = seqcal::write_report(results_dir, log);
        if (rc != 0) return fail(SEQCAL_ERR_IO, log.str());
        return SEQCAL_OK;
    } catch (const std::exception& ex) {
        return classify(ex);
    }
}

seqcal_status seqcal_testbed_dims(const char* testbed, int* q, int* p) {
    if (!testbed || !q || !p)
        return fail(SEQCAL_ERR_INVALID_ARGUMENT, "NULL argument");
    try {
        const auto m = seqcal::SyntheticModel::by_name(testbed);
        *q = m.q;
        *p = m.p;
        return SEQCAL_OK;
    } catch (const std::exception& ex) {
        return classify(ex);
    }
}

seqcal_status seqcal_simulate(const char* testbed, const double* z, size_t len,
                              double* out_value) {
    if (!testbed || !z || !out_value)
        return fail(SEQCAL_ERR_INVALID_ARGUMENT, "NULL argument");
    try {
        const auto m = seqcal::SyntheticModel::by_name(testbed);
        if (len != static_cast<size_t>(m.q + m.p))
            return fail(SEQCAL_ERR_INVALID_ARGUMENT,
                        "expected " + std::to_string(m.q + m.p) +
                            " coordinates, got " + std::to_string(len));
        const Eigen::Map<const seqcal::VectorXd> v(z, static_cast<long>(len));
        *out_value = m.simulator()(
            seqcal::JointInput(v.head(m.q), v.tail(m.p)));
        return SEQCAL_OK;
    } catch (const std::exception& ex) {
        return classify(ex);
    }
}

seqcal_status seqcal_emulator_fit(int q, int p, const double* inputs,
                                  const double* outputs, size_t n,
                                  uint64_t seed, seqcal_emulator** out) {
    if (!inputs || !outputs || !out)
        return fail(SEQCAL_ERR_INVALID_ARGUMENT, "NULL argument");
    if (q < 1 || p < 1 || n < 2)
        return fail(SEQCAL_ERR_INVALID_ARGUMENT, "need q,p >= 1 and n >= 2");
    try {
        seqcal::SimDataset data(q, p);
        for (size_t i = 0; i < n; ++i) {
            const Eigen::Map<const seqcal::VectorXd> row(
                inputs + i * static_cast<size_t>(q + p), q + p);
            data.append(seqcal::JointInput(row.head(q), row.tail(p)),
                        outputs[i]);
        }
        seqcal::FitConfig cfg;
        cfg.seed = seed;
        auto* handle = new seqcal_emulator{seqcal::Emulator::fit(data, cfg)};
        *out = handle;
        return SEQCAL_OK;
    } catch (const std::exception& ex) {
        return classify(ex);
    }
}

seqcal_status seqcal_emulator_predict(const seqcal_emulator* e, const double* z,
                                      size_t len, double* mean, double* var) {
    if (!e || !z || !mean || !var)
        return fail(SEQCAL_ERR_INVALID_ARGUMENT, "NULL argument");
    try {
        const int q = e->impl.q(), p = e->impl.p();
        if (len != static_cast<size_t>(q + p))
            return fail(SEQCAL_ERR_INVALID_ARGUMENT, "wrong input length");
        const Eigen::Map<const seqcal::VectorXd> v(z, static_cast<long>(len));
        const auto [m, s2] = e->impl.predict(
            seqcal::JointInput(v.head(q), v.tail(p)));
        *mean = m;
        *var = s2;
        return SEQCAL_OK;
    } catch (const std::exception& ex) {
        return classify(ex);
    }
}

void seqcal_emulator_free(seqcal_emulator* e) { delete e; }

}  // extern "C"
