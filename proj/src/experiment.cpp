#include "seqcal/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "seqcal/acquisition.hpp"
#include "seqcal/metrics.hpp"
#include "seqcal/rng.hpp"

namespace seqcal {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Spec parsing

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
        if (tok[0] == '#') break;
        out.push_back(tok);
    }
    return out;
}

int to_int(const std::string& s, const std::string& key) {
    try {
        size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("spec: bad integer for '" + key + "': " + s);
    }
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
    try {
        size_t pos = 0;
        const std::uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("spec: bad seed for '" + key + "': " + s);
    }
}

}  // namespace

ExperimentSpec ExperimentSpec::parse(std::istream& in) {
    ExperimentSpec spec;
    std::string line;
    while (std::getline(in, line)) {
        const auto toks = tokenize(line);
        if (toks.empty()) continue;
        const std::string& key = toks[0];
        auto need = [&](int n) {
            if (static_cast<int>(toks.size()) != n + 1)
                throw std::invalid_argument("spec: key '" + key + "' expects " +
                                            std::to_string(n) + " value(s)");
        };
        if (key == "version") {
            need(1);
            spec.version = to_int(toks[1], key);
            if (spec.version != 1)
                throw std::invalid_argument("spec: unsupported version " + toks[1]);
        } else if (key == "testbed") {
            need(1);
            spec.testbed = toks[1];
        } else if (key == "methods") {
            if (toks.size() < 2)
                throw std::invalid_argument("spec: 'methods' expects at least one value");
            spec.methods.clear();
            for (size_t i = 1; i < toks.size(); ++i) {
                const auto m = parse_method(toks[i]);
                if (!m) throw std::invalid_argument("spec: unknown method " + toks[i]);
                spec.methods.push_back(*m);
            }
        } else if (key == "replicates") {
            need(1);
            spec.replicates = to_int(toks[1], key);
        } else if (key == "n0") {
            need(1);
            spec.design.n0 = to_int(toks[1], key);
        } else if (key == "n") {
            need(1);
            spec.design.n = to_int(toks[1], key);
        } else if (key == "n_pair") {
            need(1);
            spec.design.n_pair = to_int(toks[1], key);
        } else if (key == "n_explore") {
            need(1);
            spec.design.n_explore = to_int(toks[1], key);
        } else if (key == "n_theta_ref") {
            need(1);
            spec.design.n_theta_ref = to_int(toks[1], key);
        } else if (key == "n_x_ref") {
            need(1);
            spec.design.n_x_ref = to_int(toks[1], key);
        } else if (key == "discrepancy") {
            need(1);
            if (toks[1] == "known")
                spec.design.discrepancy = DiscrepancyMode::KnownSigma;
            else if (toks[1] == "fit")
                spec.design.discrepancy = DiscrepancyMode::FitDiscrepancy;
            else
                throw std::invalid_argument("spec: discrepancy must be known|fit");
        } else if (key == "init") {
            need(1);
            if (toks[1] == "prior")
                spec.design.init = InitDesign::PriorSample;
            else if (toks[1] == "lhs")
                spec.design.init = InitDesign::Lhs;
            else
                throw std::invalid_argument("spec: init must be prior|lhs");
        } else if (key == "seed") {
            need(1);
            spec.master_seed = to_u64(toks[1], key);
        } else if (key == "workers") {
            need(1);
            spec.workers = to_int(toks[1], key);
        } else if (key == "threads") {
            need(1);
            spec.design.n_threads = to_int(toks[1], key);
        } else if (key == "multistarts") {
            need(1);
            spec.design.multistarts = to_int(toks[1], key);
        } else if (key == "refit_multistarts") {
            need(1);
            spec.design.refit_multistarts = to_int(toks[1], key);
        } else if (key == "metrics_theta_ref") {
            need(1);
            spec.metrics_theta_ref = to_int(toks[1], key);
        } else if (key == "metrics_x_ref") {
            need(1);
            spec.metrics_x_ref = to_int(toks[1], key);
        } else if (key == "mad_p") {
            need(1);
            if (toks[1] == "on")
                spec.compute_mad_p = true;
            else if (toks[1] == "off")
                spec.compute_mad_p = false;
            else
                throw std::invalid_argument("spec: mad_p must be on|off");
        } else if (key == "out") {
            need(1);
            spec.out_dir = toks[1];
        } else {
            throw std::invalid_argument("spec: unknown key '" + key + "'");
        }
    }
    return spec;
}

ExperimentSpec ExperimentSpec::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("spec: cannot open " + path);
    return parse(in);
}

void ExperimentSpec::validate() const {
    if (testbed.empty()) throw std::invalid_argument("spec: missing testbed");
    SyntheticModel::by_name(testbed);  // throws for unknown ids
    if (methods.empty()) throw std::invalid_argument("spec: no methods");
    if (replicates < 1) throw std::invalid_argument("spec: replicates >= 1");
    if (workers < 1) throw std::invalid_argument("spec: workers >= 1");
    if (metrics_theta_ref < 1 || metrics_x_ref < 1)
        throw std::invalid_argument("spec: metrics grid sizes >= 1");
    design.validate();
}

// ---------------------------------------------------------------------------
// Runner

namespace {

std::uint64_t fnv1a_bytes(const void* data, size_t len, std::uint64_t h) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t hash_vector(const VectorXd& v, std::uint64_t h = 1469598103934665603ULL) {
    return fnv1a_bytes(v.data(), sizeof(double) * v.size(), h);
}

struct ReplicateShared {
    FieldExperiment fe;
    std::uint64_t init_seed = 0;
    std::uint64_t field_hash = 0;
    std::vector<VectorXd> theta_ref;  // metrics grids, scaled
    std::vector<VectorXd> x_ref;
};

struct TaskOutput {
    std::vector<ResultRow> rows;
    std::vector<AcquiredRow> acquired;
    RunStatus status;
};

}  // namespace

bool ExperimentResults::all_complete() const {
    for (const auto& s : statuses)
        if (!s.complete) return false;
    return true;
}

ExperimentResults run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const SyntheticModel model = SyntheticModel::by_name(spec.testbed);
    const Simulator sim = model.simulator();
    const bool with_mad_p = spec.compute_mad_p && !model.discrepancy &&
                            spec.design.discrepancy == DiscrepancyMode::KnownSigma;

    ExperimentResults res;
    res.spec = spec;
    res.theta_true_scaled = model.theta_true_scaled();
    res.q = model.q;
    res.p = model.p;

    std::vector<ReplicateShared> shared(spec.replicates);
    for (int r = 0; r < spec.replicates; ++r) {
        const std::uint64_t rep_seed = derive_seed(spec.master_seed, r + 1);
        Rng field_rng(derive_seed(rep_seed, std::string("field")));
        shared[r].fe = make_field_data(model, field_rng);
        shared[r].init_seed = derive_seed(rep_seed, std::string("init"));
        shared[r].field_hash = hash_vector(shared[r].fe.y);
        Rng grid_rng(derive_seed(rep_seed, std::string("metrics")));
        for (const auto& u : lhs_sample(spec.metrics_theta_ref, model.p, grid_rng))
            shared[r].theta_ref.push_back(
                shared[r].fe.prior.lo +
                u.cwiseProduct(shared[r].fe.prior.hi - shared[r].fe.prior.lo));
        for (const auto& u : lhs_sample(spec.metrics_x_ref, model.q, grid_rng))
            shared[r].x_ref.push_back(u);
    }

    struct Task {
        int replicate;
        AcquisitionMethod method;
    };
    std::vector<Task> tasks;
    for (int r = 0; r < spec.replicates; ++r)
        for (const auto m : spec.methods) tasks.push_back({r, m});
    std::vector<TaskOutput> outputs(tasks.size());

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t idx = next.fetch_add(1);
            if (idx >= tasks.size()) return;
            const Task& task = tasks[idx];
            const ReplicateShared& sh = shared[task.replicate];
            const std::string mname = method_name(task.method);
            const int rep1 = task.replicate + 1;

            DesignConfig cfg = spec.design;
            cfg.acquisition = task.method;
            const std::uint64_t rep_seed = derive_seed(spec.master_seed, rep1);
            cfg.seed = derive_seed(rep_seed, mname);
            cfg.init_seed = sh.init_seed;

            TaskOutput& out = outputs[idx];
            out.status.replicate = rep1;
            out.status.method = mname;
            out.status.field_hash = sh.field_hash;

            auto on_iter = [&](int iter, const Emulator& e, const VectorXd& th) {
                ResultRow row;
                row.replicate = rep1;
                row.iteration = iter;
                row.method = mname;
                row.theta_hat = th;
                if (with_mad_p) row.mad_p = mad_p(e, sh.fe, sh.theta_ref, sim);
                row.mad_y = mad_y(e, sh.x_ref, th, [&](const VectorXd& x) {
                    return model.true_field_mean(x);
                });
                out.rows.push_back(std::move(row));
            };

            RunHistory hist;
            try {
                hist = run(sim, sh.fe, cfg, on_iter);
            } catch (const std::exception& ex) {
                out.status.error = ex.what();
            }
            out.status.complete = hist.complete;
            if (!hist.complete && out.status.error.empty())
                out.status.error = hist.error;

            std::uint64_t ih = 1469598103934665603ULL;
            for (int i = 0; i < std::min(cfg.n0, hist.dataset.size()); ++i)
                ih = hash_vector(hist.dataset.inputs().row(i).transpose(), ih);
            out.status.init_hash = ih;

            for (size_t t = 0; t < hist.records.size(); ++t) {
                AcquiredRow ar;
                ar.replicate = rep1;
                ar.method = mname;
                ar.iteration = static_cast<int>(t) + 1;
                ar.input = hist.records[t].input;
                out.acquired.push_back(std::move(ar));
                if (t < out.rows.size())
                    out.rows[t].wall_ms = hist.records[t].wall_ms;
            }
        }
    };

    const int nworkers =
        std::max(1, std::min<int>(spec.workers, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    for (auto& out : outputs) {
        res.statuses.push_back(std::move(out.status));
        res.rows.insert(res.rows.end(), out.rows.begin(), out.rows.end());
        res.acquired.insert(res.acquired.end(), out.acquired.begin(),
                            out.acquired.end());
    }
    return res;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::string join_vec(const VectorXd& v) {
    std::ostringstream os;
    os.precision(17);
    for (int i = 0; i < v.size(); ++i) {
        if (i) os << ';';
        os << v(i);
    }
    return os.str();
}

VectorXd split_vec(const std::string& s) {
    std::vector<double> vals;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ';'))
        if (!tok.empty()) vals.push_back(std::stod(tok));
    VectorXd v(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) v(i) = vals[i];
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(tok);
    return out;
}

double median_of(std::vector<double> v) { return quantile(std::move(v), 0.5); }

json quartile_series(const std::map<int, std::vector<double>>& per_iter) {
    json med = json::array(), q1 = json::array(), q3 = json::array(),
         iters = json::array();
    for (const auto& [it, vals] : per_iter) {
        iters.push_back(it);
        med.push_back(median_of(vals));
        q1.push_back(quantile(vals, 0.25));
        q3.push_back(quantile(vals, 0.75));
    }
    return {{"iteration", iters}, {"median", med}, {"q1", q1}, {"q3", q3}};
}

}  // namespace

void write_results(const ExperimentResults& res, const std::string& dir) {
    fs::create_directories(dir);

    {
        std::ofstream f(fs::path(dir) / "results.csv");
        f.precision(17);
        f << "replicate,iteration,method,mad_p,mad_y,theta_hat,wall_ms\n";
        for (const auto& r : res.rows)
            f << r.replicate << ',' << r.iteration << ',' << r.method << ','
              << r.mad_p << ',' << r.mad_y << ',' << join_vec(r.theta_hat) << ','
              << r.wall_ms << '\n';
    }
    {
        std::ofstream f(fs::path(dir) / "acquired.csv");
        f.precision(17);
        f << "replicate,method,iteration,x,theta\n";
        for (const auto& a : res.acquired)
            f << a.replicate << ',' << a.method << ',' << a.iteration << ','
              << join_vec(a.input.design) << ',' << join_vec(a.input.params)
              << '\n';
    }
    {
        std::ofstream f(fs::path(dir) / "status.csv");
        f << "replicate,method,complete,error,init_hash,field_hash\n";
        for (const auto& s : res.statuses)
            f << s.replicate << ',' << s.method << ',' << (s.complete ? 1 : 0)
              << ',' << s.error << ',' << s.init_hash << ',' << s.field_hash
              << '\n';
    }

    json summary;
    summary["version"] = 1;
    summary["testbed"] = res.spec.testbed;
    summary["q"] = res.q;
    summary["p"] = res.p;
    summary["n0"] = res.spec.design.n0;
    summary["n"] = res.spec.design.n;
    summary["replicates"] = res.spec.replicates;
    summary["seed"] = res.spec.master_seed;
    summary["theta_true_scaled"] =
        std::vector<double>(res.theta_true_scaled.data(),
                            res.theta_true_scaled.data() + res.theta_true_scaled.size());
    json methods = json::array();
    for (const auto m : res.spec.methods) methods.push_back(method_name(m));
    summary["methods"] = methods;

    json per_method;
    for (const auto m : res.spec.methods) {
        const std::string name = method_name(m);
        std::map<int, std::vector<double>> mp, my;
        for (const auto& r : res.rows) {
            if (r.method != name) continue;
            if (std::isfinite(r.mad_p)) mp[r.iteration].push_back(r.mad_p);
            if (std::isfinite(r.mad_y)) my[r.iteration].push_back(r.mad_y);
        }
        json entry;
        if (!mp.empty()) entry["mad_p"] = quartile_series(mp);
        if (!my.empty()) entry["mad_y"] = quartile_series(my);
        per_method[name] = entry;
    }
    summary["per_iteration"] = per_method;

    std::ofstream jf(fs::path(dir) / "summary.json");
    jf << summary.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Report

int write_report(const std::string& dir, std::ostream& log) {
    const fs::path base(dir);
    std::ifstream rf(base / "results.csv");
    if (!rf) {
        log << "report: missing " << (base / "results.csv").string() << "\n";
        return 1;
    }

    struct Row {
        int replicate, iteration;
        std::string method;
        double mad_p, mad_y;
    };
    std::vector<Row> rows;
    std::string line;
    std::getline(rf, line);  // header
    while (std::getline(rf, line)) {
        const auto f = split_csv(line);
        if (f.size() < 7) continue;
        rows.push_back({std::stoi(f[0]), std::stoi(f[1]), f[2], std::stod(f[3]),
                        std::stod(f[4])});
    }
    if (rows.empty()) {
        log << "report: no result rows\n";
        return 1;
    }

    std::vector<std::string> methods;
    for (const auto& r : rows)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);

    // (a) Median and IQR series per metric and method.
    const std::vector<std::pair<std::string, double Row::*>> metrics = {
        {"mad_p", &Row::mad_p}, {"mad_y", &Row::mad_y}};
    std::map<std::string, std::map<std::string, std::map<int, double>>> medians;
    {
        std::ofstream f(base / "report_series.csv");
        f.precision(17);
        f << "metric,method,iteration,median,q1,q3\n";
        for (const auto& [mname, field] : metrics) {
            for (const auto& method : methods) {
                std::map<int, std::vector<double>> per_iter;
                for (const auto& r : rows)
                    if (r.method == method && std::isfinite(r.*field))
                        per_iter[r.iteration].push_back(r.*field);
                for (const auto& [it, vals] : per_iter) {
                    const double med = median_of(vals);
                    medians[mname][method][it] = med;
                    f << mname << ',' << method << ',' << it << ',' << med << ','
                      << quantile(vals, 0.25) << ',' << quantile(vals, 0.75)
                      << '\n';
                }
            }
        }
    }

    // (b) Acquisitions needed to reach the worst method's final median.
    {
        std::ofstream f(base / "report_thresholds.csv");
        f.precision(17);
        f << "metric,method,final_median,iterations_to_worst_final\n";
        for (const auto& [mname, per_method] : medians) {
            double worst_final = -std::numeric_limits<double>::infinity();
            for (const auto& [method, series] : per_method)
                if (!series.empty())
                    worst_final = std::max(worst_final, series.rbegin()->second);
            for (const auto& [method, series] : per_method) {
                if (series.empty()) continue;
                int hit = -1;
                for (const auto& [it, med] : series)
                    if (med <= worst_final) {
                        hit = it;
                        break;
                    }
                f << mname << ',' << method << ',' << series.rbegin()->second
                  << ',' << hit << '\n';
            }
        }
    }

    // (c) Interval score per parameter and quantile width per design input of
    // the acquired inputs, averaged across replicates.
    std::ifstream af(base / "acquired.csv");
    VectorXd theta_true;
    {
        std::ifstream jf(base / "summary.json");
        if (jf) {
            json summary = json::parse(jf, nullptr, false);
            if (!summary.is_discarded() && summary.contains("theta_true_scaled")) {
                const auto v = summary["theta_true_scaled"].get<std::vector<double>>();
                theta_true = Eigen::Map<const VectorXd>(v.data(), v.size());
            }
        }
    }
    if (af && theta_true.size() > 0) {
        // acquired[method][replicate] = list of inputs
        std::map<std::string, std::map<int, std::vector<JointInput>>> acq;
        std::getline(af, line);
        while (std::getline(af, line)) {
            const auto f = split_csv(line);
            if (f.size() < 5) continue;
            acq[f[1]][std::stoi(f[0])].emplace_back(split_vec(f[3]), split_vec(f[4]));
        }
        std::ofstream f(base / "report_intervals.csv");
        f.precision(17);
        f << "kind,dim,method,value\n";
        for (const auto& [method, reps] : acq) {
            int q = 0, p = 0;
            for (const auto& [rep, inputs] : reps)
                if (!inputs.empty()) {
                    q = inputs.front().q();
                    p = inputs.front().p();
                }
            if (p != theta_true.size()) continue;
            double score_sum = 0.0;
            for (int j = 0; j < p; ++j) {
                std::vector<double> scores;
                for (const auto& [rep, inputs] : reps) {
                    if (inputs.size() < 2) continue;
                    std::vector<double> vals;
                    for (const auto& z : inputs) vals.push_back(z.params(j));
                    scores.push_back(interval_score(vals, 0.10, theta_true(j)));
                }
                if (scores.empty()) continue;
                double mean = 0.0;
                for (double s : scores) mean += s;
                mean /= static_cast<double>(scores.size());
                score_sum += mean;
                f << "theta_interval_score," << j << ',' << method << ',' << mean
                  << '\n';
            }
            f << "theta_interval_score_mean,all," << method << ','
              << score_sum / std::max(1, p) << '\n';
            for (int i = 0; i < q; ++i) {
                std::vector<double> widths;
                for (const auto& [rep, inputs] : reps) {
                    if (inputs.size() < 2) continue;
                    std::vector<double> vals;
                    for (const auto& z : inputs) vals.push_back(z.design(i));
                    widths.push_back(quantile_width(vals, 0.05, 0.95));
                }
                if (widths.empty()) continue;
                double mean = 0.0;
                for (double w : widths) mean += w;
                mean /= static_cast<double>(widths.size());
                f << "x_quantile_width," << i << ',' << method << ',' << mean
                  << '\n';
            }
        }
    }

    log << "report: wrote report_series.csv, report_thresholds.csv";
    if (af && theta_true.size() > 0) log << ", report_intervals.csv";
    log << "\n";
    return 0;
}

}  // namespace seqcal
