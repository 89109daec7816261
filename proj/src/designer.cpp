#include "seqcal/designer.hpp"

#include <chrono>
#include <cmath>

#include "seqcal/optim.hpp"
#include "seqcal/rng.hpp"

namespace seqcal {

const char* method_name(AcquisitionMethod m) {
    switch (m) {
        case AcquisitionMethod::Ap: return "ap";
        case AcquisitionMethod::Ay: return "ay";
        case AcquisitionMethod::AyFixed: return "ayfixed";
        case AcquisitionMethod::Rnd: return "rnd";
        case AcquisitionMethod::Lhs: return "lhs";
        case AcquisitionMethod::Var: return "var";
        case AcquisitionMethod::Imspe: return "imspe";
    }
    return "?";
}

std::optional<AcquisitionMethod> parse_method(const std::string& name) {
    for (AcquisitionMethod m :
         {AcquisitionMethod::Ap, AcquisitionMethod::Ay, AcquisitionMethod::AyFixed,
          AcquisitionMethod::Rnd, AcquisitionMethod::Lhs, AcquisitionMethod::Var,
          AcquisitionMethod::Imspe})
        if (name == method_name(m)) return m;
    return std::nullopt;
}

void DesignConfig::validate() const {
    if (n0 < 2) throw std::invalid_argument("DesignConfig: n0 >= 2 required");
    if (n < 1) throw std::invalid_argument("DesignConfig: n >= 1 required");
    if (n_pair < 0 || n_explore < 0)
        throw std::invalid_argument("DesignConfig: candidate counts >= 0");
    if (n_theta_ref < 1 || n_x_ref < 1)
        throw std::invalid_argument("DesignConfig: reference-grid sizes >= 1");
    if (n_threads < 1) throw std::invalid_argument("DesignConfig: n_threads >= 1");
}

VectorXd estimate_theta_hat(const Emulator& e, const FieldExperiment& fe,
                            const std::vector<VectorXd>& theta_ref) {
    if (theta_ref.empty())
        throw std::invalid_argument("estimate_theta_hat: empty reference grid");
    auto sse = [&](const VectorXd& theta) {
        const FieldEmulatorMoments fm = e.predict_field(theta, fe.field_x);
        return (fe.y - fm.mean).squaredNorm();
    };
    VectorXd best = theta_ref.front();
    double best_f = sse(best);
    for (const auto& th : theta_ref) {
        const double f = sse(th);
        if (f < best_f) {
            best_f = f;
            best = th;
        }
    }
    VectorXd polished = best;
    const double f = nelder_mead(sse, polished, fe.prior.lo, fe.prior.hi, 200);
    return f < best_f ? polished : best;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

VectorXd uniform_box(const VectorXd& lo, const VectorXd& hi, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VectorXd v(lo.size());
    for (int i = 0; i < lo.size(); ++i) v(i) = lo(i) + u(rng) * (hi(i) - lo(i));
    return v;
}

// One retry on simulator failure; rethrows on the second failure.
double evaluate_sim(const Simulator& sim, const JointInput& z) {
    try {
        const double v = sim(z);
        if (std::isfinite(v)) return v;
        throw std::runtime_error("simulator returned non-finite output");
    } catch (const std::exception&) {
        const double v = sim(z);
        if (!std::isfinite(v))
            throw std::runtime_error("simulator returned non-finite output twice");
        return v;
    }
}

}  // namespace

RunHistory run(const Simulator& sim, const FieldExperiment& fe,
               const DesignConfig& cfg, const IterationCallback& on_iter) {
    cfg.validate();
    const int q = static_cast<int>(fe.field_x.front().size());
    const int p = fe.prior.p();

    RunHistory hist;
    hist.dataset = SimDataset(q, p);

    Rng init_rng(cfg.init_seed != 0 ? cfg.init_seed : derive_seed(cfg.seed, 1));
    Rng ref_rng(derive_seed(cfg.seed, 2));
    Rng cand_rng(derive_seed(cfg.seed, 3));

    const VectorXd x_lo = VectorXd::Zero(q), x_hi = VectorXd::Ones(q);

    // Initial design over the joint box, parameters from the prior box.
    std::vector<JointInput> init_points;
    if (cfg.init == InitDesign::Lhs) {
        const auto u = lhs_sample(cfg.n0, q + p, init_rng);
        for (const auto& pt : u) {
            VectorXd theta =
                fe.prior.lo + pt.tail(p).cwiseProduct(fe.prior.hi - fe.prior.lo);
            init_points.emplace_back(pt.head(q), theta);
        }
    } else {
        for (int i = 0; i < cfg.n0; ++i)
            init_points.emplace_back(uniform_box(x_lo, x_hi, init_rng),
                                     uniform_box(fe.prior.lo, fe.prior.hi, init_rng));
    }
    try {
        for (const auto& z : init_points)
            hist.dataset.append(z, evaluate_sim(sim, z));
    } catch (const std::exception& ex) {
        hist.error = std::string("initial design: ") + ex.what();
        return hist;
    }

    // Reference grids, fixed for the whole run.
    AcquisitionContext ctx;
    for (const auto& u : lhs_sample(cfg.n_theta_ref, p, ref_rng))
        ctx.theta_ref.push_back(fe.prior.lo +
                                u.cwiseProduct(fe.prior.hi - fe.prior.lo));
    for (const auto& u : lhs_sample(cfg.n_x_ref, q, ref_rng)) ctx.x_ref.push_back(u);
    for (const auto& u : lhs_sample(cfg.n_theta_ref, q + p, ref_rng)) {
        VectorXd z(q + p);
        z.head(q) = u.head(q);
        z.tail(p) = fe.prior.lo + u.tail(p).cwiseProduct(fe.prior.hi - fe.prior.lo);
        ctx.z_ref.push_back(z);
    }

    // One-shot space-filling design consumed point-by-point by the Lhs baseline.
    std::vector<JointInput> lhs_plan;
    if (cfg.acquisition == AcquisitionMethod::Lhs) {
        for (const auto& u : lhs_sample(cfg.n, q + p, cand_rng)) {
            VectorXd theta =
                fe.prior.lo + u.tail(p).cwiseProduct(fe.prior.hi - fe.prior.lo);
            lhs_plan.emplace_back(u.head(q), theta);
        }
    }

    std::optional<KernelParams> warm;
    VectorXd theta_hat_fixed;

    for (int t = 1; t <= cfg.n; ++t) {
        const auto t0 = Clock::now();
        std::optional<Emulator> fitted;
        try {
            FitConfig fit;
            fit.multistarts = warm ? cfg.refit_multistarts : cfg.multistarts;
            fit.seed = derive_seed(cfg.seed, 1000 + t);
            fit.warm_start = warm;
            fitted = Emulator::fit(hist.dataset, fit);
        } catch (const EmulatorSingular& ex) {
            hist.error = std::string("emulator fit: ") + ex.what();
            return hist;
        }
        Emulator& e = *fitted;
        warm = e.kernel();

        VectorXd theta_hat;
        try {
            theta_hat = estimate_theta_hat(e, fe, ctx.theta_ref);
        } catch (const std::exception& ex) {
            hist.error = std::string("theta-hat estimation: ") + ex.what();
            return hist;
        }
        if (cfg.acquisition == AcquisitionMethod::AyFixed) {
            if (t == 1) theta_hat_fixed = theta_hat;
            ctx.theta_hat = theta_hat_fixed;
        } else {
            ctx.theta_hat = theta_hat;
        }

        // With unknown error structure, refit the discrepancy covariance from
        // the plug-in residuals and score against it instead of fe.Sigma.
        FieldExperiment fe_t = fe;
        DiscrepancyParams disc;
        const DiscrepancyParams* disc_ptr = nullptr;
        if (cfg.discrepancy == DiscrepancyMode::FitDiscrepancy) {
            const FieldEmulatorMoments fm = e.predict_field(ctx.theta_hat, fe.field_x);
            disc = fit_discrepancy(fe, fe.y - fm.mean,
                                   derive_seed(cfg.seed, 2000 + t));
            fe_t.Sigma = disc.covariance(fe.field_x);
            disc_ptr = &disc;
        }

        JointInput chosen;
        try {
            switch (cfg.acquisition) {
                case AcquisitionMethod::Rnd:
                    chosen = JointInput(uniform_box(x_lo, x_hi, cand_rng),
                                        uniform_box(fe.prior.lo, fe.prior.hi, cand_rng));
                    break;
                case AcquisitionMethod::Lhs:
                    chosen = lhs_plan[t - 1];
                    break;
                default: {
                    ctx.candidates = build_candidates(fe, fe.prior, cfg.n_pair,
                                                      cfg.n_explore, cand_rng);
                    std::vector<double> raw;
                    if (cfg.acquisition == AcquisitionMethod::Ap) {
                        raw = score_all_Ap(e, fe_t, ctx, cfg.n_threads);
                    } else if (cfg.acquisition == AcquisitionMethod::Ay ||
                               cfg.acquisition == AcquisitionMethod::AyFixed) {
                        raw = score_all_Ay(e, fe_t, ctx, disc_ptr, cfg.n_threads);
                    } else if (cfg.acquisition == AcquisitionMethod::Var) {
                        raw.reserve(ctx.candidates.size());
                        for (const auto& z : ctx.candidates)
                            raw.push_back(score_maxvar(e, z));
                    } else {  // Imspe
                        raw = score_all_imspe(e, ctx);
                    }
                    std::vector<AcquisitionScore> scores(raw.size());
                    for (int i = 0; i < static_cast<int>(raw.size()); ++i)
                        scores[i] = {i, raw[i]};
                    chosen = ctx.candidates[select(scores)];
                }
            }
        } catch (const std::exception& ex) {
            hist.error = std::string("acquisition: ") + ex.what();
            return hist;
        }

        double output;
        try {
            output = evaluate_sim(sim, chosen);
        } catch (const std::exception& ex) {
            hist.error = std::string("simulator: ") + ex.what();
            return hist;
        }
        hist.dataset.append(chosen, output);

        IterationRecord rec;
        rec.input = chosen;
        rec.output = output;
        rec.theta_hat = ctx.theta_hat;
        rec.kernel = e.kernel();
        rec.wall_ms = ms_since(t0);
        hist.records.push_back(rec);
        if (on_iter) on_iter(t, e, ctx.theta_hat);

        if (t == cfg.n) hist.final_emulator = std::move(e);
    }
    hist.complete = true;
    return hist;
}

}  // namespace seqcal
