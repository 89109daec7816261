#include "seqcal/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace seqcal {

namespace {

double log_c(int d, double half_logdet) {
    return d * std::log(2.0) + 0.5 * d * std::log(M_PI) + half_logdet;
}

// Per-reference-point state for evaluating the variance-reduction term with
// rank-1 updates: B = 0.5*(Sigma+S), A = Sigma+S, r = y - mu.
struct RankOneBlock {
    Eigen::LLT<MatrixXd> cholB;
    Eigen::LLT<MatrixXd> cholA;
    double logdetB = 0.0;
    double logdetA = 0.0;
    VectorXd Binv_r;
    double quadB = 0.0;
    double prior_sq = 0.0;
    double term1 = 0.0;  // supremum substitution (full variance reduction)
    bool valid = false;
};

double chol_logdet(const Eigen::LLT<MatrixXd>& llt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < llt.matrixLLT().rows(); ++i)
        s += 2.0 * std::log(llt.matrixL()(i, i));
    return s;
}

MatrixXd psd_clip(MatrixXd S) {
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    if (es.eigenvalues().minCoeff() >= 0.0) return S;
    VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

bool make_block(const MatrixXd& Sigma, const MatrixXd& S, const VectorXd& y,
                const VectorXd& mu, double prior_sq, RankOneBlock& blk) {
    const int d = static_cast<int>(y.size());
    blk.prior_sq = prior_sq;
    blk.cholB.compute(0.5 * (Sigma + S));
    blk.cholA.compute(Sigma + S);
    if (blk.cholB.info() != Eigen::Success || blk.cholA.info() != Eigen::Success)
        return false;
    blk.logdetB = chol_logdet(blk.cholB);
    blk.logdetA = chol_logdet(blk.cholA);
    const VectorXd r = y - mu;
    blk.Binv_r = blk.cholB.solve(r);
    blk.quadB = r.dot(blk.Binv_r);

    // term1 = f_N(y; mu, 0.5*Sigma + S) / (2^d pi^{d/2} |Sigma|^{1/2})
    Eigen::LLT<MatrixXd> sig(0.5 * Sigma + S);
    Eigen::LLT<MatrixXd> sig_only(Sigma);
    if (sig.info() != Eigen::Success || sig_only.info() != Eigen::Success) return false;
    const VectorXd w = sig.solve(r);
    const double logpdf = -0.5 * d * std::log(2.0 * M_PI) - 0.5 * chol_logdet(sig) -
                          0.5 * r.dot(w);
    blk.term1 = std::exp(logpdf - log_c(d, 0.5 * chol_logdet(sig_only)));
    blk.valid = true;
    return true;
}

// Second term of the expected-variance identity for fantasy cross-covariance
// phi = c c^T / vstar; falls back to term1 when the deflated determinant is
// numerically nonpositive.
double reduction_term(const RankOneBlock& blk, const VectorXd& c, double vstar) {
    const int d = static_cast<int>(c.size());
    const VectorXd b = blk.cholB.solve(c);
    const double beta = c.dot(b) / (2.0 * vstar);
    const double gamma = blk.Binv_r.dot(c);
    const double quad = blk.quadB - (gamma * gamma / (2.0 * vstar)) / (1.0 + beta);
    const double logpdf = -0.5 * d * std::log(2.0 * M_PI) -
                          0.5 * (blk.logdetB + std::log1p(beta)) - 0.5 * quad;

    const VectorXd a = blk.cholA.solve(c);
    const double t = c.dot(a) / vstar;
    if (1.0 - t <= 1e-12) return blk.term1;
    const double half_logdet_defl = 0.5 * (blk.logdetA + std::log1p(-t));
    return std::exp(logpdf - log_c(d, half_logdet_defl));
}

// Per-dimension separable correlation between point rows A (over dims
// [off, off+len)) and full joint candidate rows Z.
MatrixXd partial_corr(const MatrixXd& A, const std::vector<JointInput>& cand,
                      const VectorXd& zeta, int off, int len, bool design_part) {
    const int na = static_cast<int>(A.rows());
    const int nc = static_cast<int>(cand.size());
    MatrixXd C = MatrixXd::Ones(na, nc);
    for (int l = 0; l < len; ++l) {
        const double inv_len = std::exp(zeta(off + l));
        for (int j = 0; j < nc; ++j) {
            const double zj =
                design_part ? cand[j].design(l) : cand[j].params(l);
            for (int i = 0; i < na; ++i) {
                const double a = inv_len * std::abs(A(i, l) - zj);
                C(i, j) *= matern15_term(a);
            }
        }
    }
    return C;
}

MatrixXd candidate_matrix(const std::vector<JointInput>& cand) {
    const int nc = static_cast<int>(cand.size());
    MatrixXd Z(nc, cand.empty() ? 0 : cand[0].dim());
    for (int j = 0; j < nc; ++j) Z.row(j) = cand[j].joint().transpose();
    return Z;
}

void parallel_blocks(int total, int n_threads, const std::function<void(int, int)>& work) {
    n_threads = std::max(1, std::min(n_threads, total));
    if (n_threads == 1) {
        work(0, total);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (total + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(total, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<double> score_all_Ap(const Emulator& e, const FieldExperiment& fe,
                                 const AcquisitionContext& ctx, int n_threads) {
    const int T = static_cast<int>(ctx.theta_ref.size());
    const int d = fe.d();
    const int C = static_cast<int>(ctx.candidates.size());
    if (T < 1) throw std::invalid_argument("score_all_Ap: empty theta_ref");
    if (C < 1) return {};

    const int q = e.q(), p = e.p(), dim = q + p;
    const double tau2 = e.kernel().tau2();
    const double nug = e.kernel().nugget();
    const double s2 = e.output_scale() * e.output_scale();

    // Field inputs paired with every reference parameter, stacked row-wise.
    MatrixXd ZF(T * d, dim);
    for (int j = 0; j < T; ++j)
        for (int i = 0; i < d; ++i) {
            ZF.row(j * d + i).head(q) = fe.field_x[i].transpose();
            ZF.row(j * d + i).tail(p) = ctx.theta_ref[j].transpose();
        }
    const MatrixXd Kf = tau2 * matern15_corr_matrix(e.train_inputs(), ZF, e.kernel().zeta);

    // Per-theta field moments and factorizations, built once per iteration.
    std::vector<RankOneBlock> blocks(T);
    {
        const MatrixXd W = e.solve_K(Kf);  // n x (T*d)
        for (int j = 0; j < T; ++j) {
            const double pr = fe.prior.density(ctx.theta_ref[j]);
            if (pr == 0.0) continue;  // zero prior contributes nothing
            const auto Kfj = Kf.middleCols(j * d, d);
            const auto Wj = W.middleCols(j * d, d);
            const VectorXd mu =
                (e.output_center() +
                 e.output_scale() * (Kfj.transpose() * e.alpha()).array())
                    .matrix();
            const MatrixXd Zfj = ZF.middleRows(j * d, d);
            MatrixXd S = s2 * (tau2 * matern15_corr_matrix(Zfj, Zfj, e.kernel().zeta) -
                               Kfj.transpose() * Wj);
            S = psd_clip(S);
            if (!make_block(fe.Sigma, S, fe.y, mu, pr * pr, blocks[j]))
                throw CovarianceSingular("score_all_Ap: Sigma + S not SPD");
        }
    }

    // Separable correlation pieces between field/reference inputs and candidates.
    MatrixXd FX(d, q);
    for (int i = 0; i < d; ++i) FX.row(i) = fe.field_x[i].transpose();
    MatrixXd TH(T, p);
    for (int j = 0; j < T; ++j) TH.row(j) = ctx.theta_ref[j].transpose();
    const MatrixXd CX = partial_corr(FX, ctx.candidates, e.kernel().zeta, 0, q, true);
    const MatrixXd CT = partial_corr(TH, ctx.candidates, e.kernel().zeta, q, p, false);
    const MatrixXd Zcand = candidate_matrix(ctx.candidates);

    std::vector<double> scores(C, 0.0);
    parallel_blocks(C, n_threads, [&](int lo, int hi) {
        const int nb = hi - lo;
        const MatrixXd Ks =
            tau2 * matern15_corr_matrix(e.train_inputs(), Zcand.middleRows(lo, nb),
                                        e.kernel().zeta);
        const MatrixXd Vs = e.solve_K(Ks);            // n x nb
        const MatrixXd Dot = Kf.transpose() * Vs;     // (T*d) x nb
        VectorXd c(d);
        for (int b = 0; b < nb; ++b) {
            const int ci = lo + b;
            const double var_std =
                std::max(0.0, tau2 - Ks.col(b).dot(Vs.col(b)));
            const double vstar = s2 * (var_std + nug);
            double acc = 0.0;
            for (int j = 0; j < T; ++j) {
                if (!blocks[j].valid) continue;
                for (int i = 0; i < d; ++i)
                    c(i) = s2 * (tau2 * CX(i, ci) * CT(j, ci) - Dot(j * d + i, b));
                acc += blocks[j].prior_sq * reduction_term(blocks[j], c, vstar);
            }
            scores[ci] = acc / T;
        }
    });
    return scores;
}

double score_Ap(const Emulator& e, const FieldExperiment& fe,
                const AcquisitionContext& ctx, const JointInput& z_star) {
    const int T = static_cast<int>(ctx.theta_ref.size());
    if (T < 1) throw std::invalid_argument("score_Ap: empty theta_ref");
    double acc = 0.0;
    for (const auto& theta : ctx.theta_ref) {
        const double pr = fe.prior.density(theta);
        if (pr == 0.0) continue;
        const FieldEmulatorMoments fm = e.predict_field(theta, fe.field_x);
        const MatrixXd phi = e.fantasy_cross_cov(z_star, theta, fe.field_x);
        const double term1 =
            std::exp(mvn_logpdf(fe.y, fm.mean, 0.5 * fe.Sigma + fm.cov) -
                     log_c(fe.d(), 0.5 * chol_logdet(Eigen::LLT<MatrixXd>(fe.Sigma))));
        double epv;
        try {
            epv = expected_posterior_var(fm, fe, phi);
        } catch (const NonPositiveDeterminant&) {
            epv = 0.0;  // numerically fully-informative candidate
        }
        acc += pr * pr * (term1 - epv);
    }
    return acc / T;
}

namespace {

// Augmented error covariance column for a reference design input x against
// the field design inputs.
VectorXd augmented_sigma_cross(const FieldExperiment& fe, const VectorXd& x,
                               const DiscrepancyParams* disc) {
    const int d = fe.d();
    VectorXd cross = VectorXd::Zero(d);
    if (disc) {
        for (int i = 0; i < d; ++i) {
            const double l1 = (fe.field_x[i] - x).cwiseAbs().sum();
            cross(i) = disc->sigma_b2 * std::exp(-disc->lambda * l1);
        }
    }
    return cross;
}

double augmented_sigma_diag(const FieldExperiment& fe, const DiscrepancyParams* disc) {
    if (disc) return disc->sigma_eps2 + disc->sigma_b2;
    return fe.Sigma(0, 0);
}

}  // namespace

std::vector<double> score_all_Ay(const Emulator& e, const FieldExperiment& fe,
                                 const AcquisitionContext& ctx,
                                 const DiscrepancyParams* disc, int n_threads) {
    const int R = static_cast<int>(ctx.x_ref.size());
    const int d = fe.d();
    const int C = static_cast<int>(ctx.candidates.size());
    if (R < 1) throw std::invalid_argument("score_all_Ay: empty x_ref");
    if (ctx.theta_hat.size() != e.p())
        throw std::invalid_argument("score_all_Ay: theta_hat not set");
    if (C < 1) return {};

    const int q = e.q(), p = e.p(), dim = q + p;
    const double tau2 = e.kernel().tau2();
    const double nug = e.kernel().nugget();
    const double s2 = e.output_scale() * e.output_scale();
    const double prior_sq = std::pow(fe.prior.density(ctx.theta_hat), 2);

    // Stacked points: d field inputs then R reference inputs, all at theta_hat.
    const int P = d + R;
    MatrixXd ZP(P, dim);
    for (int i = 0; i < d; ++i) {
        ZP.row(i).head(q) = fe.field_x[i].transpose();
        ZP.row(i).tail(p) = ctx.theta_hat.transpose();
    }
    for (int r = 0; r < R; ++r) {
        ZP.row(d + r).head(q) = ctx.x_ref[r].transpose();
        ZP.row(d + r).tail(p) = ctx.theta_hat.transpose();
    }
    const MatrixXd Kp = tau2 * matern15_corr_matrix(e.train_inputs(), ZP, e.kernel().zeta);
    const MatrixXd Wp = e.solve_K(Kp);  // n x P
    const VectorXd means =
        (e.output_center() + e.output_scale() * (Kp.transpose() * e.alpha()).array())
            .matrix();

    const MatrixXd Cpp = matern15_corr_matrix(ZP, ZP, e.kernel().zeta);
    auto cov_pp = [&](int i, int j) {
        return s2 * (tau2 * Cpp(i, j) - Kp.col(i).dot(Wp.col(j)));
    };

    MatrixXd S_ff(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) S_ff(i, j) = cov_pp(i, j);

    // One augmented (d+1)-system per reference design input.
    std::vector<RankOneBlock> blocks(R);
    const double sig_diag = augmented_sigma_diag(fe, disc);
    for (int r = 0; r < R; ++r) {
        MatrixXd Sx(d + 1, d + 1);
        Sx.topLeftCorner(d, d) = S_ff;
        for (int i = 0; i < d; ++i) {
            Sx(i, d) = cov_pp(i, d + r);
            Sx(d, i) = Sx(i, d);
        }
        Sx(d, d) = cov_pp(d + r, d + r);
        Sx = psd_clip(Sx);

        MatrixXd SigX = MatrixXd::Zero(d + 1, d + 1);
        SigX.topLeftCorner(d, d) = fe.Sigma;
        const VectorXd cross = augmented_sigma_cross(fe, ctx.x_ref[r], disc);
        SigX.col(d).head(d) = cross;
        SigX.row(d).head(d) = cross.transpose();
        SigX(d, d) = sig_diag;

        VectorXd yx(d + 1), mux(d + 1);
        yx << fe.y, means(d + r);  // emulator mean as the plug-in observation
        mux << means.head(d), means(d + r);
        if (!make_block(SigX, Sx, yx, mux, prior_sq, blocks[r]))
            throw CovarianceSingular("score_all_Ay: augmented covariance not SPD");
    }

    MatrixXd PX(P, q);
    for (int i = 0; i < P; ++i) PX.row(i) = ZP.row(i).head(q);
    const MatrixXd CXP = partial_corr(PX, ctx.candidates, e.kernel().zeta, 0, q, true);
    MatrixXd THhat(1, p);
    THhat.row(0) = ctx.theta_hat.transpose();
    const MatrixXd CThat = partial_corr(THhat, ctx.candidates, e.kernel().zeta, q, p, false);
    const MatrixXd Zcand = candidate_matrix(ctx.candidates);

    std::vector<double> scores(C, 0.0);
    parallel_blocks(C, n_threads, [&](int lo, int hi) {
        const int nb = hi - lo;
        const MatrixXd Ks =
            tau2 * matern15_corr_matrix(e.train_inputs(), Zcand.middleRows(lo, nb),
                                        e.kernel().zeta);
        const MatrixXd Vs = e.solve_K(Ks);
        const MatrixXd Dot = Kp.transpose() * Vs;  // P x nb
        VectorXd c(d + 1);
        for (int b = 0; b < nb; ++b) {
            const int ci = lo + b;
            const double var_std = std::max(0.0, tau2 - Ks.col(b).dot(Vs.col(b)));
            const double vstar = s2 * (var_std + nug);
            const double ct = CThat(0, ci);
            VectorXd c_all(P);
            for (int i = 0; i < P; ++i)
                c_all(i) = s2 * (tau2 * CXP(i, ci) * ct - Dot(i, b));
            double acc = 0.0;
            for (int r = 0; r < R; ++r) {
                c.head(d) = c_all.head(d);
                c(d) = c_all(d + r);
                acc += blocks[r].prior_sq * reduction_term(blocks[r], c, vstar);
            }
            scores[ci] = acc / R;
        }
    });
    return scores;
}

double score_Ay(const Emulator& e, const FieldExperiment& fe,
                const AcquisitionContext& ctx, const JointInput& z_star,
                const DiscrepancyParams* disc) {
    AcquisitionContext single = ctx;
    single.candidates = {z_star};
    return score_all_Ay(e, fe, single, disc, 1)[0];
}

double score_maxvar(const Emulator& e, const JointInput& z_star) {
    return e.predict(z_star).second;
}

std::vector<double> score_all_imspe(const Emulator& e, const AcquisitionContext& ctx) {
    const int R = static_cast<int>(ctx.z_ref.size());
    const int C = static_cast<int>(ctx.candidates.size());
    if (R < 1) throw std::invalid_argument("score_all_imspe: empty z_ref");

    const double tau2 = e.kernel().tau2();
    const double nug = e.kernel().nugget();
    const double s2 = e.output_scale() * e.output_scale();

    MatrixXd ZR(R, e.q() + e.p());
    for (int r = 0; r < R; ++r) ZR.row(r) = ctx.z_ref[r].transpose();
    const MatrixXd Kz = tau2 * matern15_corr_matrix(e.train_inputs(), ZR, e.kernel().zeta);
    const MatrixXd Wz = e.solve_K(Kz);
    VectorXd var_ref(R);
    for (int r = 0; r < R; ++r)
        var_ref(r) = s2 * std::max(0.0, tau2 - Kz.col(r).dot(Wz.col(r)));
    const double total_var = var_ref.sum();
    const MatrixXd Czr = matern15_corr_matrix(
        ZR, candidate_matrix(ctx.candidates), e.kernel().zeta);

    std::vector<double> scores(C, 0.0);
    for (int ci = 0; ci < C; ++ci) {
        const VectorXd zs = ctx.candidates[ci].joint();
        const VectorXd ks = e.kvec(zs);
        const VectorXd vs = e.solve_K(ks);
        const double vstar = s2 * (std::max(0.0, tau2 - ks.dot(vs)) + nug);
        double reduction = 0.0;
        for (int r = 0; r < R; ++r) {
            const double cov = s2 * (tau2 * Czr(r, ci) - Kz.col(r).dot(vs));
            reduction += cov * cov / vstar;
        }
        scores[ci] = -(total_var - reduction);
    }
    return scores;
}

double score_imspe(const Emulator& e, const AcquisitionContext& ctx,
                   const JointInput& z_star) {
    AcquisitionContext single = ctx;
    single.candidates = {z_star};
    return score_all_imspe(e, single)[0];
}

int select(const std::vector<AcquisitionScore>& scores) {
    if (scores.empty()) throw std::invalid_argument("select: empty score list");
    bool have = false;
    double best_score = 0.0;
    int best_index = -1;
    for (const auto& s : scores) {
        if (std::isnan(s.score)) continue;
        if (!have || s.score > best_score ||
            (s.score == best_score && s.index < best_index)) {
            have = true;
            best_score = s.score;
            best_index = s.index;
        }
    }
    if (!have) throw AcquisitionFailed("select: all scores are NaN");
    return best_index;
}

std::vector<JointInput> build_candidates(const FieldExperiment& fe,
                                         const PriorSpec& prior, int n_pair,
                                         int n_explore, Rng& rng) {
    if (n_pair < 0 || n_explore < 0)
        throw std::invalid_argument("build_candidates: negative counts");
    std::vector<VectorXd> unique_x;
    for (const auto& x : fe.field_x) {
        bool seen = false;
        for (const auto& u : unique_x)
            if (u.size() == x.size() && (u - x).lpNorm<Eigen::Infinity>() == 0.0) {
                seen = true;
                break;
            }
        if (!seen) unique_x.push_back(x);
    }

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int p = prior.p();
    auto sample_theta = [&]() {
        VectorXd th(p);
        for (int i = 0; i < p; ++i)
            th(i) = prior.lo(i) + u01(rng) * (prior.hi(i) - prior.lo(i));
        return th;
    };

    std::vector<JointInput> cands;
    cands.reserve(unique_x.size() * n_pair + n_explore);
    for (const auto& x : unique_x)
        for (int k = 0; k < n_pair; ++k) cands.emplace_back(x, sample_theta());
    const int q = unique_x.empty() ? static_cast<int>(fe.field_x.front().size())
                                   : static_cast<int>(unique_x.front().size());
    for (int k = 0; k < n_explore; ++k) {
        VectorXd x(q);
        for (int i = 0; i < q; ++i) x(i) = u01(rng);
        cands.emplace_back(x, sample_theta());
    }
    return cands;
}

std::vector<VectorXd> lhs_sample(int n, int dims, Rng& rng) {
    if (n < 1 || dims < 1) throw std::invalid_argument("lhs_sample: n, dims >= 1");
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    auto one_lhs = [&]() {
        MatrixXd pts(n, dims);
        std::vector<int> perm(n);
        for (int l = 0; l < dims; ++l) {
            for (int i = 0; i < n; ++i) perm[i] = i;
            std::shuffle(perm.begin(), perm.end(), rng);
            for (int i = 0; i < n; ++i) pts(i, l) = (perm[i] + u01(rng)) / n;
        }
        return pts;
    };
    auto min_dist = [&](const MatrixXd& pts) {
        double m = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                m = std::min(m, (pts.row(i) - pts.row(j)).squaredNorm());
        return m;
    };

    MatrixXd best = one_lhs();
    double best_d = n > 1 ? min_dist(best) : 0.0;
    for (int trial = 1; trial < 10 && n > 1; ++trial) {
        MatrixXd cand = one_lhs();
        const double dd = min_dist(cand);
        if (dd > best_d) {
            best = cand;
            best_d = dd;
        }
    }
    std::vector<VectorXd> out(n);
    for (int i = 0; i < n; ++i) out[i] = best.row(i).transpose();
    return out;
}

}  // namespace seqcal
