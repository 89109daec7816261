#include "seqcal/posterior.hpp"

#include <cmath>

#include "seqcal/optim.hpp"
#include "seqcal/rng.hpp"

namespace seqcal {

namespace {

// log of the d-dimensional prefactor 2^d pi^{d/2} |C|^{1/2}.
double log_prefactor(int d, double half_logdet_C) {
    return d * std::log(2.0) + 0.5 * d * std::log(M_PI) + half_logdet_C;
}

struct CholInfo {
    Eigen::LLT<MatrixXd> llt;
    double half_logdet = 0.0;
};

CholInfo chol_or_throw(const MatrixXd& C, const char* what) {
    CholInfo ci;
    ci.llt.compute(C);
    if (ci.llt.info() != Eigen::Success) throw CovarianceSingular(what);
    const auto& L = ci.llt.matrixL();
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
        const double lii = L(i, i);
        if (!(lii > 0.0) || !std::isfinite(lii)) throw CovarianceSingular(what);
        ci.half_logdet += std::log(lii);
    }
    return ci;
}

double logpdf_with(const CholInfo& ci, const VectorXd& r) {
    const double quad = r.dot(ci.llt.solve(r));
    return -0.5 * r.size() * std::log(2.0 * M_PI) - ci.half_logdet - 0.5 * quad;
}

}  // namespace

double mvn_logpdf(const VectorXd& y, const VectorXd& mu, const MatrixXd& C) {
    if (y.size() != mu.size() || C.rows() != y.size() || C.cols() != y.size())
        throw std::invalid_argument("mvn_logpdf: dimension mismatch");
    const CholInfo ci = chol_or_throw(C, "mvn_logpdf: covariance not SPD");
    return logpdf_with(ci, y - mu);
}

double posterior_mean(const FieldEmulatorMoments& fm, const FieldExperiment& fe,
                      const VectorXd& theta) {
    const double p = fe.prior.density(theta);
    if (p == 0.0) return 0.0;
    return std::exp(mvn_logpdf(fe.y, fm.mean, fe.Sigma + fm.cov)) * p;
}

double posterior_var(const FieldEmulatorMoments& fm, const FieldExperiment& fe,
                     const VectorXd& theta) {
    const double p = fe.prior.density(theta);
    if (p == 0.0) return 0.0;
    const int d = fe.d();
    const CholInfo sigma_chol = chol_or_throw(fe.Sigma, "posterior_var: Sigma not SPD");
    const double log_c = log_prefactor(d, sigma_chol.half_logdet);

    const double log_first =
        mvn_logpdf(fe.y, fm.mean, 0.5 * fe.Sigma + fm.cov) - log_c;
    const double log_mean = mvn_logpdf(fe.y, fm.mean, fe.Sigma + fm.cov);
    const double v = std::exp(log_first) - std::exp(2.0 * log_mean);
    if (v < -1e-12) return 0.0;
    return std::max(0.0, v) * p * p;
}

PosteriorMoments posterior_moments(const FieldEmulatorMoments& fm,
                                   const FieldExperiment& fe, const VectorXd& theta) {
    return {posterior_mean(fm, fe, theta), posterior_var(fm, fe, theta)};
}

double expected_posterior_var(const FieldEmulatorMoments& fm, const FieldExperiment& fe,
                              const MatrixXd& phi) {
    const int d = fe.d();
    const CholInfo sigma_chol =
        chol_or_throw(fe.Sigma, "expected_posterior_var: Sigma not SPD");
    const double log_c_sigma = log_prefactor(d, sigma_chol.half_logdet);

    const double log_first =
        mvn_logpdf(fe.y, fm.mean, 0.5 * fe.Sigma + fm.cov) - log_c_sigma;

    MatrixXd deflated = fe.Sigma + fm.cov - phi;
    deflated = 0.5 * (deflated + deflated.transpose());
    CholInfo defl_chol;
    try {
        defl_chol = chol_or_throw(deflated, "expected_posterior_var: deflated covariance");
    } catch (const CovarianceSingular&) {
        throw NonPositiveDeterminant("expected_posterior_var: |Sigma + S - phi| <= 0");
    }
    if (2.0 * defl_chol.half_logdet < std::log(1e-300))
        throw NonPositiveDeterminant("expected_posterior_var: |Sigma + S - phi| ~ 0");

    const double log_second =
        mvn_logpdf(fe.y, fm.mean, 0.5 * (fe.Sigma + fm.cov + phi)) -
        log_prefactor(d, defl_chol.half_logdet);

    const double v = std::exp(log_first) - std::exp(log_second);
    if (v < -1e-12 * std::exp(log_first)) return 0.0;
    return std::max(0.0, v);
}

MatrixXd DiscrepancyParams::covariance(const std::vector<VectorXd>& field_x) const {
    const int d = static_cast<int>(field_x.size());
    MatrixXd S(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const double l1 = (field_x[i] - field_x[j]).cwiseAbs().sum();
            S(i, j) = sigma_b2 * std::exp(-lambda * l1) + (i == j ? sigma_eps2 : 0.0);
        }
    return S;
}

DiscrepancyParams fit_discrepancy(const FieldExperiment& fe, const VectorXd& residuals,
                                  std::uint64_t seed) {
    const int d = fe.d();
    if (d < 3)
        throw std::invalid_argument("fit_discrepancy: need d >= 3 for identifiability");
    if (residuals.size() != d)
        throw std::invalid_argument("fit_discrepancy: residual length mismatch");

    // w = (log sigma_eps2, log sigma_b2, log lambda)
    const VectorXd lo = (VectorXd(3) << std::log(1e-8), std::log(1e-10), std::log(1e-3)).finished();
    const VectorXd hi = (VectorXd(3) << std::log(1e3), std::log(1e3), std::log(1e3)).finished();

    auto nll = [&](const VectorXd& w) -> double {
        DiscrepancyParams dp;
        dp.sigma_eps2 = std::exp(w(0));
        dp.sigma_b2 = std::exp(w(1));
        dp.lambda = std::exp(w(2));
        try {
            return -mvn_logpdf(residuals, VectorXd::Zero(d), dp.covariance(fe.field_x));
        } catch (const CovarianceSingular&) {
            return std::numeric_limits<double>::max();
        }
    };

    Rng rng(derive_seed(seed, 0x646973ULL));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double sample_var =
        std::max(1e-8, residuals.squaredNorm() / std::max(1, d - 1));

    double best = std::numeric_limits<double>::max();
    VectorXd best_w;
    for (int s = 0; s < 6; ++s) {
        VectorXd w(3);
        if (s == 0) {
            w << std::log(sample_var), std::log(sample_var), std::log(1.0);
        } else {
            for (int i = 0; i < 3; ++i) w(i) = lo(i) + u(rng) * (hi(i) - lo(i));
        }
        const double f = nelder_mead(nll, w, lo, hi, 400);
        if (f < best) {
            best = f;
            best_w = w;
        }
    }

    DiscrepancyParams dp;
    if (best >= std::numeric_limits<double>::max()) {
        dp.sigma_eps2 = sample_var;
        dp.sigma_b2 = 0.0;
        dp.lambda = 1.0;
        dp.fallback = true;
        return dp;
    }
    dp.sigma_eps2 = std::exp(best_w(0));
    dp.sigma_b2 = std::exp(best_w(1));
    dp.lambda = std::exp(best_w(2));
    return dp;
}

}  // namespace seqcal
