#ifndef SEQCAL_POSTERIOR_HPP
#define SEQCAL_POSTERIOR_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "seqcal/emulator.hpp"
#include "seqcal/types.hpp"

namespace seqcal {

// Box prior over the (scaled) parameter space with a pointwise density.
struct PriorSpec {
    VectorXd lo;
    VectorXd hi;
    std::function<double(const VectorXd&)> density_fn;  // optional override

    static PriorSpec uniform(int p) {
        PriorSpec pr;
        pr.lo = VectorXd::Zero(p);
        pr.hi = VectorXd::Ones(p);
        return pr;
    }

    double density(const VectorXd& theta) const {
        if (((theta - lo).array() < 0.0).any() || ((hi - theta).array() < 0.0).any())
            return 0.0;
        if (density_fn) return density_fn(theta);
        return 1.0 / (hi - lo).prod();
    }
    int p() const { return static_cast<int>(lo.size()); }
};

// Field observations y at design inputs, with the residual-error covariance.
struct FieldExperiment {
    std::vector<VectorXd> field_x;  // d design inputs, scaled
    VectorXd y;                     // d observations, output units
    MatrixXd Sigma;                 // d x d SPD error covariance
    PriorSpec prior;

    int d() const { return static_cast<int>(y.size()); }
};

struct PosteriorMoments {
    double mean = 0.0;
    double var = 0.0;
};

// Discrepancy-plus-noise covariance hyperparameters:
//   Sigma^e_ij = sigma_eps2 * delta_ij + sigma_b2 * exp(-lambda * ||x_i - x_j||_1)
struct DiscrepancyParams {
    double sigma_eps2 = 1.0;
    double sigma_b2 = 0.0;
    double lambda = 1.0;
    bool fallback = false;  // set when the optimizer failed and defaults were used

    MatrixXd covariance(const std::vector<VectorXd>& field_x) const;
};

// log N(y; mu, C); throws CovarianceSingular when C is not SPD.
double mvn_logpdf(const VectorXd& y, const VectorXd& mu, const MatrixXd& C);

// E[p~(theta|y) | D_t]: MVN density of y at (mu_t, Sigma + S_t) times the prior.
double posterior_mean(const FieldEmulatorMoments& fm, const FieldExperiment& fe,
                      const VectorXd& theta);

// V[p~(theta|y) | D_t], nonnegative.
double posterior_var(const FieldEmulatorMoments& fm, const FieldExperiment& fe,
                     const VectorXd& theta);

PosteriorMoments posterior_moments(const FieldEmulatorMoments& fm,
                                   const FieldExperiment& fe, const VectorXd& theta);

// Expected posterior variance after a hypothetical acquisition with fantasy
// cross-covariance phi; the prior factor is applied by the caller. Throws
// NonPositiveDeterminant when Sigma + S - phi is numerically singular.
double expected_posterior_var(const FieldEmulatorMoments& fm, const FieldExperiment& fe,
                              const MatrixXd& phi);

// MLE of the discrepancy covariance hyperparameters from emulator residuals.
DiscrepancyParams fit_discrepancy(const FieldExperiment& fe, const VectorXd& residuals,
                                  std::uint64_t seed = 0);

}  // namespace seqcal

#endif
