#ifndef SEQCAL_EMULATOR_HPP
#define SEQCAL_EMULATOR_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "seqcal/kernel.hpp"
#include "seqcal/types.hpp"

namespace seqcal {

struct FitConfig {
    int multistarts = 8;
    int max_iterations = 100;
    std::uint64_t seed = 0;
    bool fit_nugget = true;
    double nugget_floor = 1e-8;  // standardized units
    std::optional<KernelParams> warm_start;
};

// Emulator moments of the simulation output at the field design inputs,
// all paired with one parameter vector.
struct FieldEmulatorMoments {
    VectorXd mean;  // size d
    MatrixXd cov;   // d x d, PSD-clipped
};

// Zero-mean GP over joint inputs with a cached Cholesky factorization.
// Outputs are standardized internally; all public values are in original
// output units. Immutable after fit.
class Emulator {
public:
    static Emulator fit(const SimDataset& data, const FitConfig& cfg = {});

    std::pair<double, double> predict(const JointInput& z) const;  // (mean, var)

    FieldEmulatorMoments predict_field(const VectorXd& theta,
                                       const std::vector<VectorXd>& field_x) const;

    // Rank-1 matrix phi(theta, z*) from the fantasy-update identity.
    MatrixXd fantasy_cross_cov(const JointInput& z_star, const VectorXd& theta,
                               const std::vector<VectorXd>& field_x) const;

    // Updated predictive mean at z given a hypothetical observation (z*, eta*),
    // without refactorization.
    double fantasy_update_mean(const JointInput& z, const JointInput& z_star,
                               double eta_star) const;

    // Predictive covariance cov_t(z, z') in original units.
    double cross_cov(const JointInput& z1, const JointInput& z2) const;

    const KernelParams& kernel() const { return kernel_; }
    int q() const { return q_; }
    int p() const { return p_; }
    int train_size() const { return static_cast<int>(train_outputs_.size()); }
    const MatrixXd& train_inputs() const { return train_inputs_; }

    double output_center() const { return center_; }
    double output_scale() const { return scale_; }
    // Nugget and prior variance in original output units.
    double nugget() const { return scale_ * scale_ * kernel_.nugget(); }
    double prior_var() const { return scale_ * scale_ * kernel_.tau2(); }

    // Internals used by batched acquisition scoring (standardized units).
    VectorXd kvec(const VectorXd& z) const;             // k_t(z), size n
    MatrixXd solve_K(const MatrixXd& rhs) const;        // K_t^{-1} rhs
    const VectorXd& alpha() const { return alpha_; }
    double mean_std(const VectorXd& kv) const { return kv.dot(alpha_); }
    double var_std(const VectorXd& z, const VectorXd& kv) const;

private:
    Emulator() = default;

    int q_ = 0;
    int p_ = 0;
    KernelParams kernel_;
    MatrixXd train_inputs_;    // n x (q+p)
    VectorXd train_outputs_;   // standardized
    double center_ = 0.0;
    double scale_ = 1.0;
    Eigen::LLT<MatrixXd> chol_K_;
    VectorXd alpha_;  // K^{-1} eta (standardized)

    VectorXd joint_at(const VectorXd& theta, const VectorXd& x) const;
    double clip_var(double v) const;
};

}  // namespace seqcal

#endif
