#ifndef SEQCAL_KERNEL_HPP
#define SEQCAL_KERNEL_HPP

#include <cmath>

#include "seqcal/types.hpp"

namespace seqcal {

// Hyperparameters of the separable Matern-1.5 kernel
//   k(z, z') = tau^2 * prod_l (1 + |dz_l| e^{zeta_l}) exp(-e^{zeta_l} |dz_l|)
// plus a nugget added on the Gram diagonal.
struct KernelParams {
    VectorXd zeta;      // log inverse lengthscales, size q+p
    double log_tau2 = 0.0;
    double log_nugget = std::log(1e-8);

    double tau2() const { return std::exp(log_tau2); }
    double nugget() const { return std::exp(log_nugget); }
    int dim() const { return static_cast<int>(zeta.size()); }
};

// One-dimensional Matern-1.5 correlation term for scaled distance a = e^zeta |dz|.
inline double matern15_term(double a) { return (1.0 + a) * std::exp(-a); }

inline double matern15_corr(const VectorXd& z1, const VectorXd& z2, const VectorXd& zeta) {
    if (z1.size() != z2.size() || z1.size() != zeta.size())
        throw std::invalid_argument("matern15: dimension mismatch");
    double c = 1.0;
    for (Eigen::Index l = 0; l < zeta.size(); ++l) {
        const double a = std::exp(zeta(l)) * std::abs(z1(l) - z2(l));
        c *= matern15_term(a);
    }
    return c;
}

inline double matern15(const VectorXd& z1, const VectorXd& z2, const KernelParams& k) {
    return k.tau2() * matern15_corr(z1, z2, k.zeta);
}

inline double matern15(const JointInput& z1, const JointInput& z2, const KernelParams& k) {
    return matern15(z1.joint(), z2.joint(), k);
}

// Correlation matrix between row sets A (n x m) and B (r x m).
inline MatrixXd matern15_corr_matrix(const MatrixXd& A, const MatrixXd& B, const VectorXd& zeta) {
    if (A.cols() != B.cols() || A.cols() != zeta.size())
        throw std::invalid_argument("matern15_corr_matrix: dimension mismatch");
    MatrixXd C = MatrixXd::Ones(A.rows(), B.rows());
    for (Eigen::Index l = 0; l < zeta.size(); ++l) {
        const double inv_len = std::exp(zeta(l));
        for (Eigen::Index j = 0; j < B.rows(); ++j)
            for (Eigen::Index i = 0; i < A.rows(); ++i) {
                const double a = inv_len * std::abs(A(i, l) - B(j, l));
                C(i, j) *= matern15_term(a);
            }
    }
    return C;
}

// d/d zeta_l of the full correlation equals corr * (-a^2 / (1 + a)) with
// a = e^{zeta_l} |dz_l|; this returns the per-pair multiplicative factor.
inline double matern15_dcorr_factor(double z1l, double z2l, double zetal) {
    const double a = std::exp(zetal) * std::abs(z1l - z2l);
    return -a * a / (1.0 + a);
}

}  // namespace seqcal

#endif
