#ifndef SEQCAL_TESTS_HELPERS_HPP
#define SEQCAL_TESTS_HELPERS_HPP

#include <random>

#include "seqcal/emulator.hpp"
#include "seqcal/kernel.hpp"
#include "seqcal/posterior.hpp"
#include "seqcal/rng.hpp"
#include "seqcal/testbeds.hpp"
#include "seqcal/types.hpp"

namespace seqcal::testing {

inline VectorXd random_vec(int n, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

inline MatrixXd random_spd(int d, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    MatrixXd A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = g(rng);
    MatrixXd S = scale * (A * A.transpose()) / d;
    S.diagonal().array() += 1e-6 * scale;
    return S;
}

// GP predictions recomputed from scratch at fixed hyperparameters, mirroring
// the emulator's standardization convention. Serves as the refit oracle.
struct ManualGP {
    MatrixXd Z;
    KernelParams k;
    double center = 0.0;
    double scale = 1.0;
    Eigen::LLT<MatrixXd> llt;
    VectorXd alpha;

    ManualGP(const MatrixXd& inputs, const VectorXd& outputs_orig,
             const KernelParams& kernel, double c, double s)
        : Z(inputs), k(kernel), center(c), scale(s) {
        const VectorXd y_std = (outputs_orig.array() - center) / scale;
        MatrixXd K = k.tau2() * matern15_corr_matrix(Z, Z, k.zeta);
        K.diagonal().array() += k.nugget();
        llt.compute(K);
        alpha = llt.solve(y_std);
    }

    VectorXd kvec(const VectorXd& z) const {
        return k.tau2() * matern15_corr_matrix(Z, z.transpose(), k.zeta).col(0);
    }
    double mean(const VectorXd& z) const {
        return center + scale * kvec(z).dot(alpha);
    }
    double var(const VectorXd& z) const {
        const VectorXd kv = kvec(z);
        return scale * scale * (k.tau2() - kv.dot(llt.solve(kv)));
    }
    double cov(const VectorXd& a, const VectorXd& b) const {
        return scale * scale *
               (k.tau2() * matern15_corr(a, b, k.zeta) -
                kvec(a).dot(llt.solve(kvec(b))));
    }
};

// Emulator fitted to sinusoidal simulator data on a Latin hypercube of size n.
inline Emulator sine_emulator(int n, std::uint64_t seed) {
    Rng rng(seed);
    SimDataset data(1, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const double x = (i + u(rng)) / n;
        const double th = u(rng);
        data.append(JointInput(VectorXd::Constant(1, x), VectorXd::Constant(1, th)),
                    eval_sine2d(x, th));
    }
    FitConfig cfg;
    cfg.seed = seed;
    return Emulator::fit(data, cfg);
}

inline FieldExperiment sine_field(std::uint64_t seed, double sigma = 0.2,
                                  bool with_bias = false) {
    Rng rng(seed);
    auto model = SyntheticModel::sine2d(with_bias);
    model.sigma = sigma;
    return make_field_data(model, rng);
}

}  // namespace seqcal::testing

#endif
