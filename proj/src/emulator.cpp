#include "seqcal/emulator.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "seqcal/rng.hpp"

namespace seqcal {

namespace {

constexpr double kZetaLo = -4.605170185988091;  // log 1e-2
constexpr double kZetaHi = 6.907755278982137;   // log 1e3
constexpr double kLogTau2Lo = -13.815510557964274;
constexpr double kLogTau2Hi = 6.907755278982137;
constexpr double kLogNuggetHi = 0.0;

struct Bounds {
    VectorXd lo;
    VectorXd hi;
    VectorXd project(const VectorXd& w) const { return w.cwiseMax(lo).cwiseMin(hi); }
};

// Negative log marginal likelihood of the standardized outputs and its
// gradient w.r.t. w = (zeta_1..zeta_m, log tau2, log nugget).
class MarginalLikelihood {
public:
    MarginalLikelihood(const MatrixXd& Z, const VectorXd& y) : Z_(Z), y_(y) {}

    bool eval(const VectorXd& w, double& nll, VectorXd* grad) const {
        const Eigen::Index m = Z_.cols();
        const Eigen::Index n = Z_.rows();
        const VectorXd zeta = w.head(m);
        const double tau2 = std::exp(w(m));
        const double nugget = std::exp(w(m + 1));

        MatrixXd C = matern15_corr_matrix(Z_, Z_, zeta);
        MatrixXd K = tau2 * C;
        K.diagonal().array() += nugget;
        Eigen::LLT<MatrixXd> llt(K);
        if (llt.info() != Eigen::Success) return false;

        VectorXd alpha = llt.solve(y_);
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        nll = 0.5 * y_.dot(alpha) + 0.5 * logdet +
              0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
        if (!std::isfinite(nll)) return false;
        if (!grad) return true;

        // d nll / d theta = -0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta)
        MatrixXd Kinv = llt.solve(MatrixXd::Identity(n, n));
        MatrixXd P = alpha * alpha.transpose() - Kinv;

        grad->resize(m + 2);
        for (Eigen::Index l = 0; l < m; ++l) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double f = matern15_dcorr_factor(Z_(i, l), Z_(j, l), zeta(l));
                    acc += P(i, j) * tau2 * C(i, j) * f;
                }
            (*grad)(l) = -0.5 * acc;
        }
        (*grad)(m) = -0.5 * (P.array() * (tau2 * C).array()).sum();
        (*grad)(m + 1) = -0.5 * nugget * P.trace();
        return true;
    }

private:
    const MatrixXd& Z_;
    const VectorXd& y_;
};

// Box-constrained L-BFGS with Armijo backtracking. The memory is dropped
// whenever a step lands on the boundary.
double lbfgs_minimize(const MarginalLikelihood& fn, const Bounds& b, VectorXd& w,
                      int max_iter) {
    const int mem = 6;
    std::deque<VectorXd> s_hist, y_hist;

    w = b.project(w);
    double f;
    VectorXd g;
    if (!fn.eval(w, f, &g)) return std::numeric_limits<double>::infinity();

    for (int it = 0; it < max_iter; ++it) {
        // Projected gradient norm as the stationarity measure.
        VectorXd pg = w - b.project(w - g);
        if (pg.norm() < 1e-6) break;

        // Two-loop recursion.
        VectorXd d = -g;
        std::vector<double> rho(s_hist.size()), a(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
            a[i] = rho[i] * s_hist[i].dot(d);
            d -= a[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const auto& sl = s_hist.back();
            const auto& yl = y_hist.back();
            d *= sl.dot(yl) / yl.dot(yl);
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            double beta = rho[i] * y_hist[i].dot(d);
            d += (a[i] - beta) * s_hist[i];
        }
        if (d.dot(g) >= 0.0) d = -g;

        double step = 1.0;
        double f_new = f;
        VectorXd w_new = w;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            w_new = b.project(w + step * d);
            double f_try;
            if (fn.eval(w_new, f_try, nullptr) &&
                f_try <= f - 1e-4 * step * std::abs(d.dot(g))) {
                f_new = f_try;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        VectorXd g_new;
        if (!fn.eval(w_new, f_new, &g_new)) break;

        const bool clamped = ((w_new.array() <= b.lo.array() + 1e-12) ||
                              (w_new.array() >= b.hi.array() - 1e-12))
                                 .any();
        VectorXd s = w_new - w;
        VectorXd dy = g_new - g;
        if (clamped) {
            s_hist.clear();
            y_hist.clear();
        } else if (s.dot(dy) > 1e-12) {
            s_hist.push_back(s);
            y_hist.push_back(dy);
            if (static_cast<int>(s_hist.size()) > mem) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        if (f - f_new < 1e-10 * (1.0 + std::abs(f))) {
            w = w_new;
            f = f_new;
            break;
        }
        w = w_new;
        f = f_new;
        g = g_new;
    }
    return f;
}

}  // namespace

Emulator Emulator::fit(const SimDataset& data, const FitConfig& cfg) {
    if (data.size() < 2)
        throw std::invalid_argument("Emulator::fit: need at least 2 records");

    Emulator e;
    e.q_ = data.q();
    e.p_ = data.p();
    e.train_inputs_ = data.inputs();

    const VectorXd& y = data.outputs();
    e.center_ = y.mean();
    const double sd = std::sqrt((y.array() - e.center_).square().sum() /
                                std::max<int>(1, data.size() - 1));
    const bool degenerate = sd < 1e-12;
    e.scale_ = degenerate ? 1.0 : sd;
    e.train_outputs_ = (y.array() - e.center_) / e.scale_;

    const int m = data.dim();
    if (degenerate) {
        e.kernel_.zeta = VectorXd::Zero(m);
        e.kernel_.log_tau2 = std::log(1e-12);
        e.kernel_.log_nugget = std::log(cfg.nugget_floor);
    } else {
        Bounds b;
        b.lo.resize(m + 2);
        b.hi.resize(m + 2);
        b.lo.head(m).setConstant(kZetaLo);
        b.hi.head(m).setConstant(kZetaHi);
        b.lo(m) = kLogTau2Lo;
        b.hi(m) = kLogTau2Hi;
        b.lo(m + 1) = std::log(cfg.nugget_floor);
        b.hi(m + 1) = cfg.fit_nugget ? kLogNuggetHi : std::log(cfg.nugget_floor);

        MarginalLikelihood fn(e.train_inputs_, e.train_outputs_);
        Rng rng(derive_seed(cfg.seed, 0x656d75ULL));
        std::uniform_real_distribution<double> u(0.0, 1.0);

        double best = std::numeric_limits<double>::infinity();
        VectorXd best_w;
        for (int s = 0; s < std::max(1, cfg.multistarts); ++s) {
            VectorXd w(m + 2);
            if (s == 0 && cfg.warm_start) {
                w.head(m) = cfg.warm_start->zeta;
                w(m) = cfg.warm_start->log_tau2;
                w(m + 1) = cfg.warm_start->log_nugget;
            } else if (s == 0) {
                w.head(m).setConstant(std::log(2.0));
                w(m) = 0.0;
                w(m + 1) = std::log(std::max(cfg.nugget_floor, 1e-6));
            } else {
                for (int l = 0; l < m; ++l)
                    w(l) = std::log(0.5) + u(rng) * (std::log(50.0) - std::log(0.5));
                w(m) = std::log(0.2) + u(rng) * (std::log(5.0) - std::log(0.2));
                w(m + 1) = std::log(cfg.nugget_floor) +
                           u(rng) * (std::log(1e-3) - std::log(cfg.nugget_floor));
            }
            const double f = lbfgs_minimize(fn, b, w, cfg.max_iterations);
            if (f < best) {
                best = f;
                best_w = w;
            }
        }
        if (!std::isfinite(best)) throw EmulatorSingular("Emulator::fit: all starts failed");
        e.kernel_.zeta = best_w.head(m);
        e.kernel_.log_tau2 = best_w(m);
        e.kernel_.log_nugget = best_w(m + 1);
    }

    // Factorize with jitter escalation on failure.
    MatrixXd C = matern15_corr_matrix(e.train_inputs_, e.train_inputs_, e.kernel_.zeta);
    double nugget = e.kernel_.nugget();
    for (;;) {
        MatrixXd K = e.kernel_.tau2() * C;
        K.diagonal().array() += nugget;
        e.chol_K_.compute(K);
        if (e.chol_K_.info() == Eigen::Success) break;
        nugget *= 10.0;
        if (nugget > 1e-2) throw EmulatorSingular("Emulator::fit: Cholesky failed");
    }
    e.kernel_.log_nugget = std::log(nugget);
    e.alpha_ = e.chol_K_.solve(e.train_outputs_);
    return e;
}

VectorXd Emulator::kvec(const VectorXd& z) const {
    return kernel_.tau2() *
           matern15_corr_matrix(train_inputs_, z.transpose(), kernel_.zeta).col(0);
}

MatrixXd Emulator::solve_K(const MatrixXd& rhs) const { return chol_K_.solve(rhs); }

double Emulator::clip_var(double v) const {
    const double tol = 1e-8 * kernel_.tau2();
    if (v < -tol)
        throw std::runtime_error("Emulator: predictive variance below clipping tolerance");
    return std::max(0.0, v);
}

double Emulator::var_std(const VectorXd& /*z*/, const VectorXd& kv) const {
    return clip_var(kernel_.tau2() - kv.dot(chol_K_.solve(kv)));
}

std::pair<double, double> Emulator::predict(const JointInput& z) const {
    if (z.q() != q_ || z.p() != p_)
        throw std::invalid_argument("Emulator::predict: dimension mismatch");
    const VectorXd zv = z.joint();
    const VectorXd kv = kvec(zv);
    const double mean = center_ + scale_ * mean_std(kv);
    const double var = scale_ * scale_ * var_std(zv, kv);
    return {mean, var};
}

VectorXd Emulator::joint_at(const VectorXd& theta, const VectorXd& x) const {
    VectorXd z(q_ + p_);
    z << x, theta;
    return z;
}

FieldEmulatorMoments Emulator::predict_field(const VectorXd& theta,
                                             const std::vector<VectorXd>& field_x) const {
    const int d = static_cast<int>(field_x.size());
    if (d < 1) throw std::invalid_argument("Emulator::predict_field: empty field design");

    MatrixXd Zf(d, q_ + p_);
    for (int i = 0; i < d; ++i) Zf.row(i) = joint_at(theta, field_x[i]).transpose();

    const MatrixXd Kf =
        kernel_.tau2() * matern15_corr_matrix(train_inputs_, Zf, kernel_.zeta);
    const MatrixXd W = chol_K_.solve(Kf);  // n x d

    FieldEmulatorMoments fm;
    fm.mean = center_ + scale_ * (Kf.transpose() * alpha_).array();
    MatrixXd S = kernel_.tau2() * matern15_corr_matrix(Zf, Zf, kernel_.zeta) -
                 Kf.transpose() * W;
    S = 0.5 * (S + S.transpose());

    // PSD clip via eigenvalue floor at zero.
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    fm.cov = scale_ * scale_ *
             (es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    return fm;
}

double Emulator::cross_cov(const JointInput& z1, const JointInput& z2) const {
    const VectorXd a = z1.joint(), b = z2.joint();
    const VectorXd ka = kvec(a), kb = kvec(b);
    const double c = matern15(a, b, kernel_) - ka.dot(chol_K_.solve(kb));
    return scale_ * scale_ * c;
}

MatrixXd Emulator::fantasy_cross_cov(const JointInput& z_star, const VectorXd& theta,
                                     const std::vector<VectorXd>& field_x) const {
    const int d = static_cast<int>(field_x.size());
    const VectorXd zs = z_star.joint();
    const VectorXd ks = kvec(zs);
    const VectorXd Kinv_ks = chol_K_.solve(ks);
    const double denom = var_std(zs, ks) + kernel_.nugget();

    VectorXd c(d);
    for (int i = 0; i < d; ++i) {
        const VectorXd zf = joint_at(theta, field_x[i]);
        c(i) = matern15(zf, zs, kernel_) - kvec(zf).dot(Kinv_ks);
    }
    // phi_ij = c_i c_j / (var + nugget); scale^2 converts to original units.
    return (scale_ * scale_ / denom) * (c * c.transpose());
}

double Emulator::fantasy_update_mean(const JointInput& z, const JointInput& z_star,
                                     double eta_star) const {
    const VectorXd zs = z_star.joint();
    const VectorXd ks = kvec(zs);
    const double denom =
        scale_ * scale_ * (var_std(zs, ks) + kernel_.nugget());
    const double m_star = center_ + scale_ * mean_std(ks);
    const auto [m_z, v_z] = predict(z);
    (void)v_z;
    return m_z + cross_cov(z, z_star) * (eta_star - m_star) / denom;
}

}  // namespace seqcal
