#include "seqcal/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace seqcal {

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    if (prob < 0.0 || prob > 1.0)
        throw std::invalid_argument("quantile: prob in [0,1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double mad_p(const Emulator& e, const FieldExperiment& fe,
             const std::vector<VectorXd>& theta_ref, const Simulator& true_sim) {
    if (theta_ref.empty()) throw std::invalid_argument("mad_p: empty theta_ref");
    const int d = fe.d();
    double acc = 0.0;
    VectorXd eta(d);
    for (const auto& theta : theta_ref) {
        for (int i = 0; i < d; ++i)
            eta(i) = true_sim(JointInput(fe.field_x[i], theta));
        const double truth =
            std::exp(mvn_logpdf(fe.y, eta, fe.Sigma)) * fe.prior.density(theta);
        const FieldEmulatorMoments fm = e.predict_field(theta, fe.field_x);
        acc += std::abs(truth - posterior_mean(fm, fe, theta));
    }
    return acc / static_cast<double>(theta_ref.size());
}

double mad_y(const Emulator& e, const std::vector<VectorXd>& x_ref,
             const VectorXd& theta_hat,
             const std::function<double(const VectorXd&)>& true_field_mean) {
    if (x_ref.empty()) throw std::invalid_argument("mad_y: empty x_ref");
    double acc = 0.0;
    for (const auto& x : x_ref) {
        const double pred = e.predict(JointInput(x, theta_hat)).first;
        acc += std::abs(true_field_mean(x) - pred);
    }
    return acc / static_cast<double>(x_ref.size());
}

double interval_score(const std::vector<double>& values, double alpha, double a) {
    if (values.size() < 2)
        throw std::invalid_argument("interval_score: need at least 2 values");
    if (alpha <= 0.0 || alpha >= 1.0)
        throw std::invalid_argument("interval_score: alpha in (0,1)");
    const double l = quantile(values, alpha / 2.0);
    const double u = quantile(values, 1.0 - alpha / 2.0);
    double s = u - l;
    if (a < l) s += (2.0 / alpha) * (l - a);
    if (a > u) s += (2.0 / alpha) * (a - u);
    return s;
}

double quantile_width(const std::vector<double>& values, double lo, double hi) {
    if (values.size() < 2)
        throw std::invalid_argument("quantile_width: need at least 2 values");
    return quantile(values, hi) - quantile(values, lo);
}

}  // namespace seqcal
