#ifndef SEQCAL_OPTIM_HPP
#define SEQCAL_OPTIM_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

namespace seqcal {

// Derivative-free Nelder-Mead minimization with box clamping, used for the
// low-dimensional searches (discrepancy hyperparameters, theta-hat polish).
inline double nelder_mead(const std::function<double(const Eigen::VectorXd&)>& fn,
                          Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi, int max_evals,
                          double init_step = 0.1) {
    const int n = static_cast<int>(x.size());
    auto clamp = [&](Eigen::VectorXd v) { return v.cwiseMax(lo).cwiseMin(hi); };

    std::vector<Eigen::VectorXd> pts(n + 1);
    std::vector<double> vals(n + 1);
    int evals = 0;
    auto feval = [&](const Eigen::VectorXd& v) {
        ++evals;
        const double f = fn(v);
        return std::isfinite(f) ? f : std::numeric_limits<double>::max();
    };

    pts[0] = clamp(x);
    vals[0] = feval(pts[0]);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = pts[0];
        v(i) += init_step * std::max(1e-3, hi(i) - lo(i));
        pts[i + 1] = clamp(v);
        vals[i + 1] = feval(pts[i + 1]);
    }

    while (evals < max_evals) {
        std::vector<int> order(n + 1);
        for (int i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return vals[a] < vals[b]; });
        {
            std::vector<Eigen::VectorXd> p2(n + 1);
            std::vector<double> v2(n + 1);
            for (int i = 0; i <= n; ++i) {
                p2[i] = pts[order[i]];
                v2[i] = vals[order[i]];
            }
            pts.swap(p2);
            vals.swap(v2);
        }
        if (vals[n] - vals[0] < 1e-12 * (1.0 + std::abs(vals[0]))) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += pts[i];
        centroid /= n;

        Eigen::VectorXd xr = clamp(centroid + (centroid - pts[n]));
        const double fr = feval(xr);
        if (fr < vals[0]) {
            Eigen::VectorXd xe = clamp(centroid + 2.0 * (centroid - pts[n]));
            const double fe = feval(xe);
            if (fe < fr) {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if (fr < vals[n - 1]) {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            Eigen::VectorXd xc = clamp(centroid + 0.5 * (pts[n] - centroid));
            const double fc = feval(xc);
            if (fc < vals[n]) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    pts[i] = clamp(pts[0] + 0.5 * (pts[i] - pts[0]));
                    vals[i] = feval(pts[i]);
                }
            }
        }
    }

    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (vals[i] < vals[best]) best = i;
    x = pts[best];
    return vals[best];
}

}  // namespace seqcal

#endif
