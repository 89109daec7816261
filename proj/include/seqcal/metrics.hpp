#ifndef SEQCAL_METRICS_HPP
#define SEQCAL_METRICS_HPP

#include <functional>
#include <vector>

#include "seqcal/designer.hpp"
#include "seqcal/emulator.hpp"
#include "seqcal/posterior.hpp"
#include "seqcal/types.hpp"

namespace seqcal {

// Empirical quantile with linear interpolation between order statistics
// (type-7 convention).
double quantile(std::vector<double> values, double prob);

// Mean absolute deviation between the true unnormalized posterior (true
// simulator + known Sigma) and the emulator-based posterior mean, over the
// parameter reference grid.
double mad_p(const Emulator& e, const FieldExperiment& fe,
             const std::vector<VectorXd>& theta_ref, const Simulator& true_sim);

// Mean absolute field-prediction error over the design reference grid; the
// prediction pairs each reference input with the plug-in parameter estimate.
double mad_y(const Emulator& e, const std::vector<VectorXd>& x_ref,
             const VectorXd& theta_hat,
             const std::function<double(const VectorXd&)>& true_field_mean);

// S_alpha(l, u; a) with l, u the alpha/2 and 1-alpha/2 empirical quantiles.
double interval_score(const std::vector<double>& values, double alpha, double a);

// Q_hi - Q_lo of the sample.
double quantile_width(const std::vector<double>& values, double lo, double hi);

}  // namespace seqcal

#endif
