#ifndef SEQCAL_ACQUISITION_HPP
#define SEQCAL_ACQUISITION_HPP

#include <vector>

#include "seqcal/emulator.hpp"
#include "seqcal/posterior.hpp"
#include "seqcal/rng.hpp"
#include "seqcal/types.hpp"

namespace seqcal {

// Candidate list and reference grids shared by the scoring criteria.
struct AcquisitionContext {
    std::vector<JointInput> candidates;
    std::vector<VectorXd> theta_ref;  // parameter reference grid
    std::vector<VectorXd> x_ref;      // design reference grid
    std::vector<VectorXd> z_ref;      // joint reference grid (IMSPE)
    VectorXd theta_hat;               // plug-in parameter estimate
};

struct AcquisitionScore {
    int index = 0;
    double score = 0.0;
};

// Posterior-accuracy criterion: reference-grid average of the candidate's
// expected variance reduction, to maximize. The batched form precomputes
// per-theta field moments once and reuses them across candidates.
std::vector<double> score_all_Ap(const Emulator& e, const FieldExperiment& fe,
                                 const AcquisitionContext& ctx, int n_threads = 1);
double score_Ap(const Emulator& e, const FieldExperiment& fe,
                const AcquisitionContext& ctx, const JointInput& z_star);

// Field-prediction criterion with a (d+1)-dimensional augmented system per
// reference design input; disc supplies the augmented error covariance
// structure (nullptr = independent noise with variance Sigma(0,0)).
std::vector<double> score_all_Ay(const Emulator& e, const FieldExperiment& fe,
                                 const AcquisitionContext& ctx,
                                 const DiscrepancyParams* disc = nullptr,
                                 int n_threads = 1);
double score_Ay(const Emulator& e, const FieldExperiment& fe,
                const AcquisitionContext& ctx, const JointInput& z_star,
                const DiscrepancyParams* disc = nullptr);

// Baseline: predictive variance at the candidate, to maximize.
double score_maxvar(const Emulator& e, const JointInput& z_star);

// Baseline: negated aggregate fantasy variance over the joint reference grid
// (rank-1 deflation, no refits), to maximize.
std::vector<double> score_all_imspe(const Emulator& e, const AcquisitionContext& ctx);
double score_imspe(const Emulator& e, const AcquisitionContext& ctx,
                   const JointInput& z_star);

// Index of the best (largest) score; NaNs excluded, ties broken by lowest
// index. Throws AcquisitionFailed if every score is NaN.
int select(const std::vector<AcquisitionScore>& scores);

// d_unique * n_pair candidates pairing field design inputs with prior-sampled
// parameters, plus n_explore joint-box samples.
std::vector<JointInput> build_candidates(const FieldExperiment& fe,
                                         const PriorSpec& prior, int n_pair,
                                         int n_explore, Rng& rng);

// Maximin-of-10 Latin hypercube sample in [0,1]^dims.
std::vector<VectorXd> lhs_sample(int n, int dims, Rng& rng);

}  // namespace seqcal

#endif
