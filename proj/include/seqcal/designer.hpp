#ifndef SEQCAL_DESIGNER_HPP
#define SEQCAL_DESIGNER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqcal/acquisition.hpp"
#include "seqcal/emulator.hpp"
#include "seqcal/posterior.hpp"
#include "seqcal/types.hpp"

namespace seqcal {

enum class AcquisitionMethod { Ap, Ay, AyFixed, Rnd, Lhs, Var, Imspe };

enum class DiscrepancyMode { KnownSigma, FitDiscrepancy };

enum class InitDesign { PriorSample, Lhs };

const char* method_name(AcquisitionMethod m);
std::optional<AcquisitionMethod> parse_method(const std::string& name);

struct DesignConfig {
    int n0 = 10;
    int n = 20;
    AcquisitionMethod acquisition = AcquisitionMethod::Ap;
    int n_pair = 100;
    int n_explore = 500;
    int n_theta_ref = 100;
    int n_x_ref = 100;
    DiscrepancyMode discrepancy = DiscrepancyMode::KnownSigma;
    InitDesign init = InitDesign::PriorSample;
    std::uint64_t seed = 0;
    std::uint64_t init_seed = 0;  // 0 = derive from seed; set to share the
                                  // initial design across methods
    int n_threads = 1;
    int multistarts = 8;        // first fit
    int refit_multistarts = 3;  // warm-started refits

    void validate() const;
};

using Simulator = std::function<double(const JointInput&)>;

struct IterationRecord {
    JointInput input;
    double output = 0.0;
    VectorXd theta_hat;
    KernelParams kernel;
    double wall_ms = 0.0;
};

struct RunHistory {
    std::vector<IterationRecord> records;
    std::optional<Emulator> final_emulator;
    SimDataset dataset{1, 1};
    bool complete = false;
    std::string error;
};

// Optional per-iteration observer (after the new point is appended and before
// the next refit): iteration index (1-based), emulator used for scoring that
// iteration, and the plug-in parameter estimate.
using IterationCallback =
    std::function<void(int, const Emulator&, const VectorXd&)>;

// The sequential loop: prior-sampled initial design of size n0, then n rounds
// of {fit, estimate theta-hat, (refit discrepancy), build candidates, score,
// select, evaluate, append}. Simulator failures are retried once; a second
// failure or a singular emulator aborts with the partial history recorded.
RunHistory run(const Simulator& sim, const FieldExperiment& fe,
               const DesignConfig& cfg, const IterationCallback& on_iter = {});

// Least-squares plug-in estimate: best reference-grid seed polished by a
// 200-evaluation derivative-free local search inside the prior box.
VectorXd estimate_theta_hat(const Emulator& e, const FieldExperiment& fe,
                            const std::vector<VectorXd>& theta_ref);

}  // namespace seqcal

#endif
