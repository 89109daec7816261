#ifndef SEQCAL_TESTBEDS_HPP
#define SEQCAL_TESTBEDS_HPP

#include <memory>
#include <string>
#include <vector>

#include "seqcal/designer.hpp"
#include "seqcal/posterior.hpp"
#include "seqcal/rng.hpp"
#include "seqcal/types.hpp"

namespace seqcal {

double eval_sine2d(double x, double theta);
double eval_ranjan3d(double x1, double x2, double theta);
double eval_highdim(const VectorXd& x, const VectorXd& theta);

enum class TestbedId { Sine2D, Ranjan3D, HighDim };

// A synthetic simulator plus the field-data generating process around it.
// Design inputs live in [0,1]^q natively; parameters have a natural box that
// is affinely mapped to [0,1]^p for the designer.
struct SyntheticModel {
    TestbedId id = TestbedId::Sine2D;
    int q = 1;
    int p = 1;
    bool discrepancy = false;
    double sigma = 0.2;      // field noise sd
    VectorXd theta_true;     // natural units
    BoxScaling theta_box;    // natural parameter box
    std::vector<VectorXd> field_unique;  // unique field design inputs
    int replicates = 2;

    static SyntheticModel sine2d(bool with_discrepancy = false);
    static SyntheticModel ranjan3d(bool with_discrepancy = false);
    static SyntheticModel highdim(int q, int p);
    static SyntheticModel by_name(const std::string& name);

    double eval(const VectorXd& x, const VectorXd& theta) const;  // natural units
    double bias(const VectorXd& x) const;                         // 0 if none
    double true_field_mean(const VectorXd& x) const;

    // Simulator over scaled joint inputs (parameters in [0,1]^p).
    Simulator simulator() const;
    VectorXd theta_true_scaled() const { return theta_box.to_unit(theta_true); }
};

// y(x) = eta(x, theta_true) + b(x) + eps, eps ~ N(0, sigma^2), replicates as
// distinct rows; Sigma = sigma^2 I; uniform prior over the scaled box.
FieldExperiment make_field_data(const SyntheticModel& m, Rng& rng);

struct SimTimeout : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SimProtocol : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SimCrashed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExternalSimSpec {
    std::vector<std::string> command;  // argv, nonempty
    std::string workdir;               // empty = inherit
    double timeout_sec = 30.0;
};

// Persistent child process speaking the line protocol: handshake "SEQCAL/1"
// answered by "OK", then one request line "q p x1 ... xq th1 ... thp" per
// evaluation answered by one scalar line.
class ExternalSimulator {
public:
    explicit ExternalSimulator(ExternalSimSpec spec);
    ~ExternalSimulator();
    ExternalSimulator(const ExternalSimulator&) = delete;
    ExternalSimulator& operator=(const ExternalSimulator&) = delete;

    double eval(const JointInput& z);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace seqcal

#endif
