#ifndef SEQCAL_EXPERIMENT_HPP
#define SEQCAL_EXPERIMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "seqcal/designer.hpp"
#include "seqcal/testbeds.hpp"
#include "seqcal/types.hpp"

namespace seqcal {

// Flat key-value experiment description (one "key value..." pair per line,
// '#' comments). Schema version 1.
struct ExperimentSpec {
    int version = 1;
    std::string testbed;
    std::vector<AcquisitionMethod> methods;
    int replicates = 1;
    DesignConfig design;
    std::uint64_t master_seed = 1;
    int workers = 1;
    int metrics_theta_ref = 100;
    int metrics_x_ref = 100;
    bool compute_mad_p = true;  // forced off when the testbed has discrepancy
    std::string out_dir;

    static ExperimentSpec parse(std::istream& in);
    static ExperimentSpec parse_file(const std::string& path);
    void validate() const;
};

struct ResultRow {
    int replicate = 0;
    int iteration = 0;
    std::string method;
    double mad_p = std::numeric_limits<double>::quiet_NaN();
    double mad_y = std::numeric_limits<double>::quiet_NaN();
    VectorXd theta_hat;
    double wall_ms = 0.0;
};

struct AcquiredRow {
    int replicate = 0;
    std::string method;
    int iteration = 0;
    JointInput input;  // scaled units
};

struct RunStatus {
    int replicate = 0;
    std::string method;
    bool complete = false;
    std::string error;
    std::uint64_t init_hash = 0;   // hash of the shared initial design
    std::uint64_t field_hash = 0;  // hash of the shared field data
};

struct ExperimentResults {
    ExperimentSpec spec;
    VectorXd theta_true_scaled;
    int q = 0;
    int p = 0;
    std::vector<ResultRow> rows;
    std::vector<AcquiredRow> acquired;
    std::vector<RunStatus> statuses;

    bool all_complete() const;
};

// Runs replicates x methods with a worker pool; within a replicate all
// methods share the initial design and field data.
ExperimentResults run_experiment(const ExperimentSpec& spec);

// Persists results.csv, acquired.csv, status.csv and summary.json into dir.
void write_results(const ExperimentResults& res, const std::string& dir);

// Reads a results directory and emits plot-ready series, the
// acquisitions-to-threshold table, and interval-score / quantile-width
// tables. Returns 0 on success, 1 when the directory has no usable rows.
int write_report(const std::string& dir, std::ostream& log);

}  // namespace seqcal

#endif
