#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqcal.h"

namespace {

int workers_from_env() {
    const char* env = std::getenv("SEQCAL_WORKERS");
    if (!env) return 0;
    try {
        const int w = std::stoi(env);
        return w > 0 ? w : 0;
    } catch (const std::exception&) {
        return 0;
    }
}

int status_to_exit(seqcal_status st) {
    switch (st) {
        case SEQCAL_OK: return 0;
        case SEQCAL_ERR_INVALID_ARGUMENT:
        case SEQCAL_ERR_INVALID_SPEC: return 2;
        default: return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential design engine for Bayesian simulator calibration"};
    app.require_subcommand(1);

    std::string spec_path, out_dir, results_dir, testbed;
    int workers = 0;
    std::vector<double> coords;

    auto* run_cmd = app.add_subcommand("run", "Run an experiment spec");
    run_cmd->add_option("spec", spec_path, "Experiment spec file")->required();
    run_cmd->add_option("--out", out_dir, "Override the output directory");
    run_cmd->add_option("--workers", workers, "Override the worker count");

    auto* report_cmd =
        app.add_subcommand("report", "Summarize a results directory");
    report_cmd->add_option("dir", results_dir, "Results directory")->required();

    auto* sim_cmd =
        app.add_subcommand("simulate", "Evaluate a synthetic testbed once");
    sim_cmd->add_option("testbed", testbed, "Testbed id")->required();
    sim_cmd
        ->add_option("z", coords,
                     "Scaled joint input: q design coords then p parameters")
        ->required();

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) {
        if (workers <= 0) workers = workers_from_env();
        const seqcal_status st = seqcal_run_spec_file(
            spec_path.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
            workers);
        if (st != SEQCAL_OK)
            std::cerr << "run failed: " << seqcal_last_error() << "\n";
        return status_to_exit(st);
    }
    if (report_cmd->parsed()) {
        const seqcal_status st = seqcal_report(results_dir.c_str());
        if (st != SEQCAL_OK)
            std::cerr << "report failed: " << seqcal_last_error() << "\n";
        return st == SEQCAL_OK ? 0 : 1;
    }
    // simulate
    double value = 0.0;
    const seqcal_status st =
        seqcal_simulate(testbed.c_str(), coords.data(), coords.size(), &value);
    if (st != SEQCAL_OK) {
        std::cerr << "simulate failed: " << seqcal_last_error() << "\n";
        return status_to_exit(st);
    }
    std::cout.precision(17);
    std::cout << value << "\n";
    return 0;
}
