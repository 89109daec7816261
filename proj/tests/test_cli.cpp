// End-to-end checks of the command-line binary (path injected by the build).
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#ifndef SEQCAL_CLI_PATH
#define SEQCAL_CLI_PATH "seqcal-cli"
#endif

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(SEQCAL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

fs::path write_spec(const std::string& name, const std::string& body) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << body;
    return p;
}

int data_rows(const fs::path& csv) {
    std::ifstream in(csv);
    REQUIRE(in.good());
    int n = -1;  // discount the header
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("experiment run produces one row per replicate, method, iteration") {
    const fs::path spec = write_spec("seqcal_cli_spec.txt",
                                     "version 1\n"
                                     "testbed sine2d\n"
                                     "methods rnd lhs var\n"
                                     "replicates 2\n"
                                     "n0 5\n"
                                     "n 20\n"
                                     "n_pair 10\n"
                                     "n_explore 20\n"
                                     "n_theta_ref 10\n"
                                     "n_x_ref 10\n"
                                     "metrics_theta_ref 10\n"
                                     "metrics_x_ref 10\n"
                                     "seed 11\n");
    const fs::path dir = fs::temp_directory_path() / "seqcal_cli_out";
    fs::remove_all(dir);
    REQUIRE(run_cli("run " + spec.string() + " --out " + dir.string()) == 0);
    CHECK(data_rows(dir / "results.csv") == 2 * 3 * 20);
    CHECK(data_rows(dir / "acquired.csv") == 2 * 3 * 20);
    CHECK(data_rows(dir / "status.csv") == 2 * 3);

    SUBCASE("report over the results") {
        CHECK(run_cli("report " + dir.string()) == 0);
        CHECK(fs::exists(dir / "report_series.csv"));
        CHECK(fs::exists(dir / "report_thresholds.csv"));
        CHECK(fs::exists(dir / "report_intervals.csv"));
    }

    SUBCASE("a second run is identical apart from timings") {
        const fs::path dir2 = fs::temp_directory_path() / "seqcal_cli_out2";
        fs::remove_all(dir2);
        REQUIRE(run_cli("run " + spec.string() + " --out " + dir2.string()) == 0);
        CHECK(slurp(dir / "acquired.csv") == slurp(dir2 / "acquired.csv"));
        fs::remove_all(dir2);
    }

    fs::remove_all(dir);
    fs::remove(spec);
}

TEST_CASE("invalid inputs exit with code 2") {
    SUBCASE("missing testbed key") {
        const fs::path spec =
            write_spec("seqcal_cli_bad.txt", "version 1\nmethods rnd\n");
        const fs::path dir = fs::temp_directory_path() / "seqcal_cli_bad_out";
        CHECK(run_cli("run " + spec.string() + " --out " + dir.string()) == 2);
        fs::remove(spec);
    }
    SUBCASE("unknown testbed name") {
        const fs::path spec = write_spec(
            "seqcal_cli_bad2.txt", "version 1\ntestbed marshmallow\nmethods rnd\n");
        const fs::path dir = fs::temp_directory_path() / "seqcal_cli_bad_out2";
        CHECK(run_cli("run " + spec.string() + " --out " + dir.string()) == 2);
        fs::remove(spec);
    }
    SUBCASE("nonexistent spec path") {
        CHECK(run_cli("run /does/not/exist.spec --out /tmp/x") == 2);
    }
    SUBCASE("unknown subcommand") {
        CHECK(run_cli("frobnicate") != 0);
    }
    SUBCASE("simulate with wrong coordinate count") {
        CHECK(run_cli("simulate sine2d 0.5") == 2);
    }
}

TEST_CASE("single simulator evaluations") {
    const fs::path outfile = fs::temp_directory_path() / "seqcal_cli_sim.txt";
    const std::string cmd = std::string(SEQCAL_CLI_PATH) +
                            " simulate sine2d 0.5 0.0 > " + outfile.string() +
                            " 2>/dev/null";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    const double v = std::stod(slurp(outfile));
    CHECK(v == doctest::Approx(-0.958924).epsilon(1e-5));
    fs::remove(outfile);
}

}  // TEST_SUITE
