// Exercises the shared library through the C interface only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "seqcal.h"

namespace fs = std::filesystem;

TEST_SUITE("capi") {

TEST_CASE("synthetic simulator evaluation") {
    double v = 0.0;
    const double z[2] = {0.5, 0.0};
    REQUIRE(seqcal_simulate("sine2d", z, 2, &v) == SEQCAL_OK);
    CHECK(v == doctest::Approx(std::sin(5.0)).epsilon(1e-12));

    int q = 0, p = 0;
    REQUIRE(seqcal_testbed_dims("ranjan3d", &q, &p) == SEQCAL_OK);
    CHECK(q == 2);
    CHECK(p == 1);

    SUBCASE("bad arguments") {
        CHECK(seqcal_simulate("sine2d", z, 3, &v) == SEQCAL_ERR_INVALID_ARGUMENT);
        CHECK(seqcal_simulate("unknown", z, 2, &v) == SEQCAL_ERR_INVALID_ARGUMENT);
        CHECK(seqcal_simulate(nullptr, z, 2, &v) == SEQCAL_ERR_INVALID_ARGUMENT);
        CHECK(seqcal_simulate("sine2d", nullptr, 2, &v) ==
              SEQCAL_ERR_INVALID_ARGUMENT);
        CHECK(std::strlen(seqcal_last_error()) > 0);
    }
}

TEST_CASE("emulator round trip") {
    const int n = 20;
    std::vector<double> inputs(n * 2), outputs(n);
    for (int i = 0; i < n; ++i) {
        const double x = (i + 0.5) / n;
        const double th = std::fmod(0.37 * (i + 1), 1.0);
        inputs[2 * i] = x;
        inputs[2 * i + 1] = th;
        const double z[2] = {x, th};
        REQUIRE(seqcal_simulate("sine2d", z, 2, &outputs[i]) == SEQCAL_OK);
    }

    seqcal_emulator* e = nullptr;
    REQUIRE(seqcal_emulator_fit(1, 1, inputs.data(), outputs.data(), n, 42, &e) ==
            SEQCAL_OK);
    REQUIRE(e != nullptr);

    double mean = 0.0, var = -1.0;
    const double z0[2] = {inputs[0], inputs[1]};
    REQUIRE(seqcal_emulator_predict(e, z0, 2, &mean, &var) == SEQCAL_OK);
    CHECK(mean == doctest::Approx(outputs[0]).epsilon(0.05));
    CHECK(var >= 0.0);

    SUBCASE("prediction argument validation") {
        CHECK(seqcal_emulator_predict(e, z0, 3, &mean, &var) ==
              SEQCAL_ERR_INVALID_ARGUMENT);
        CHECK(seqcal_emulator_predict(nullptr, z0, 2, &mean, &var) ==
              SEQCAL_ERR_INVALID_ARGUMENT);
    }

    seqcal_emulator_free(e);
    seqcal_emulator_free(nullptr);  // must be a no-op

    SUBCASE("fit argument validation") {
        seqcal_emulator* bad = nullptr;
        CHECK(seqcal_emulator_fit(1, 1, inputs.data(), outputs.data(), 1, 0, &bad) ==
              SEQCAL_ERR_INVALID_ARGUMENT);
        CHECK(bad == nullptr);
        CHECK(seqcal_emulator_fit(0, 1, inputs.data(), outputs.data(), n, 0, &bad) ==
              SEQCAL_ERR_INVALID_ARGUMENT);
    }
}

TEST_CASE("spec execution through the library") {
    const fs::path dir = fs::temp_directory_path() / "seqcal_capi_run";
    fs::remove_all(dir);
    const fs::path spec_path = fs::temp_directory_path() / "seqcal_capi_spec.txt";
    {
        std::ofstream out(spec_path);
        out << "version 1\ntestbed sine2d\nmethods rnd\nreplicates 1\n"
            << "n0 4\nn 2\nn_pair 5\nn_explore 10\nn_theta_ref 8\nn_x_ref 8\n"
            << "metrics_theta_ref 8\nmetrics_x_ref 8\nseed 3\n";
    }

    REQUIRE(seqcal_run_spec_file(spec_path.string().c_str(), dir.string().c_str(),
                                 1) == SEQCAL_OK);
    CHECK(fs::exists(dir / "results.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(seqcal_report(dir.string().c_str()) == SEQCAL_OK);
    CHECK(fs::exists(dir / "report_series.csv"));

    SUBCASE("invalid spec file") {
        const fs::path bad = fs::temp_directory_path() / "seqcal_capi_bad.txt";
        {
            std::ofstream out(bad);
            out << "version 1\nmethods rnd\n";  // missing testbed
        }
        CHECK(seqcal_run_spec_file(bad.string().c_str(), dir.string().c_str(), 1) ==
              SEQCAL_ERR_INVALID_SPEC);
        CHECK(std::strlen(seqcal_last_error()) > 0);
        fs::remove(bad);
    }

    SUBCASE("missing spec file") {
        CHECK(seqcal_run_spec_file("/nonexistent/spec.txt", nullptr, 1) ==
              SEQCAL_ERR_INVALID_SPEC);
    }

    SUBCASE("report on a directory without results") {
        const fs::path empty = fs::temp_directory_path() / "seqcal_capi_empty";
        fs::remove_all(empty);
        fs::create_directories(empty);
        CHECK(seqcal_report(empty.string().c_str()) != SEQCAL_OK);
        fs::remove_all(empty);
    }

    fs::remove_all(dir);
    fs::remove(spec_path);
}

}  // TEST_SUITE
