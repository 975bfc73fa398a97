#include <wkam/serialization.hpp>
#include <wkam/verify.hpp>

#include <catch_amalgamated.hpp>

using namespace wkam;
using verify_detail::Context;
using Catch::Approx;

TEST_CASE("single criteria fill the report and feed the conservation log",
          "[verify]") {
    Context ctx{ExperimentConfig{}, nullptr, {}};

    const CheckResult ray = verify_detail::check_busemann_ray(ctx);
    CHECK(ray.id == 4);
    CHECK(ray.pass);
    CHECK(ray.measured.at("rel_error_worst").get<double>() <= 1e-2);
    const auto drops = ray.measured.at("offray_drops").get<std::vector<double>>();
    REQUIRE(drops.size() == 2);
    CHECK(drops[0] > 0.0);
    CHECK(drops[1] > 0.0);
    CHECK(drops[1] <= 0.8 * drops[0]);
    CHECK(ctx.conservation.solves > 0);
    CHECK(ctx.conservation.converged > 0);

    const CheckResult conservation = verify_detail::check_conservation(ctx);
    CHECK(conservation.id == 10);
    CHECK(conservation.pass);
    CHECK(conservation.measured.at("max_energy_residual_production").get<double>() <= 1e-3);

    const json j = to_json(ray);
    CHECK(j.at("pass").get<bool>());
    CHECK(j.at("tolerances").contains("rel_error"));
    CHECK(j.at("note").get<std::string>().find("on-ray") != std::string::npos);
}

TEST_CASE("too-coarse mesh fails the eikonal criterion with measured values",
          "[verify]") {
    ExperimentConfig coarse;
    coarse.nodes = 16;
    coarse.horizon = 250.0;
    Context ctx{coarse, nullptr, {}};

    const CheckResult r = verify_detail::check_eikonal(ctx);
    CHECK_FALSE(r.pass);
    INFO(r.note);
    // the report still carries the measured study, not just a verdict
    REQUIRE(r.measured.contains("medians"));
    REQUIRE(r.measured.contains("excluded"));
    const auto medians = r.measured.at("medians").get<std::vector<double>>();
    REQUIRE(medians.size() == 3);
    const bool too_big = medians[2] > 0.05;
    const bool too_few = r.measured.at("kept_points").get<int>() < 10;
    CHECK((too_big || too_few));
}

TEST_CASE("malformed config is rejected before any solve", "[verify]") {
    ExperimentConfig bad;
    bad.masses = {1.0, -1.0};
    CHECK_THROWS_AS(run_acceptance(bad), SerializationError);

    ExperimentConfig tiny;
    tiny.nodes = 4;
    CHECK_THROWS_AS(run_acceptance(tiny), SerializationError);
}

TEST_CASE("suite report serializes with one entry per criterion", "[verify]") {
    SuiteReport report;
    report.checks.push_back(CheckResult{1, "a", true, 0.5, {{"x", 1.0}}, {{"x", 2.0}}, "ok"});
    report.checks.push_back(CheckResult{2, "b", false, 0.1, {}, {}, "broke"});
    report.all_pass = false;
    report.runtime_seconds = 0.6;

    const json j = to_json(report);
    REQUIRE(j.at("criteria").size() == 2);
    CHECK_FALSE(j.at("all_pass").get<bool>());
    CHECK(j.at("criteria")[0].at("measured").at("x").get<double>() == Approx(1.0));
    CHECK(j.at("criteria")[1].at("note").get<std::string>() == "broke");
}
