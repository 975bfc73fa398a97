#include <catch2/catch_amalgamated.hpp>

#include <wkam/phi_cache.hpp>

#include "fixtures.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

using namespace wkam;
using Catch::Approx;

namespace {

std::filesystem::path fresh_cache_dir(const char* tag) {
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() / (std::string("wkam_cache_") + tag);
    std::filesystem::remove_all(dir);
    return dir;
}

bool results_identical(const MinimizerResult& a, const MinimizerResult& b) {
    if (a.phi != b.phi || a.backend != b.backend || a.converged != b.converged ||
        a.multiple_minima != b.multiple_minima ||
        a.newton_residual != b.newton_residual || a.energy_residual != b.energy_residual)
        return false;
    if (a.trajectory.times != b.trajectory.times) return false;
    for (size_t k = 0; k < a.trajectory.nodes.size(); ++k)
        if (a.trajectory.nodes[k] != b.trajectory.nodes[k]) return false;
    return a.from_shift == b.from_shift && a.to_shift == b.to_shift;
}

}   // namespace

TEST_CASE("cache keys separate distinct inputs", "[phi_cache]") {
    const HomotheticOrbit orbit = fixtures::two_body_orbit();
    const Configuration x = orbit_at(orbit, 1.0);
    const Configuration y = orbit_at(orbit, 2.0);
    PhiOptions opts;
    opts.nodes = 64;

    const std::string base = phi_cache_key(x, y, opts);
    CHECK(base == phi_cache_key(x, y, opts));   // deterministic
    CHECK(base.size() == 64);                   // sha-256 hex

    PhiOptions finer = opts;
    finer.nodes = 128;
    CHECK(phi_cache_key(x, y, finer) != base);

    PhiOptions other_backend = opts;
    other_backend.backend = PhiBackend::time_domain;
    CHECK(phi_cache_key(x, y, other_backend) != base);

    PhiOptions looser = opts;
    looser.grad_tol = 1e-6;
    CHECK(phi_cache_key(x, y, looser) != base);

    CHECK(phi_cache_key(y, x, opts) != base);

    Configuration nudged = x;
    nudged.points(0, 0) += 1e-13;
    CHECK(phi_cache_key(nudged, y, opts) != base);
}

TEST_CASE("binary entry encoding is exact", "[phi_cache]") {
    const HomotheticOrbit orbit = fixtures::two_body_orbit();
    PhiOptions opts;
    opts.nodes = 32;
    const MinimizerResult result = phi(orbit_at(orbit, 1.0), orbit_at(orbit, 2.0), opts);

    const MinimizerResult back = detail::decode_result(detail::encode_result(result));
    CHECK(results_identical(result, back));

    CHECK_THROWS(detail::decode_result("garbage"));
    std::string truncated = detail::encode_result(result);
    truncated.resize(truncated.size() / 2);
    CHECK_THROWS(detail::decode_result(truncated));
}

TEST_CASE("read-through cache: hit, miss, corruption, deletion", "[phi_cache]") {
    // a representative production query: three bodies, off the ray, long horizon
    const HomotheticOrbit orbit = fixtures::lagrange_orbit();
    Configuration x = rotate(orbit_at(orbit, 1.5),
                             (MatrixXd(2, 2) << std::cos(0.9), -std::sin(0.9),
                              std::sin(0.9), std::cos(0.9))
                                 .finished());
    x.points.row(0) *= 1.2;
    x.points.row(2) *= 0.9;
    recenter(x.points, x.masses);
    const Configuration y = orbit_at(orbit, 50.0);
    PhiOptions opts;
    opts.nodes = 400;

    const std::filesystem::path dir = fresh_cache_dir("rw");
    const PhiCache cache(dir);
    const std::string key = phi_cache_key(x, y, opts);

    int computes = 0;
    auto compute = [&] {
        ++computes;
        return phi(x, y, opts);
    };

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const MinimizerResult first = cache.get_or_compute(key, compute);
    const auto t1 = clock::now();

    const MinimizerResult second = cache.get_or_compute(key, compute);
    double hit_us = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 5; ++rep) {
        const auto h0 = clock::now();
        cache.get_or_compute(key, compute);
        const auto h1 = clock::now();
        hit_us = std::min(
            hit_us,
            std::chrono::duration_cast<std::chrono::nanoseconds>(h1 - h0).count() / 1e3);
    }

    CHECK(computes == 1);
    CHECK(results_identical(first, second));

    const double solve_us =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1e3;
    INFO("solve " << solve_us << "us, hit " << hit_us << "us");
    CHECK(hit_us * 100.0 <= solve_us);

    // no temp litter after the stores
    for (const auto& f : std::filesystem::directory_iterator(dir))
        CHECK(f.path().extension() == ".bin");

    // a different mesh is a different key: recompute
    PhiOptions finer = opts;
    finer.nodes = 401;
    cache.get_or_compute(phi_cache_key(x, y, finer), compute);
    CHECK(computes == 2);

    // corrupt entry: recomputed and healed
    {
        std::ofstream out(dir / (key + ".bin"), std::ios::binary | std::ios::trunc);
        out << "WKC2 but not really";
    }
    const MinimizerResult healed = cache.get_or_compute(key, compute);
    CHECK(computes == 3);
    CHECK(results_identical(first, healed));
    cache.get_or_compute(key, compute);
    CHECK(computes == 3);   // healed entry hits again

    // deleting the directory is transparent
    std::filesystem::remove_all(dir);
    const MinimizerResult recomputed = cache.get_or_compute(key, compute);
    CHECK(computes == 4);
    CHECK(results_identical(first, recomputed));

    std::filesystem::remove_all(dir);
}

TEST_CASE("cache transparency through the field evaluator", "[phi_cache]") {
    const HomotheticOrbit orbit = fixtures::two_body_orbit();
    const std::filesystem::path dir = fresh_cache_dir("field");

    WeakKamSpec plain(orbit);
    plain.horizon = 100.0;
    plain.richardson = false;
    plain.phi_options.nodes = 64;

    WeakKamSpec cached = plain;
    cached.phi_eval = cached_phi(std::make_shared<PhiCache>(dir));

    const Configuration x = rotate(orbit_at(orbit, 1.5),
                                   (MatrixXd(2, 2) << 0.0, -1.0, 1.0, 0.0).finished());
    const double direct = busemann(x, plain).u;
    const double through_cold_cache = busemann(x, cached).u;
    const double through_warm_cache = busemann(x, cached).u;
    CHECK(direct == through_cold_cache);
    CHECK(direct == through_warm_cache);

    std::filesystem::remove_all(dir);
}
