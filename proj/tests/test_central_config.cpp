#include <catch2/catch_amalgamated.hpp>

#include <wkam/central_config.hpp>

#include <random>

using namespace wkam;
using Catch::Approx;

namespace {

/// Brute-force shape-space oracle for three equal unit masses: scan triangles by
/// side lengths, normalize to I = 1 through the Lagrange identity
/// I = (1/M) sum_{i<j} m_i m_j r_ij^2 (valid at G = 0), and take the best U.
double scan_three_body_minimum() {
    double best = std::numeric_limits<double>::infinity();
    const int steps = 60;
    for (int ia = 0; ia <= steps; ++ia)
        for (int ib = 0; ib <= steps; ++ib)
            for (int ic = 0; ic <= steps; ++ic) {
                const double a = 0.2 + 1.8 * ia / steps;
                const double b = 0.2 + 1.8 * ib / steps;
                const double c = 0.2 + 1.8 * ic / steps;
                if (a + b < c || b + c < a || c + a < b) continue;
                const double scale = std::sqrt(3.0 / (a * a + b * b + c * c));
                best = std::min(best, (1.0 / a + 1.0 / b + 1.0 / c) / scale);
            }
    return best;
}

}   // namespace

TEST_CASE("two equal masses minimize to the antipodal pair") {
    MinimalConfiguration mc = minimize_on_sphere(Masses{1.0, 1.0}, 2, 8, 42);
    CHECK(mc.U0 == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
    CHECK(mc.a.points.row(0).norm() == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-8));
    CHECK(mc.a.points.row(1).norm() == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-8));
    CHECK(mc.lagrange_residual < 1e-10);
    CHECK(mc.multistart_count == 8);
}

TEST_CASE("two unequal masses: closed-form one-parameter minimum") {
    // G = 0 and I = 1 give separation sqrt((m1+m2)^3)/ (m1 m2) * t with 6t^2-style
    // algebra; for m = (1,2) the minimum is U0 = 2 sqrt(2/3).
    MinimalConfiguration mc = minimize_on_sphere(Masses{1.0, 2.0}, 2, 8, 1);
    CHECK(mc.U0 == Approx(2.0 * std::sqrt(2.0 / 3.0)).epsilon(1e-10));
}

TEST_CASE("three equal masses minimize to the unit equilateral triangle") {
    MinimalConfiguration mc = minimize_on_sphere(Masses{1.0, 1.0, 1.0}, 2, 32, 0);

    SECTION("potential value and side lengths") {
        CHECK(mc.U0 == Approx(3.0).epsilon(1e-10));
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                CHECK((mc.a.points.row(i) - mc.a.points.row(j)).norm() ==
                      Approx(1.0).epsilon(1e-8));
    }
    SECTION("constraint and certification invariants") {
        CHECK(moment_of_inertia(mc.a) == Approx(1.0).epsilon(1e-12));
        CHECK(center_of_mass(mc.a).norm() < 1e-12);
        CHECK(mc.lagrange_residual < 1e-10);
    }
    SECTION("brute-force shape scan confirms global minimality") {
        const double scanned = scan_three_body_minimum();
        CHECK(mc.U0 <= scanned + 1e-9);
        CHECK(scanned == Approx(3.0).epsilon(1e-3));   // grid includes the equilateral shape
    }
    SECTION("canonical gauge: first body on +x, second in upper half-plane") {
        CHECK(mc.a.points(0, 0) > 0.0);
        CHECK(std::abs(mc.a.points(0, 1)) < 1e-12);
        CHECK(mc.a.points(1, 1) >= -1e-12);
    }
    SECTION("descent trace is non-increasing") {
        REQUIRE(mc.u_trace.size() >= 2);
        for (size_t k = 1; k < mc.u_trace.size(); ++k)
            CHECK(mc.u_trace[k] <= mc.u_trace[k - 1] + 1e-12);
    }
    SECTION("U0 is seed-invariant and the gauge makes output reproducible") {
        MinimalConfiguration other = minimize_on_sphere(Masses{1.0, 1.0, 1.0}, 2, 8, 777);
        CHECK(other.U0 == Approx(mc.U0).epsilon(1e-10));
        CHECK((other.a.points - mc.a.points).norm() < 1e-8);
    }
}

TEST_CASE("four equal masses in d = 3 minimize to the regular tetrahedron") {
    MinimalConfiguration mc = minimize_on_sphere(Masses{1.0, 1.0, 1.0, 1.0}, 3, 16, 3);
    const double side = std::sqrt(2.0 / 3.0);   // from I = (1/M) sum m_i m_j r_ij^2 = 1
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            CHECK((mc.a.points.row(i) - mc.a.points.row(j)).norm() ==
                  Approx(side).margin(1e-6));
    CHECK(mc.U0 == Approx(6.0 / side).epsilon(1e-10));
    CHECK(mc.lagrange_residual < 1e-10);
}

TEST_CASE("centrality residual") {
    SECTION("equilateral configuration is central") {
        MinimalConfiguration mc = minimize_on_sphere(Masses{1.0, 1.0, 1.0}, 2, 4, 9);
        CHECK(centrality_residual(mc.a) < 1e-10);
    }
    SECTION("collinear euler configuration of equal masses is central but not minimal") {
        // symmetric collinear solution (-x, 0, x) with 2x^2 = 1
        const double x = 1.0 / std::sqrt(2.0);
        MatrixXd pts(3, 2);
        pts << -x, 0.0, 0.0, 0.0, x, 0.0;
        Configuration euler(Masses{1.0, 1.0, 1.0}, pts);
        CHECK(centrality_residual(euler) < 1e-12);
        CHECK(potential(euler) == Approx(2.5 * std::sqrt(2.0)));
        CHECK(potential(euler) > 3.0);   // saddle, not the minimum
    }
    SECTION("random non-central points have positive residual") {
        std::mt19937_64 rng(123);
        Masses m{1.0, 1.0, 1.0};
        for (int trial = 0; trial < 5; ++trial) {
            MatrixXd pts(3, 2);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 2; ++j) pts(i, j) = normal_sample(rng);
            recenter(pts, m);
            pts /= mass_norm(pts, m);
            if (min_pair_distance(pts) < 0.05) continue;
            CHECK(centrality_residual(Configuration(m, pts)) > 1e-3);
        }
    }
    SECTION("rejects configurations off the sphere") {
        MatrixXd pts(2, 2);
        pts << 1.0, 0.0, -1.0, 0.0;
        CHECK_THROWS_AS(centrality_residual(Configuration(Masses{1.0, 1.0}, pts)),
                        std::invalid_argument);
    }
}

TEST_CASE("minimize_on_sphere validates arguments") {
    CHECK_THROWS_AS(minimize_on_sphere(Masses{1.0}, 2, 4, 0), ShapeError);
    CHECK_THROWS_AS(minimize_on_sphere(Masses{1.0, 1.0}, 1, 4, 0), ShapeError);
    CHECK_THROWS_AS(minimize_on_sphere(Masses{1.0, 1.0}, 2, 0, 0), std::invalid_argument);
}
