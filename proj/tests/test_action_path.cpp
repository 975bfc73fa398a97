#include <catch2/catch_amalgamated.hpp>

#include <wkam/action_path.hpp>
#include <wkam/homothetic.hpp>

#include <random>

#include "fixtures.hpp"

using namespace wkam;
using Catch::Approx;

namespace {

/// Random mean-centered two-body configuration with comfortable separation.
Configuration random_pair(std::mt19937_64& rng) {
    Masses m{1.0, 1.0};
    for (;;) {
        MatrixXd pts(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) pts(i, j) = normal_sample(rng);
        recenter(pts, m);
        if (min_pair_distance(pts) > 0.5 && config_scale(pts) < 3.0)
            return Configuration(m, pts);
    }
}

std::vector<MatrixXd> straight_path(const Configuration& x, const Configuration& y, int k) {
    std::vector<MatrixXd> path;
    for (int i = 0; i <= k; ++i) {
        const double s = static_cast<double>(i) / k;
        path.push_back((1.0 - s) * x.points + s * y.points);
    }
    return path;
}

}   // namespace

TEST_CASE("action of a stationary curve is duration times potential") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    const MatrixXd x = orbit_at(orbit, 1.0).points;
    const double u = potential(x, orbit.a.a.masses);
    Trajectory rest(orbit.a.a.masses, {0.0, 1.0, 2.5}, {x, x, x});
    CHECK(action(rest) == Approx(2.5 * u).epsilon(1e-14));
}

TEST_CASE("action of the sampled homothetic segment matches the closed form") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    const double closed = orbit_action(orbit, 1.0, 8.0);
    CHECK(closed == Approx(2.8843).epsilon(1e-3));
    CHECK(action(sample_orbit(orbit, uniform_grid(1.0, 8.0, 400))) ==
          Approx(closed).epsilon(2e-3));
}

TEST_CASE("action quadrature is second order in the mesh") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    const double a100 = action(sample_orbit(orbit, uniform_grid(1.0, 8.0, 100)));
    const double a200 = action(sample_orbit(orbit, uniform_grid(1.0, 8.0, 200)));
    const double a400 = action(sample_orbit(orbit, uniform_grid(1.0, 8.0, 400)));
    const double ratio = std::abs(a100 - a200) / std::abs(a200 - a400);
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.5);
}

TEST_CASE("trajectory validation") {
    Masses m{1.0, 1.0};
    MatrixXd x(2, 2), collided(2, 2);
    x << 1.0, 0.0, -1.0, 0.0;
    collided << 1.0, 0.0, 1.0, 0.0;
    CHECK_THROWS_AS(Trajectory(m, {0.0, 0.0}, {x, x}), std::invalid_argument);
    CHECK_THROWS_AS(Trajectory(m, {0.0, 1.0, 2.0}, {x, collided, x}), CollisionError);
    // endpoint nodes are not interior; no throw
    CHECK_NOTHROW(Trajectory(m, {0.0, 1.0}, {x, 2.0 * x}));
}

TEST_CASE("jacobi length") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    const Masses& m = orbit.a.a.masses;
    SECTION("single point path has zero length") {
        CHECK(jacobi_length({orbit_at(orbit, 1.0).points}, m) == 0.0);
    }
    SECTION("homothetic ray length equals the action closed form") {
        std::vector<MatrixXd> path;
        for (double t : uniform_grid(1.0, 8.0, 400)) path.push_back(orbit_at(orbit, t).points);
        CHECK(jacobi_length(path, m) == Approx(orbit_action(orbit, 1.0, 8.0)).epsilon(2e-3));
    }
}

TEST_CASE("energy-zero reparametrization") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    const Masses& m = orbit.a.a.masses;

    SECTION("recovers t^{2/3} growth along the geometric ray") {
        // sample the ray uniformly in radius, forgetting the time parametrization
        std::vector<MatrixXd> path;
        const int k = 400;
        const double r0 = orbit.c, r1 = orbit.c * std::pow(8.0, 2.0 / 3.0);
        for (int i = 0; i <= k; ++i) {
            const double r = r0 + (r1 - r0) * i / k;
            path.push_back(r * orbit.a.a.points);
        }
        Trajectory traj = reparametrize_energy_zero(path, m, 1.0);

        // log-log fit of |x(t)| against recovered t
        const size_t count = traj.nodes.size();
        MatrixXd design(static_cast<Eigen::Index>(count), 2);
        VectorXd rhs(static_cast<Eigen::Index>(count));
        for (size_t i = 0; i < count; ++i) {
            design(static_cast<Eigen::Index>(i), 0) = 1.0;
            design(static_cast<Eigen::Index>(i), 1) = std::log(traj.times[i]);
            rhs[static_cast<Eigen::Index>(i)] = std::log(mass_norm(traj.nodes[i], m));
        }
        const VectorXd fit = design.colPivHouseholderQr().solve(rhs);
        CHECK(fit[1] == Approx(2.0 / 3.0).margin(0.01));
        CHECK(traj.times.back() == Approx(8.0).epsilon(1e-3));
    }

    SECTION("midpoint energy is matched by construction, node energy to 1e-3") {
        std::vector<MatrixXd> path;
        for (double t : uniform_grid(1.0, 8.0, 400)) path.push_back(orbit_at(orbit, t).points);
        Trajectory traj = reparametrize_energy_zero(path, m, 1.0);
        CHECK(energy_residual(traj) <= 1e-3);
    }

    SECTION("doubling the mesh at least halves the node energy residual") {
        auto residual_at = [&](int k) {
            std::vector<MatrixXd> path;
            for (double t : uniform_grid(1.0, 8.0, k)) path.push_back(orbit_at(orbit, t).points);
            return energy_residual(reparametrize_energy_zero(path, m, 1.0));
        };
        CHECK(residual_at(100) / residual_at(200) >= 1.8);
    }

    SECTION("repeated nodes are rejected") {
        const MatrixXd x = orbit_at(orbit, 1.0).points;
        CHECK_THROWS_AS(reparametrize_energy_zero({x, x}, m), std::invalid_argument);
    }
}

TEST_CASE("newton residual") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    SECTION("small on the analytic orbit, fourth the size when the mesh doubles") {
        const double coarse = newton_residual(sample_orbit(orbit, uniform_grid(1.0, 8.0, 200)));
        const double fine = newton_residual(sample_orbit(orbit, uniform_grid(1.0, 8.0, 400)));
        CHECK(fine <= 1e-2);
        CHECK(coarse / fine >= 3.0);
    }
    SECTION("large on a straight uniform-speed path between random configurations") {
        std::mt19937_64 rng(31);
        Configuration x = random_pair(rng), y = random_pair(rng);
        std::vector<double> times;
        const int k = 50;
        for (int i = 0; i <= k; ++i) times.push_back(static_cast<double>(i) / k);
        Trajectory traj(x.masses, times, straight_path(x, y, k));
        CHECK(newton_residual(traj) > 0.1);
    }
    SECTION("needs at least three nodes") {
        const MatrixXd a = orbit_at(orbit, 1.0).points, b = orbit_at(orbit, 2.0).points;
        CHECK_THROWS_AS(newton_residual(Trajectory(orbit.a.a.masses, {0.0, 1.0}, {a, b})),
                        ShapeError);
    }
}

TEST_CASE("center of mass drift") {
    Masses m{1.0, 1.0};
    MatrixXd base(2, 2);
    base << 1.0, 0.0, -1.0, 0.0;

    SECTION("quadratic drift is detected and translation does not change it") {
        std::vector<double> times;
        std::vector<MatrixXd> nodes, shifted;
        const int k = 20;
        for (int i = 0; i <= k; ++i) {
            const double t = static_cast<double>(i) / k;
            times.push_back(t);
            MatrixXd node = base;
            node.col(0).array() += t * t;   // G(t) = t^2 e1
            nodes.push_back(node);
            MatrixXd moved = node;
            moved.col(0).array() += 1.0;
            shifted.push_back(moved);
        }
        Trajectory traj(m, times, nodes);
        Trajectory moved(m, times, shifted);

        // independent scalar least-squares fit of t^2 on the same grid
        MatrixXd design(k + 1, 2);
        VectorXd rhs(k + 1);
        for (int i = 0; i <= k; ++i) {
            design(i, 0) = 1.0;
            design(i, 1) = times[static_cast<size_t>(i)];
            rhs[i] = times[static_cast<size_t>(i)] * times[static_cast<size_t>(i)];
        }
        const VectorXd fit = design.colPivHouseholderQr().solve(rhs);
        const double expected = (rhs - design * fit).cwiseAbs().maxCoeff();

        CHECK(center_of_mass_drift(traj) == Approx(expected).epsilon(1e-12));
        CHECK(center_of_mass_drift(moved) == Approx(expected).epsilon(1e-12));
        CHECK(expected > 0.01);
    }

    SECTION("linear center-of-mass motion has no drift") {
        std::vector<double> times{0.0, 0.7, 1.9};
        std::vector<MatrixXd> nodes;
        for (double t : times) {
            MatrixXd node = base;
            node.col(1).array() += 0.3 * t;
            nodes.push_back(node);
        }
        CHECK(center_of_mass_drift(Trajectory(m, times, nodes)) < 1e-14);
    }
}

TEST_CASE("phi between homothetic orbit points") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    const Configuration x = orbit_at(orbit, 1.0), y = orbit_at(orbit, 8.0);
    const double closed = orbit_action(orbit, 1.0, 8.0);

    PhiOptions jopts;
    jopts.nodes = 200;
    const MinimizerResult jacobi = phi(x, y, jopts);

    PhiOptions topts;
    topts.nodes = 200;
    topts.backend = PhiBackend::time_domain;
    const MinimizerResult timed = phi(x, y, topts);

    SECTION("jacobi backend matches the closed form within 0.5%") {
        CHECK(jacobi.converged);
        CHECK(jacobi.phi == Approx(closed).epsilon(5e-3));
    }
    SECTION("time-domain backend agrees within 1%") {
        CHECK(timed.converged);
        CHECK(timed.phi == Approx(closed).epsilon(1e-2));
        CHECK(std::abs(timed.phi - jacobi.phi) <= 1e-2 * jacobi.phi);
    }
    SECTION("converged minimizers satisfy the conservation residuals") {
        for (const MinimizerResult* r : {&jacobi, &timed}) {
            CHECK(r->energy_residual <= 1e-3);
            CHECK(r->newton_residual <= 5e-2);
            const double scale = config_scale(r->trajectory.nodes.back());
            CHECK(center_of_mass_drift(r->trajectory) <= 1e-8 * scale);
        }
    }
    SECTION("recovered duration approximates the orbit interval") {
        CHECK(jacobi.trajectory.duration() == Approx(7.0).epsilon(2e-2));
        CHECK(timed.trajectory.duration() == Approx(7.0).epsilon(2e-2));
    }
}

TEST_CASE("phi with identical endpoints is zero and unattained") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    const Configuration x = orbit_at(orbit, 1.0);
    const MinimizerResult r = phi(x, x);
    CHECK(r.phi == 0.0);
    CHECK(r.trajectory.nodes.size() == 1);
    CHECK(r.converged);
}

TEST_CASE("phi properties on random pairs") {
    std::mt19937_64 rng(47);
    PhiOptions opts;
    opts.nodes = 64;

    SECTION("symmetry under endpoint exchange") {
        for (int trial = 0; trial < 3; ++trial) {
            Configuration x = random_pair(rng), y = random_pair(rng);
            const double forward = phi(x, y, opts).phi;
            const double backward = phi(y, x, opts).phi;
            CHECK(forward == Approx(backward).epsilon(1e-3));
        }
    }
    SECTION("triangle inequality") {
        for (int trial = 0; trial < 3; ++trial) {
            Configuration x = random_pair(rng), y = random_pair(rng), z = random_pair(rng);
            const double xz = phi(x, z, opts).phi;
            const double xy = phi(x, y, opts).phi;
            const double yz = phi(y, z, opts).phi;
            CHECK(xz <= xy + yz + 2e-3 * (xy + yz));
        }
    }
    SECTION("straight collision-free segments upper-bound phi") {
        for (int trial = 0; trial < 3; ++trial) {
            Configuration x = random_pair(rng), y = random_pair(rng);
            bool clear = true;
            const std::vector<MatrixXd> segment = straight_path(x, y, opts.nodes);
            for (const MatrixXd& node : segment)
                if (min_pair_distance(node) < 0.05) clear = false;
            if (!clear) continue;
            CHECK(phi(x, y, opts).phi <=
                  jacobi_length(segment, x.masses) * (1.0 + 1e-6) + 1e-9);
        }
    }
    SECTION("rotation invariance") {
        Configuration x = random_pair(rng), y = random_pair(rng);
        const MatrixXd r = exp_skew(0.7 * GroupGenerators::plane(2, 0, 1));
        CHECK(phi(rotate(x, r), rotate(y, r), opts).phi ==
              Approx(phi(x, y, opts).phi).epsilon(1e-6));
    }
}

TEST_CASE("two-body phi matches the flat-cone metric in both winding classes") {
    // The reduced two-body Jacobi metric is a flat cone of total angle pi:
    // bodies at +-p map to radius rho = 2 sqrt(2 |p|) and angle theta/2, so the
    // geodesic chord is L^2 = rho0^2 + rho1^2 - 2 rho0 rho1 cos(delta) with
    // delta = min(|dtheta|, 2 pi - |dtheta|) / 2.  Signed near-antipodal turns
    // probe that the minimizer picks the shorter winding class around the
    // collision vertex regardless of orientation.
    constexpr double pi = 3.141592653589793;
    const Masses m{1.0, 1.0};
    auto pair_at = [&](double radius, double theta) {
        MatrixXd pts(2, 2);
        pts << radius * std::cos(theta), radius * std::sin(theta),
            -radius * std::cos(theta), -radius * std::sin(theta);
        return Configuration(m, pts);
    };
    auto cone_chord = [&](double r0, double r1, double dtheta) {
        const double rho0 = 2.0 * std::sqrt(2.0 * r0), rho1 = 2.0 * std::sqrt(2.0 * r1);
        const double delta = 0.5 * std::min(std::abs(dtheta), 2.0 * pi - std::abs(dtheta));
        return std::sqrt(rho0 * rho0 + rho1 * rho1 - 2.0 * rho0 * rho1 * std::cos(delta));
    };

    PhiOptions opts;
    opts.nodes = 200;
    const Configuration x = pair_at(0.8, 0.0);
    for (const double turn : {0.0, 0.6, 1.7, 0.95 * pi, -0.95 * pi}) {
        const MinimizerResult r = phi(x, pair_at(1.6, turn), opts);
        CAPTURE(turn);
        CHECK(r.converged);
        CHECK(r.phi == Approx(cone_chord(0.8, 1.6, turn)).epsilon(5e-3));
        CHECK_FALSE(r.multiple_minima);
    }

    // antipodal endpoints: the two winding classes tie by symmetry
    const MinimizerResult tied = phi(x, pair_at(0.8, pi), opts);
    CHECK(tied.converged);
    CHECK(tied.phi == Approx(cone_chord(0.8, 0.8, pi)).epsilon(5e-3));
    CHECK(tied.multiple_minima);
}

TEST_CASE("phi mean-centers its inputs and records the shifts") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    Configuration x = orbit_at(orbit, 1.0), y = orbit_at(orbit, 8.0);
    PhiOptions opts;
    opts.nodes = 64;
    const double centered = phi(x, y, opts).phi;

    MatrixXd moved = x.points;
    moved.rowwise() += Eigen::RowVector2d(2.0, -1.0);
    const MinimizerResult r = phi(Configuration(x.masses, moved), y, opts);
    CHECK(r.phi == Approx(centered).epsilon(1e-9));
    CHECK(r.from_shift(0) == Approx(2.0));
    CHECK(r.from_shift(1) == Approx(-1.0));
    CHECK(r.to_shift.norm() < 1e-14);
    CHECK(center_of_mass(r.trajectory.nodes.front(), x.masses).norm() < 1e-12);
}

TEST_CASE("phi argument validation") {
    HomotheticOrbit orbit = fixtures::two_body_orbit();
    const Configuration x = orbit_at(orbit, 1.0);
    MatrixXd collided(2, 2);
    collided << 1.0, 0.0, 1.0, 0.0;
    CHECK_THROWS_AS(phi(x, Configuration(Masses{1.0, 2.0}, collided)), ShapeError);
    CHECK_THROWS_AS(phi(x, Configuration(x.masses, collided)), CollisionError);
    PhiOptions bad;
    bad.nodes = 1;
    CHECK_THROWS_AS(phi(x, orbit_at(orbit, 2.0), bad), std::invalid_argument);
}
