#ifndef WKAM_HOMOTHETIC_HPP
#define WKAM_HOMOTHETIC_HPP

#include <wkam/action_path.hpp>
#include <wkam/central_config.hpp>

namespace wkam {

/// The parabolic homothetic motion gamma0(t) = c t^{2/3} a of a central
/// configuration a with I(a) = 1, where c^3 = (9/2) U0.  Zero energy and zero
/// angular momentum for all t; the analytic ground truth for everything else.
struct HomotheticOrbit {
    MinimalConfiguration a;
    double U0;
    double c;

    explicit HomotheticOrbit(MinimalConfiguration config)
        : a(std::move(config)), U0(a.U0), c(std::cbrt(4.5 * a.U0)) {
        if (std::abs(moment_of_inertia(a.a) - 1.0) > 1e-10)
            throw std::invalid_argument("HomotheticOrbit: central configuration must have I = 1");
        if (std::abs(c * c * c - 4.5 * U0) > 1e-12 * std::max(1.0, U0))
            throw std::logic_error("HomotheticOrbit: c^3 = (9/2) U0 violated");
    }

    /// Same orbit with the central configuration rotated rigidly by theta.
    HomotheticOrbit rotated(const MatrixXd& theta) const {
        MinimalConfiguration rotated_config{rotate(a.a, theta), a.U0, a.lagrange_residual,
                                            a.multistart_count, a.u_trace};
        return HomotheticOrbit(std::move(rotated_config));
    }
};

/// gamma0(t) = c t^{2/3} a; t = 0 is the total collision at the origin.
inline Configuration orbit_at(const HomotheticOrbit& orbit, double t) {
    if (t < 0.0) throw std::invalid_argument("orbit_at: t must be non-negative");
    return Configuration(orbit.a.a.masses,
                         orbit.c * std::pow(t, 2.0 / 3.0) * orbit.a.a.points);
}

/// d/dt gamma0 = (2c/3) t^{-1/3} a; unbounded at the collision time.
inline Velocity orbit_velocity(const HomotheticOrbit& orbit, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("orbit_velocity: t must be positive");
    return Velocity{(2.0 * orbit.c / 3.0) * std::pow(t, -1.0 / 3.0) * orbit.a.a.points};
}

/// Closed-form action of gamma0 on [t0, t1]: the integrand is (4c^2/9) t^{-2/3},
/// so A = (4c^2/3)(t1^{1/3} - t0^{1/3}).
inline double orbit_action(const HomotheticOrbit& orbit, double t0, double t1) {
    if (t0 < 0.0 || t1 < t0)
        throw std::invalid_argument("orbit_action: need 0 <= t0 <= t1");
    return (4.0 * orbit.c * orbit.c / 3.0) * (std::cbrt(t1) - std::cbrt(t0));
}

/// Newton-equation defect of the sampled orbit on the given time grid; small and
/// decreasing under mesh refinement because the orbit solves the equations exactly.
inline double verify_solution(const HomotheticOrbit& orbit, const std::vector<double>& grid) {
    if (grid.size() < 3)
        throw std::invalid_argument("verify_solution: need at least three grid times");
    std::vector<MatrixXd> nodes;
    nodes.reserve(grid.size());
    for (double t : grid) {
        if (!(t > 0.0))
            throw std::invalid_argument("verify_solution: grid times must be positive");
        nodes.push_back(orbit_at(orbit, t).points);
    }
    return newton_residual(Trajectory(orbit.a.a.masses, grid, std::move(nodes)));
}

/// Uniform time grid helper for sampling the orbit.
inline std::vector<double> uniform_grid(double t0, double t1, int segments) {
    if (!(t0 < t1) || segments < 1)
        throw std::invalid_argument("uniform_grid: need t0 < t1 and at least one segment");
    std::vector<double> grid;
    grid.reserve(static_cast<size_t>(segments) + 1);
    for (int k = 0; k <= segments; ++k)
        grid.push_back(t0 + (t1 - t0) * static_cast<double>(k) / segments);
    return grid;
}

/// Sample the orbit as a Trajectory on a positive time grid.
inline Trajectory sample_orbit(const HomotheticOrbit& orbit, const std::vector<double>& grid) {
    std::vector<MatrixXd> nodes;
    nodes.reserve(grid.size());
    for (double t : grid) nodes.push_back(orbit_at(orbit, t).points);
    return Trajectory(orbit.a.a.masses, grid, std::move(nodes));
}

}   // namespace wkam

#endif
