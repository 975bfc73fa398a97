#ifndef WKAM_WEAK_KAM_HPP
#define WKAM_WEAK_KAM_HPP

#include <wkam/homothetic.hpp>

#include <algorithm>
#include <functional>
#include <optional>

namespace wkam {

enum class WeakKamMode : std::uint8_t { fixed, rotated, invariant };

/// How to build a finite-horizon Busemann field: the reference orbit, the mode
/// (u_a, a rotated copy, or the rotation-invariant infimum over a subgroup),
/// the horizon T, and solver knobs.
struct WeakKamSpec {
    explicit WeakKamSpec(HomotheticOrbit reference) : orbit(std::move(reference)) {}

    HomotheticOrbit orbit;
    WeakKamMode mode = WeakKamMode::fixed;
    double horizon = 1e3;
    bool richardson = true;   // re-evaluate at 4T and report the difference
    std::optional<GroupGenerators> generators;   // subgroup for invariant mode
    PhiOptions phi_options{.nodes = 400};
    int scan_points = 64;     // coarse rotation scan resolution (>= 200 used for so(3))
    /// Evaluation hook so callers can interpose a cache; defaults to phi().
    std::function<MinimizerResult(const Configuration&, const Configuration&,
                                  const PhiOptions&)>
        phi_eval;

    void validate() const {
        if (!(horizon > 0.0)) throw std::invalid_argument("WeakKamSpec: horizon must be positive");
        if (mode == WeakKamMode::invariant) {
            if (!generators)
                throw std::invalid_argument("WeakKamSpec: invariant mode needs generators");
            if (generators->dim() != orbit.a.a.dim())
                throw ShapeError("WeakKamSpec: generator dimension != configuration dimension");
        }
        if (scan_points < 8)
            throw std::invalid_argument("WeakKamSpec: scan_points too small");
    }

    MinimizerResult solve(const Configuration& from, const Configuration& to,
                          const PhiOptions& opts) const {
        if (phi_eval) return phi_eval(from, to, opts);
        return phi(from, to, opts);
    }
};

/// One evaluation of the field at a point: value, gradient estimate, the rotation
/// achieving the infimum (identity outside invariant mode), and a horizon error
/// estimate |u(x;4T) - u(x;T)| when requested.
struct FieldSample {
    Configuration x;
    double u;
    MatrixXd gradient;
    MatrixXd optimal_rotation;
    double error_estimate;
};

/// Diagnostics of an approximate calibrating ray from x.
struct CalibrationReport {
    Trajectory curve;
    double calibration_defect;
    double max_angmom;
    VectorXd momentum_components;      // per-generator max |mu_k| along the curve
    std::vector<double> asymptotic_error;   // |alpha(t) t^{-2/3} - c a| at dyadic t
    double com_drift;
    double u_value;                    // field value at x
    MatrixXd optimal_rotation;
};

namespace detail {

/// Second-order one-sided velocity at the first node of a trajectory.
inline MatrixXd initial_velocity(const Trajectory& traj) {
    if (traj.nodes.size() < 3)
        throw ShapeError("initial_velocity: need at least three nodes");
    const double h0 = traj.times[1] - traj.times[0];
    const double h1 = traj.times[2] - traj.times[1];
    const double a = -(2.0 * h0 + h1) / (h0 * (h0 + h1));
    const double b = (h0 + h1) / (h0 * h1);
    const double c = -h0 / (h1 * (h0 + h1));
    return a * traj.nodes[0] + b * traj.nodes[1] + c * traj.nodes[2];
}

/// Covector estimate -M alpha'(0) from a minimizer leaving x: the differential of
/// u along the calibrating ray under the convention d_x u(w) = -w . alpha'(0).
inline MatrixXd gradient_from_curve(const Trajectory& traj) {
    const MatrixXd v = initial_velocity(traj);
    return -(v.array().colwise() * traj.masses.values().array()).matrix();
}

inline bool is_total_collision(const Configuration& x) {
    return config_scale(x.points) == 0.0;
}

/// Normalize a rotation generator so exp(s xi) has period 2 pi in s.
inline MatrixXd unit_speed(MatrixXd xi) {
    const double top = xi.jacobiSvd().singularValues()(0);
    if (!(top > 0.0)) throw GroupError("unit_speed: zero generator");
    return xi / top;
}

/// Cumulative Lagrangian action over [times[0], times[i]] for every node.
inline std::vector<double> cumulative_action(const Trajectory& traj) {
    std::vector<double> cum(traj.nodes.size(), 0.0);
    for (size_t k = 1; k < traj.nodes.size(); ++k) {
        const double dt = traj.times[k] - traj.times[k - 1];
        const MatrixXd dx = traj.nodes[k] - traj.nodes[k - 1];
        const MatrixXd mid = 0.5 * (traj.nodes[k] + traj.nodes[k - 1]);
        cum[k] = cum[k - 1] + 0.5 * mass_inner(dx, dx, traj.masses) / dt +
                 dt * potential(mid, traj.masses);
    }
    return cum;
}

/// phi(x, gamma0(T)) - A(gamma0|[0,T]) for a fixed target orientation.
/// The normalizer is analytic: gamma0 is a free time minimizer from the origin,
/// so phi(0, gamma0(T)) equals its closed-form action.
inline std::pair<double, MinimizerResult> finite_horizon_value(const Configuration& x,
                                                               const WeakKamSpec& spec,
                                                               const HomotheticOrbit& orbit,
                                                               double horizon) {
    MinimizerResult solve =
        spec.solve(x, orbit_at(orbit, horizon), spec.phi_options);
    return {solve.phi - orbit_action(orbit, 0.0, horizon), std::move(solve)};
}

}   // namespace detail

/// Finite-horizon Busemann value u_a(x;T) = phi(x, gamma0(T)) - A(gamma0|[0,T]),
/// approximating Eq. u_a(x) = lim_t [phi(x, gamma0(t)) - phi(0, gamma0(t))].
/// u_a(0) = 0 by convention (the two terms coincide).
inline FieldSample busemann(const Configuration& x, const WeakKamSpec& spec) {
    spec.validate();
    if (detail::is_total_collision(x))
        return FieldSample{x, 0.0, MatrixXd::Zero(x.bodies(), x.dim()),
                           MatrixXd::Identity(x.dim(), x.dim()), 0.0};

    auto [value, solve] = detail::finite_horizon_value(x, spec, spec.orbit, spec.horizon);
    double error = 0.0;
    if (spec.richardson) {
        auto [far_value, far_solve] =
            detail::finite_horizon_value(x, spec, spec.orbit, 4.0 * spec.horizon);
        error = std::abs(far_value - value);
    }
    return FieldSample{x, value, detail::gradient_from_curve(solve.trajectory),
                       MatrixXd::Identity(x.dim(), x.dim()), error};
}

/// u_{theta,a}(x) = u_a(R_{theta^{-1}} x): the Busemann solution of the rotated
/// central configuration R_theta a.
inline FieldSample busemann_rotated(const Configuration& x, const MatrixXd& theta,
                                    const WeakKamSpec& spec) {
    FieldSample inner = busemann(rotate(x, theta.transpose()), spec);
    return FieldSample{x, inner.u, inner.gradient * theta.transpose(), theta,
                       inner.error_estimate};
}

namespace detail {

/// Rotations to scan in invariant mode, generating the subgroup from the spec.
/// One generator: its circle.  d = 2: the full circle.  Several generators in
/// d = 3 generate all of SO(3): Fibonacci-sphere axes x uniform angles.
inline std::vector<MatrixXd> rotation_scan(const WeakKamSpec& spec, Eigen::Index d) {
    std::vector<MatrixXd> grid;
    const GroupGenerators& gens = *spec.generators;
    if (gens.count() == 1 || d == 2) {
        const MatrixXd xi = unit_speed(gens[0]);
        const int n = spec.scan_points;
        for (int k = 0; k < n; ++k)
            grid.push_back(exp_skew((6.283185307179586 * k / n) * xi));
        return grid;
    }
    if (d == 3) {
        // axis-angle grid: Fibonacci sphere for axes, uniform angles, >= 200 points
        const int axes = std::max(25, spec.scan_points / 8);
        const int angles = 8;
        const double golden_angle = 2.399963229728653;
        for (int i = 0; i < axes; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / axes;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double azimuth = golden_angle * i;
            Eigen::Vector3d axis(r * std::cos(azimuth), r * std::sin(azimuth), z);
            MatrixXd xi = MatrixXd::Zero(3, 3);
            xi(2, 1) = axis[0];
            xi(1, 2) = -axis[0];
            xi(0, 2) = axis[1];
            xi(2, 0) = -axis[1];
            xi(1, 0) = axis[2];
            xi(0, 1) = -axis[2];
            for (int k = 0; k < angles; ++k)
                grid.push_back(exp_skew((6.283185307179586 * k / angles) * xi));
        }
        return grid;
    }
    throw std::invalid_argument("invariant_busemann: multi-generator scan needs d = 2 or 3");
}

}   // namespace detail

/// Rotation-invariant infimum u_hat_a(x) = inf_theta u_{theta,a}(x) over the
/// subgroup generated by spec.generators.  Coarse scan plus local polish:
/// golden-section on circles, Nelder-Mead in axis-angle coordinates for SO(3),
/// multistarted from the best scan points.
inline FieldSample invariant_busemann(const Configuration& x, const WeakKamSpec& spec) {
    spec.validate();
    if (spec.mode != WeakKamMode::invariant)
        throw std::invalid_argument("invariant_busemann: spec.mode must be invariant");
    if (detail::is_total_collision(x))
        return FieldSample{x, 0.0, MatrixXd::Zero(x.bodies(), x.dim()),
                           MatrixXd::Identity(x.dim(), x.dim()), 0.0};

    // scan without the richardson re-evaluation; apply it once at the winner
    WeakKamSpec scan_spec = spec;
    scan_spec.richardson = false;

    const Eigen::Index d = x.dim();
    const GroupGenerators& gens = *spec.generators;
    const bool circle = gens.count() == 1 || d == 2;

    double best = std::numeric_limits<double>::infinity();
    MatrixXd best_theta = MatrixXd::Identity(d, d);

    if (circle) {
        const MatrixXd xi = detail::unit_speed(gens[0]);
        auto value_at = [&](double s) {
            return busemann_rotated(x, exp_skew(s * xi), scan_spec).u;
        };
        const int n = spec.scan_points;
        const double step = 6.283185307179586 / n;
        double best_s = 0.0;
        for (int k = 0; k < n; ++k) {
            const double v = value_at(step * k);
            if (v < best) {
                best = v;
                best_s = step * k;
            }
        }
        const ScalarMinResult polish =
            golden_min(value_at, best_s - step, best_s + step, 1e-9);
        if (polish.value < best) {
            best = polish.value;
            best_s = polish.x;
        }
        best_theta = exp_skew(best_s * xi);
    } else {
        // multi-generator case: grid over the group, Nelder-Mead polish in the
        // Lie-algebra chart around each of the 5 best grid points
        std::vector<std::pair<double, MatrixXd>> scored;
        for (const MatrixXd& theta : detail::rotation_scan(spec, d)) {
            const double v = busemann_rotated(x, theta, scan_spec).u;
            scored.emplace_back(v, theta);
        }
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        const size_t starts = std::min<size_t>(5, scored.size());
        for (size_t s = 0; s < starts; ++s) {
            const MatrixXd base = scored[s].second;
            auto value_at = [&](const VectorXd& w) {
                MatrixXd omega = MatrixXd::Zero(3, 3);
                omega(2, 1) = w[0];
                omega(1, 2) = -w[0];
                omega(0, 2) = w[1];
                omega(2, 0) = -w[1];
                omega(1, 0) = w[2];
                omega(0, 1) = -w[2];
                return busemann_rotated(x, exp_skew(omega) * base, scan_spec).u;
            };
            NelderMeadOptions nm;
            nm.max_iters = 120;
            nm.xtol = 1e-7;
            const NelderMeadResult r = nelder_mead(value_at, VectorXd::Zero(3), 0.2, nm);
            if (r.value < best) {
                best = r.value;
                MatrixXd omega = MatrixXd::Zero(3, 3);
                omega(2, 1) = r.x[0];
                omega(1, 2) = -r.x[0];
                omega(0, 2) = r.x[1];
                omega(2, 0) = -r.x[1];
                omega(1, 0) = r.x[2];
                omega(0, 1) = -r.x[2];
                best_theta = exp_skew(omega) * base;
            }
        }
    }

    FieldSample winner = busemann_rotated(x, best_theta, spec);   // richardson here
    winner.u = std::min(winner.u, best);
    return winner;
}

/// Field evaluation dispatching on the spec mode (identity rotation when fixed).
inline FieldSample evaluate_field(const Configuration& x, const WeakKamSpec& spec) {
    if (spec.mode == WeakKamMode::invariant) return invariant_busemann(x, spec);
    return busemann(x, spec);
}

/// Approximate calibrating ray of the field from x: the phi-minimizer toward the
/// (optimally rotated) far orbit point, with the diagnostics that realize the
/// zero-angular-momentum and zero-momentum-map statements numerically.
inline CalibrationReport calibrating_curve(const Configuration& x, const WeakKamSpec& spec) {
    spec.validate();
    const double horizon = spec.horizon;

    MatrixXd theta = MatrixXd::Identity(x.dim(), x.dim());
    double u_x;
    if (spec.mode == WeakKamMode::invariant) {
        FieldSample best = invariant_busemann(x, spec);
        theta = best.optimal_rotation;
        u_x = best.u;
    } else {
        WeakKamSpec base = spec;
        base.richardson = false;
        u_x = busemann(x, base).u;
    }

    const HomotheticOrbit oriented = spec.orbit.rotated(theta);
    MinimizerResult solve = spec.solve(x, orbit_at(oriented, horizon), spec.phi_options);
    const Trajectory& curve = solve.trajectory;
    const double t_end = curve.times.back();

    // calibration defect |u(x) - u(alpha(t)) - A(alpha|[0,t])| at early fractions
    WeakKamSpec point_spec = spec;
    point_spec.richardson = false;
    const std::vector<double> cum_action = detail::cumulative_action(curve);
    double defect = 0.0;
    for (double fraction : {1.0 / 64.0, 1.0 / 16.0, 1.0 / 4.0, 1.0 / 2.0}) {
        const double t_sample =
            curve.times.front() + fraction * (t_end - curve.times.front());
        const size_t at = std::min<size_t>(
            static_cast<size_t>(std::lower_bound(curve.times.begin(), curve.times.end(),
                                                 t_sample) -
                                curve.times.begin()),
            curve.nodes.size() - 1);
        const double u_alpha =
            evaluate_field(Configuration(curve.masses, curve.nodes[at]), point_spec).u;
        defect = std::max(defect, std::abs(u_x - u_alpha - cum_action[at]));
    }

    // conserved-quantity diagnostics at interior nodes
    const GroupGenerators gens =
        spec.generators ? *spec.generators : GroupGenerators::full(x.dim());
    double max_c = 0.0;
    VectorXd mu_max = VectorXd::Zero(gens.count());
    for (size_t i = 1; i + 1 < curve.nodes.size(); ++i) {
        const Velocity v{detail::centered_velocity(curve, i)};
        const Configuration node(curve.masses, curve.nodes[i]);
        max_c = std::max(max_c, angular_momentum(node, v).norm());
        mu_max = mu_max.cwiseMax(momentum_map(node, v, gens).cwiseAbs());
    }

    // parabolic asymptotics |alpha(t) t^{-2/3} - c a| at dyadic checkpoints
    std::vector<double> asymptotic;
    const MatrixXd limit_shape = oriented.c * oriented.a.a.points;
    for (int j = 5; j >= 0; --j) {
        const double t_sample = t_end / std::pow(2.0, j);
        const size_t at = static_cast<size_t>(
            std::lower_bound(curve.times.begin(), curve.times.end(), t_sample) -
            curve.times.begin());
        const size_t idx = std::clamp<size_t>(at, 1, curve.nodes.size() - 1);
        asymptotic.push_back(mass_norm(
            curve.nodes[idx] * std::pow(curve.times[idx], -2.0 / 3.0) - limit_shape,
            curve.masses));
    }

    return CalibrationReport{curve,
                             defect,
                             max_c,
                             std::move(mu_max),
                             std::move(asymptotic),
                             center_of_mass_drift(curve),
                             u_x,
                             theta};
}

/// Two independent gradient estimators with their disagreement.
struct GradientEstimate {
    MatrixXd finite_difference;   // estimator (i): central differences of the field
    MatrixXd from_velocity;       // estimator (ii): -M alpha'(0) on the calibrating ray
    double disagreement;          // relative dual-norm difference
    bool suspect;                 // > 5%: possible non-differentiability point
};

/// d_x u by central finite differences (step 1e-4 scale) and by the calibrating-ray
/// velocity.  In invariant mode the optimal rotation is frozen first: by the
/// envelope theorem the differential of the infimum equals that of the active
/// branch wherever the minimizer is unique.
inline GradientEstimate gradient_u(const Configuration& x, const WeakKamSpec& spec) {
    spec.validate();
    WeakKamSpec branch = spec;
    branch.richardson = false;
    MatrixXd theta = MatrixXd::Identity(x.dim(), x.dim());
    if (spec.mode == WeakKamMode::invariant) {
        theta = invariant_busemann(x, spec).optimal_rotation;
        branch.mode = WeakKamMode::fixed;
        branch.orbit = spec.orbit.rotated(theta);
    }

    const double h = 1e-4 * std::max(config_scale(x.points), 1e-6);
    MatrixXd fd(x.bodies(), x.dim());
    for (Eigen::Index i = 0; i < x.bodies(); ++i)
        for (Eigen::Index c = 0; c < x.dim(); ++c) {
            MatrixXd plus = x.points, minus = x.points;
            plus(i, c) += h;
            minus(i, c) -= h;
            const double up = busemann(Configuration(x.masses, plus), branch).u;
            const double um = busemann(Configuration(x.masses, minus), branch).u;
            fd(i, c) = (up - um) / (2.0 * h);
        }

    const MinimizerResult solve =
        branch.solve(x, orbit_at(branch.orbit, branch.horizon), branch.phi_options);
    const MatrixXd from_velocity = detail::gradient_from_curve(solve.trajectory);

    const double denom = std::max(dual_norm(fd, x.masses), 1e-300);
    const double disagreement = dual_norm(fd - from_velocity, x.masses) / denom;
    return GradientEstimate{std::move(fd), from_velocity, disagreement,
                            disagreement > 0.05};
}

struct DominationReport {
    std::vector<double> slacks;   // phi(x,y) - (u(y) - u(x)) per pair
    double min_slack;
    int failures;                 // pairs skipped because a solve failed
};

/// Domination check u(y) - u(x) <= phi(x, y) over a list of pairs.
inline DominationReport domination_check(
    const std::vector<std::pair<Configuration, Configuration>>& pairs,
    const WeakKamSpec& spec) {
    spec.validate();
    WeakKamSpec eval = spec;
    eval.richardson = false;
    DominationReport report{{}, std::numeric_limits<double>::infinity(), 0};
    for (const auto& [from, to] : pairs) {
        try {
            const double u_from = evaluate_field(from, eval).u;
            const double u_to = evaluate_field(to, eval).u;
            const double phi_value = eval.solve(from, to, eval.phi_options).phi;
            const double slack = phi_value - (u_to - u_from);
            report.slacks.push_back(slack);
            report.min_slack = std::min(report.min_slack, slack);
        } catch (const std::exception&) {
            ++report.failures;
        }
    }
    if (report.slacks.empty()) report.min_slack = 0.0;
    return report;
}

struct EikonalReport {
    std::vector<double> residuals;   // relative | |Du|_*^2 - 2U | / 2U per kept point
    double max_residual;
    double median_residual;
    int excluded;                    // points flagged as non-differentiability suspects
};

/// Pointwise eikonal defect of the field using the finite-difference gradient;
/// suspect points (estimator disagreement > 5%) are excluded from the statistics.
inline EikonalReport eikonal_residual(const std::vector<Configuration>& points,
                                      const WeakKamSpec& spec) {
    spec.validate();
    EikonalReport report{{}, 0.0, 0.0, 0};
    for (const Configuration& x : points) {
        const GradientEstimate grad = gradient_u(x, spec);
        if (grad.suspect) {
            ++report.excluded;
            continue;
        }
        const double two_u = 2.0 * potential(x);
        const double norm2 = std::pow(dual_norm(grad.finite_difference, x.masses), 2);
        report.residuals.push_back(std::abs(norm2 - two_u) / two_u);
    }
    if (!report.residuals.empty()) {
        report.max_residual =
            *std::max_element(report.residuals.begin(), report.residuals.end());
        std::vector<double> sorted = report.residuals;
        std::sort(sorted.begin(), sorted.end());
        report.median_residual = sorted[sorted.size() / 2];
    }
    return report;
}

}   // namespace wkam

#endif
