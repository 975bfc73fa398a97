#ifndef WKAM_VERIFY_HPP
#define WKAM_VERIFY_HPP

#include <wkam/config.hpp>
#include <wkam/phi_cache.hpp>

#include <array>
#include <chrono>
#include <cstdarg>
#include <map>
#include <random>

namespace wkam {

/// Outcome of one acceptance criterion: every tolerance is pinned in the check
/// itself and echoed here next to the measured values.
struct CheckResult {
    int id = 0;
    std::string name;
    bool pass = false;
    double runtime_seconds = 0.0;
    json measured;
    json tolerances;
    std::string note;   // one-line summary; the failure reason when pass is false
};

struct SuiteReport {
    std::vector<CheckResult> checks;
    bool all_pass = false;
    double runtime_seconds = 0.0;
};

namespace verify_detail {

inline std::string format(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
}

/// Conservation sweep accumulated over every phi solve the suite performs.
/// Energy residuals are second order in the mesh, so maxima are kept per mesh
/// size: refinement-study solves on deliberately coarse meshes carry larger
/// discretization residuals than production-resolution solves.
struct ConservationLog {
    int solves = 0;
    int converged = 0;
    int degenerate = 0;   // trajectories too short for interior residuals
    std::map<int, double> energy_by_segments;
    double max_com_drift = 0.0;   // relative to the trajectory's largest scale

    void add(const MinimizerResult& result) {
        ++solves;
        if (!result.converged) return;
        ++converged;
        const Trajectory& traj = result.trajectory;
        if (traj.nodes.size() < 3) {
            ++degenerate;
            return;
        }
        const int segments = static_cast<int>(traj.nodes.size()) - 1;
        double& slot = energy_by_segments[segments];
        slot = std::max(slot, result.energy_residual);
        double scale = 0.0;
        for (const MatrixXd& node : traj.nodes) scale = std::max(scale, config_scale(node));
        if (scale > 0.0)
            max_com_drift =
                std::max(max_com_drift, center_of_mass_drift(traj) / scale);
    }
};

/// Shared state of one acceptance run: the config, the optional cache, and the
/// conservation log fed by every solve routed through phi_solve().
struct Context {
    ExperimentConfig config;
    std::shared_ptr<PhiCache> cache;
    ConservationLog conservation;

    MinimizerResult phi_solve(const Configuration& x, const Configuration& y,
                              const PhiOptions& opts) {
        MinimizerResult result =
            cache ? cache->get_or_compute(phi_cache_key(x, y, opts),
                                          [&] { return phi(x, y, opts); })
                  : phi(x, y, opts);
        conservation.add(result);
        return result;
    }

    /// Fixed-mode spec wired to phi_solve so the conservation log sees every solve.
    WeakKamSpec make_spec(const HomotheticOrbit& orbit) {
        WeakKamSpec spec(orbit);
        spec.horizon = config.horizon;
        spec.richardson = false;
        spec.phi_options = config.phi_options();
        spec.scan_points = config.scan_points;
        spec.phi_eval = [this](const Configuration& x, const Configuration& y,
                               const PhiOptions& opts) { return phi_solve(x, y, opts); };
        return spec;
    }

    /// Independent deterministic stream per criterion.
    std::mt19937_64 rng(int id) const {
        return std::mt19937_64(config.rng_seed + 1000003ull * static_cast<unsigned>(id));
    }
};

/// Two equal masses at +-1/sqrt(2) on the first axis: I = 1, U0 = 1/sqrt(2).
inline HomotheticOrbit analytic_two_body() {
    MatrixXd pts(2, 2);
    const double a = 1.0 / std::sqrt(2.0);
    pts << a, 0.0, -a, 0.0;
    Configuration config(Masses{1.0, 1.0}, pts);
    const double u0 = potential(config);
    return HomotheticOrbit({config, u0, centrality_residual(config), 1, {}});
}

/// Equilateral triangle of unit side in the first two axes: I = 1, U0 = 3.
inline HomotheticOrbit analytic_lagrange(Eigen::Index d) {
    MatrixXd pts = MatrixXd::Zero(3, d);
    const double rho = 1.0 / std::sqrt(3.0);
    for (int k = 0; k < 3; ++k) {
        const double angle = 2.0 * 3.141592653589793 * k / 3.0;
        pts(k, 0) = rho * std::cos(angle);
        pts(k, 1) = rho * std::sin(angle);
    }
    Configuration config(Masses{1.0, 1.0, 1.0}, pts);
    const double u0 = potential(config);
    return HomotheticOrbit({config, u0, centrality_residual(config), 1, {}});
}

/// Generic planar point near the orbit: rotated, per-body stretched, recentered.
inline Configuration generic_point(const HomotheticOrbit& orbit, std::mt19937_64& rng,
                                   double spread) {
    std::uniform_real_distribution<double> time_dist(0.6, 2.5);
    std::uniform_real_distribution<double> angle_dist(0.0, 6.283185307179586);
    std::uniform_real_distribution<double> stretch(1.0 - spread, 1.0 + spread);
    for (int attempt = 0; attempt < 256; ++attempt) {
        Configuration x = rotate(orbit_at(orbit, time_dist(rng)),
                                 exp_skew(angle_dist(rng) * GroupGenerators::plane(2, 0, 1)));
        for (Eigen::Index i = 0; i < x.bodies(); ++i) x.points.row(i) *= stretch(rng);
        recenter(x.points, x.masses);
        if (min_pair_distance(x.points) >= 0.2 && config_scale(x.points) >= 0.3)
            return Configuration(x.masses, x.points);
    }
    throw ConvergenceError("generic_point: sampler failed to find a clear configuration",
                           0.0);
}

/// Mesh for a production-accuracy solve.  The discrete zero-energy residual
/// concentrates at the smallest configuration on the path and scales like
/// (L / (K sqrt(scale)))^2, so the base mesh grows by sqrt(1/scale) when an
/// endpoint shrinks below the unit reference and by cbrt(T / 1e3) as the
/// horizon stretches the path; it never drops below the configured base.
inline int scaled_nodes(const ExperimentConfig& config, double min_endpoint_scale,
                        double horizon = 1e3) {
    const double stiffness =
        std::sqrt(1.0 / std::min(1.0, std::max(min_endpoint_scale, 1e-9)));
    const double length = std::cbrt(horizon / 1e3);
    return std::max(config.nodes,
                    static_cast<int>(std::lround(config.nodes * stiffness * length)));
}

inline double fit_growth_exponent(const Trajectory& curve) {
    std::vector<double> log_t, log_r;
    for (size_t i = 0; i < curve.nodes.size(); ++i) {
        const double t = curve.times[i];
        if (t < 0.05 * curve.times.back()) continue;
        log_t.push_back(std::log(t));
        log_r.push_back(std::log(mass_norm(curve.nodes[i], curve.masses)));
    }
    if (log_t.size() < 10)
        throw ConvergenceError("fit_growth_exponent: too few late-window samples", 0.0);
    double st = 0, sr = 0, stt = 0, str = 0;
    for (size_t i = 0; i < log_t.size(); ++i) {
        st += log_t[i];
        sr += log_r[i];
        stt += log_t[i] * log_t[i];
        str += log_t[i] * log_r[i];
    }
    const double n = static_cast<double>(log_t.size());
    return (n * str - st * sr) / (n * stt - st * st);
}

// --- criterion 1: minimal central configuration, three equal planar masses ---
inline CheckResult check_central_config(Context& ctx) {
    CheckResult r{1, "minimal central configuration (N=3 equal masses, d=2)",
                  false, 0.0, {}, {}, ""};
    const auto start = std::chrono::steady_clock::now();
    const MinimalConfiguration best = minimize_on_sphere(
        Masses{1.0, 1.0, 1.0}, 2, ctx.config.seeds, ctx.config.rng_seed);
    const double solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    double side_min = std::numeric_limits<double>::infinity(), side_max = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double side = (best.a.points.row(i) - best.a.points.row(j)).norm();
            side_min = std::min(side_min, side);
            side_max = std::max(side_max, side);
        }
    const double u0_error = std::abs(best.U0 - 3.0);
    const double side_spread = side_max - side_min;

    r.tolerances = {{"u0_error", 1e-8},
                    {"side_spread", 1e-6},
                    {"centrality_residual", 1e-8},
                    {"solve_seconds", 10.0}};
    r.measured = {{"U0", best.U0},
                  {"u0_error", u0_error},
                  {"side_spread", side_spread},
                  {"centrality_residual", best.lagrange_residual},
                  {"multistarts", best.multistart_count},
                  {"solve_seconds", solve_seconds}};
    r.pass = u0_error <= 1e-8 && side_spread <= 1e-6 &&
             best.lagrange_residual <= 1e-8 && solve_seconds <= 10.0;
    r.note = format("U0 err %.1e, side spread %.1e, residual %.1e, %.3f s",
                    u0_error, side_spread, best.lagrange_residual, solve_seconds);
    return r;
}

// --- criterion 2: homothetic ground truth for the two-body problem ---
inline CheckResult check_homothetic_ground_truth(Context& ctx) {
    CheckResult r{2, "homothetic orbit ground truth (two-body)", false, 0.0, {}, {}, ""};
    const MinimalConfiguration two = minimize_on_sphere(
        Masses{1.0, 1.0}, 2, ctx.config.seeds, ctx.config.rng_seed);
    const HomotheticOrbit orbit(two);
    const double u0_error = std::abs(two.U0 - 1.0 / std::sqrt(2.0));
    const double c_error = std::abs(orbit.c - std::cbrt(4.5 / std::sqrt(2.0)));

    double energy_rel = 0.0;
    for (double t : {0.25, 1.0, 4.0, 64.0, 512.0}) {
        const Velocity v = orbit_velocity(orbit, t);
        const double kinetic = 0.5 * mass_inner(v, v, orbit.a.a.masses);
        const double u = potential(orbit_at(orbit, t));
        energy_rel = std::max(energy_rel, std::abs(kinetic - u) / std::max(kinetic, u));
    }

    const double res100 = verify_solution(orbit, uniform_grid(1.0, 8.0, 100));
    const double res200 = verify_solution(orbit, uniform_grid(1.0, 8.0, 200));
    const double res400 = verify_solution(orbit, uniform_grid(1.0, 8.0, 400));
    const double ratio = std::min(res100 / res200, res200 / res400);

    double angmom = 0.0;
    for (double t : {0.5, 1.0, 4.0})
        angmom = std::max(angmom,
                          angular_momentum(orbit_at(orbit, t), orbit_velocity(orbit, t))
                              .norm());

    r.tolerances = {{"u0_error", 1e-9},
                    {"energy_rel", 1e-12},
                    {"newton_residual_K400", 1e-2},
                    {"residual_ratio_min", 3.5},
                    {"angular_momentum", 1e-10}};
    r.measured = {{"U0", two.U0},
                  {"u0_error", u0_error},
                  {"c", orbit.c},
                  {"c_error", c_error},
                  {"energy_rel", energy_rel},
                  {"newton_residual_K100", res100},
                  {"newton_residual_K200", res200},
                  {"newton_residual_K400", res400},
                  {"residual_ratio_min", ratio},
                  {"angular_momentum", angmom}};
    r.pass = u0_error <= 1e-9 && energy_rel <= 1e-12 && res400 <= 1e-2 &&
             ratio >= 3.5 && angmom <= 1e-10;
    r.note = format("energy %.1e, Newton res %.1e (ratio %.2f), |C| %.1e",
                    energy_rel, res400, ratio, angmom);
    return r;
}

// --- criterion 3: Mane potential golden value, backends, symmetry, triangle ---
inline CheckResult check_phi_golden(Context& ctx) {
    CheckResult r{3, "Mane potential phi: golden value and metric properties",
                  false, 0.0, {}, {}, ""};
    const HomotheticOrbit orbit = analytic_two_body();
    const Configuration from = orbit_at(orbit, 1.0);
    const Configuration to = orbit_at(orbit, 8.0);
    const double closed = orbit_action(orbit, 1.0, 8.0);   // (4c^2/3)(2 - 1)

    PhiOptions opts = ctx.config.phi_options();
    opts.nodes = 200;
    PhiOptions time_opts = opts;
    time_opts.backend = PhiBackend::time_domain;
    const MinimizerResult jac = ctx.phi_solve(from, to, opts);
    const MinimizerResult tim = ctx.phi_solve(from, to, time_opts);
    const double golden_rel = std::abs(jac.phi - closed) / closed;
    const double backend_gap = std::abs(jac.phi - tim.phi) / closed;

    // symmetry and triangle inequality on 50 random instances; the slack is
    // twice the converged relative action tolerance of a K=200 solve
    const double solver_tol = 1e-3;
    std::mt19937_64 rng = ctx.rng(3);
    double sym_worst = 0.0;
    double tri_worst = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 50; ++trial) {
        const Configuration x = generic_point(orbit, rng, 0.3);
        const Configuration y = generic_point(orbit, rng, 0.3);
        const Configuration z = generic_point(orbit, rng, 0.3);
        const double xy = ctx.phi_solve(x, y, opts).phi;
        const double yx = ctx.phi_solve(y, x, opts).phi;
        const double xz = ctx.phi_solve(x, z, opts).phi;
        const double yz = ctx.phi_solve(y, z, opts).phi;
        sym_worst = std::max(sym_worst, std::abs(xy - yx) / std::max(xy, 1e-12));
        tri_worst = std::max(tri_worst, (xz - (xy + yz)) / (xy + yz));
    }

    r.tolerances = {{"golden_rel", 5e-3},
                    {"backend_gap_rel", 1e-2},
                    {"symmetry_rel", 2.0 * solver_tol},
                    {"triangle_rel", 2.0 * solver_tol}};
    r.measured = {{"phi_jacobi", jac.phi},
                  {"phi_time_domain", tim.phi},
                  {"closed_form", closed},
                  {"golden_rel", golden_rel},
                  {"backend_gap_rel", backend_gap},
                  {"symmetry_rel_worst", sym_worst},
                  {"triangle_rel_worst", tri_worst},
                  {"instances", 50}};
    r.pass = golden_rel <= 5e-3 && backend_gap <= 1e-2 &&
             sym_worst <= 2.0 * solver_tol && tri_worst <= 2.0 * solver_tol;
    r.note = format("golden %.2e, backends %.2e, symmetry %.1e, triangle %.1e",
                    golden_rel, backend_gap, sym_worst, tri_worst);
    return r;
}

// --- criterion 4: Busemann values on the reference ray ---
inline CheckResult check_busemann_ray(Context& ctx) {
    CheckResult r{4, "Busemann values on the homothetic ray", false, 0.0, {}, {}, ""};
    const HomotheticOrbit orbit = analytic_two_body();

    const double coeff = 4.0 * orbit.c * orbit.c / 3.0;
    double rel_worst = 0.0;
    json values = json::array();
    for (double s : {0.25, 1.0, 4.0}) {
        const Configuration start = orbit_at(orbit, s);
        WeakKamSpec spec = ctx.make_spec(orbit);
        spec.horizon = 1e3;
        spec.phi_options.nodes = scaled_nodes(ctx.config, config_scale(start.points));
        const double exact = -coeff * std::cbrt(s);
        const double u_T = busemann(start, spec).u;
        rel_worst = std::max(rel_worst, std::abs(u_T - exact) / std::abs(exact));
        values.push_back({{"s", s}, {"exact", exact}, {"u_T", u_T}});
    }

    // On the ray the finite-horizon value already equals the limit for every
    // T > s (the ray calibrates itself), so no horizon trend exists there: any
    // T-dependence is mesh noise.  The T -> 4T defect decrease is measured off
    // the ray, where u(x; T) genuinely decreases toward u(x).  The limit has no
    // closed form, but the defect trend is visible in the decrements: the tail
    // behaves like T^(-1/3), so each T -> 4T decrement shrinks by about
    // 4^(-1/3) = 0.63.
    std::mt19937_64 rng = ctx.rng(4);
    const Configuration x = generic_point(orbit, rng, 0.25);
    std::array<double, 3> u_chain{};
    const std::array<double, 3> horizons = {{250.0, 1e3, 4e3}};
    for (size_t j = 0; j < horizons.size(); ++j) {
        WeakKamSpec chain_spec = ctx.make_spec(orbit);
        chain_spec.horizon = horizons[j];
        // the length scaling keeps discretization error uniform across the
        // chain, so the decrements isolate the horizon effect
        chain_spec.phi_options.nodes =
            scaled_nodes(ctx.config, config_scale(x.points), horizons[j]);
        u_chain[j] = busemann(x, chain_spec).u;
    }
    const double drop1 = u_chain[0] - u_chain[1];
    const double drop2 = u_chain[1] - u_chain[2];

    r.tolerances = {{"rel_error", 1e-2},
                    {"offray_drop_min", 1e-3},
                    {"offray_drop_ratio_max", 0.8}};
    r.measured = {{"values", values},
                  {"rel_error_worst", rel_worst},
                  {"horizon", 1e3},
                  {"offray_horizons", horizons},
                  {"offray_u", u_chain},
                  {"offray_drops", {drop1, drop2}},
                  {"offray_drop_ratio", drop2 / drop1}};
    r.pass = rel_worst <= 1e-2 && drop1 >= 1e-3 && drop2 >= 1e-3 && drop2 <= 0.8 * drop1;
    r.note = format("on-ray rel err %.2e; off-ray defect drops %.3f -> %.3f under T -> 4T",
                    rel_worst, drop1, drop2);
    return r;
}

// --- criterion 5: eikonal identity |Du|_*^2 = 2U at generic points ---
inline CheckResult check_eikonal(Context& ctx) {
    CheckResult r{5, "eikonal identity at generic points", false, 0.0, {}, {}, ""};
    const HomotheticOrbit orbit = analytic_two_body();
    std::mt19937_64 rng = ctx.rng(5);
    std::vector<Configuration> points;
    for (int i = 0; i < 20; ++i) points.push_back(generic_point(orbit, rng, 0.25));

    const std::array<std::pair<double, int>, 3> levels = {{
        {ctx.config.horizon / 16.0, std::max(16, ctx.config.nodes / 4)},
        {ctx.config.horizon / 4.0, std::max(16, ctx.config.nodes / 2)},
        {ctx.config.horizon, ctx.config.nodes},
    }};
    std::array<double, 3> medians{}, maxima{};
    std::array<int, 3> excluded{};
    for (size_t j = 0; j < levels.size(); ++j) {
        WeakKamSpec spec = ctx.make_spec(orbit);
        spec.horizon = levels[j].first;
        spec.phi_options.nodes = levels[j].second;
        const EikonalReport report = eikonal_residual(points, spec);
        medians[j] = report.median_residual;
        maxima[j] = report.max_residual;
        excluded[j] = report.excluded;
    }
    const int kept = static_cast<int>(points.size()) - excluded[2];

    r.tolerances = {{"median_finest", 0.05},
                    {"levels_decreasing", true},
                    {"kept_points_min", 10}};
    r.measured = {{"medians", medians},
                  {"maxima", maxima},
                  {"excluded", excluded},
                  {"kept_points", kept},
                  {"levels", {{"T", {levels[0].first, levels[1].first, levels[2].first}},
                              {"K", {levels[0].second, levels[1].second, levels[2].second}}}}};
    const bool decreasing = medians[1] < medians[0] && medians[2] < medians[1];
    r.pass = medians[2] <= 0.05 && decreasing && kept >= 10;
    r.note = format("medians %.2e -> %.2e -> %.2e (%d kept)", medians[0], medians[1],
                    medians[2], kept);
    if (!r.pass && medians[2] > 0.05)
        r.note += format("; finest median %.2e exceeds 0.05", medians[2]);
    return r;
}

// --- criterion 6: domination u(y) - u(x) <= phi(x,y) ---
inline CheckResult check_domination(Context& ctx) {
    CheckResult r{6, "domination by the Mane potential", false, 0.0, {}, {}, ""};
    const HomotheticOrbit orbit = analytic_two_body();
    WeakKamSpec spec = ctx.make_spec(orbit);
    std::mt19937_64 rng = ctx.rng(6);

    auto u_at = [&](const Configuration& p) {
        WeakKamSpec point_spec = spec;
        point_spec.phi_options.nodes = scaled_nodes(ctx.config, config_scale(p.points));
        return busemann(p, point_spec).u;
    };
    auto phi_between = [&](const Configuration& p, const Configuration& q) {
        PhiOptions opts = spec.phi_options;
        opts.nodes = scaled_nodes(
            ctx.config, std::min(config_scale(p.points), config_scale(q.points)));
        return ctx.phi_solve(p, q, opts).phi;
    };

    double worst = std::numeric_limits<double>::infinity();
    int failures = 0;
    for (int pair = 0; pair < 100; ++pair) {
        const Configuration x = generic_point(orbit, rng, 0.35);
        const Configuration y = generic_point(orbit, rng, 0.35);
        try {
            const double u_x = u_at(x);
            const double u_y = u_at(y);
            const double phi_xy = phi_between(x, y);
            const double scale = std::max({1.0, std::abs(u_x), std::abs(u_y)});
            worst = std::min(worst, (phi_xy - (u_y - u_x)) / scale);
        } catch (const std::exception&) {
            ++failures;
        }
    }

    // calibration along the ray: equality within 1% of |u|
    double ray_worst = 0.0;
    const std::array<std::pair<double, double>, 4> ray_pairs = {
        {{1.0, 0.25}, {2.0, 0.5}, {4.0, 1.0}, {8.0, 2.0}}};
    for (auto [s_from, s_to] : ray_pairs) {
        const Configuration from = orbit_at(orbit, s_from);
        const Configuration to = orbit_at(orbit, s_to);
        const double u_from = u_at(from);
        const double u_to = u_at(to);
        const double phi_pair = phi_between(from, to);
        const double slack = phi_pair - (u_to - u_from);
        ray_worst = std::max(ray_worst,
                             std::abs(slack) / std::max(std::abs(u_from), std::abs(u_to)));
    }

    r.tolerances = {{"min_slack_rel", -1e-3}, {"ray_slack_rel", 1e-2}, {"failures", 0}};
    r.measured = {{"min_slack_rel", worst},
                  {"ray_slack_rel_worst", ray_worst},
                  {"pairs", 100},
                  {"failures", failures}};
    r.pass = worst >= -1e-3 && ray_worst <= 1e-2 && failures == 0;
    r.note = format("min slack %.2e, ray slack %.2e, %d failures", worst, ray_worst,
                    failures);
    return r;
}

// --- criterion 7: calibrating curves of the invariant field lose angular momentum ---
inline CheckResult check_zero_angular_momentum(Context& ctx) {
    CheckResult r{7, "zero angular momentum for rotation-invariant solutions",
                  false, 0.0, {}, {}, ""};
    const HomotheticOrbit orbit = analytic_lagrange(2);
    Configuration x = rotate(orbit_at(orbit, 2.0),
                             exp_skew(0.8 * GroupGenerators::plane(2, 0, 1)));
    x.points.row(0) *= 1.20;
    x.points.row(1) *= 0.90;
    x.points.row(2) *= 1.05;
    recenter(x.points, x.masses);

    WeakKamSpec inv = ctx.make_spec(orbit);
    inv.mode = WeakKamMode::invariant;
    inv.generators = GroupGenerators::full(2);
    WeakKamSpec coarse_spec = inv, fine_spec = inv;
    coarse_spec.phi_options.nodes = 200;
    fine_spec.phi_options.nodes = 400;

    const CalibrationReport coarse = calibrating_curve(x, coarse_spec);
    const CalibrationReport fine = calibrating_curve(x, fine_spec);
    const double ratio = coarse.max_angmom / fine.max_angmom;

    // directional derivative of u_hat along the rotation orbit, two estimates:
    // central differences of the field and the momentum of the starting velocity
    const double h = 1e-3;
    const MatrixXd gen = GroupGenerators::plane(2, 0, 1);
    const double up = invariant_busemann(rotate(x, exp_skew(h * gen)), fine_spec).u;
    const double um = invariant_busemann(rotate(x, exp_skew(-h * gen)), fine_spec).u;
    const double orbit_derivative = std::abs(up - um) / (2.0 * h);
    const Velocity v0{detail::initial_velocity(fine.curve)};
    const double momentum_start =
        std::abs(momentum_map(x, v0, GroupGenerators::full(2))[0]);

    r.tolerances = {{"max_angmom_K400", 1e-3},
                    {"refinement_ratio_min", 2.0},
                    {"orbit_derivative", 1e-3},
                    {"momentum_start", 1e-3}};
    r.measured = {{"max_angmom_K200", coarse.max_angmom},
                  {"max_angmom_K400", fine.max_angmom},
                  {"refinement_ratio", ratio},
                  {"orbit_derivative", orbit_derivative},
                  {"momentum_start", momentum_start},
                  {"calibration_defect", fine.calibration_defect},
                  {"u", fine.u_value}};
    r.pass = fine.max_angmom <= 1e-3 && ratio >= 2.0 && orbit_derivative <= 1e-3 &&
             momentum_start <= 1e-3;
    r.note = format("|C| %.1e -> %.1e (ratio %.2f), d/dtheta %.1e",
                    coarse.max_angmom, fine.max_angmom, ratio, orbit_derivative);
    return r;
}

// --- criterion 8: subgroup momentum map vanishes, transverse components persist ---
inline CheckResult check_subgroup_momentum(Context& ctx) {
    CheckResult r{8, "z-axis momentum map vanishes for subgroup-invariant fields",
                  false, 0.0, {}, {}, ""};
    const HomotheticOrbit orbit = analytic_lagrange(3);

    WeakKamSpec spec = ctx.make_spec(orbit);
    spec.mode = WeakKamMode::invariant;
    spec.generators = GroupGenerators(3, {GroupGenerators::plane(3, 0, 1)});
    WeakKamSpec coarse_spec = spec, fine_spec = spec;
    coarse_spec.phi_options.nodes = 200;
    fine_spec.phi_options.nodes = 400;

    // deliberately misaligned start: turned inside the subgroup, tilted out of it
    const MatrixXd turn = exp_skew(1.10 * GroupGenerators::plane(3, 0, 1));
    const MatrixXd tilt = exp_skew(0.35 * GroupGenerators::plane(3, 1, 2));
    Configuration x = rotate(rotate(orbit_at(orbit, 2.0), turn), tilt);
    x.points.row(0) *= 1.15;
    x.points.row(2) *= 0.90;
    recenter(x.points, x.masses);

    const CalibrationReport coarse = calibrating_curve(x, coarse_spec);
    const CalibrationReport fine = calibrating_curve(x, fine_spec);
    const double mu_coarse = coarse.momentum_components[0];
    const double mu_fine = fine.momentum_components[0];
    const double ratio = mu_coarse / mu_fine;

    // transverse momentum stays order one: only the z-component is optimized away
    const GroupGenerators so3 = GroupGenerators::so3();
    double transverse = 0.0;
    const Trajectory& curve = fine.curve;
    for (size_t i = 1; i + 1 < curve.nodes.size(); ++i) {
        const Velocity v{detail::centered_velocity(curve, i)};
        const VectorXd mu = momentum_map(Configuration(curve.masses, curve.nodes[i]), v, so3);
        transverse = std::max(transverse, mu.head(2).cwiseAbs().maxCoeff());
    }

    r.tolerances = {{"mu_z_K400", 1e-3},
                    {"refinement_ratio_min", 2.0},
                    {"transverse_min", 0.1}};
    r.measured = {{"mu_z_K200", mu_coarse},
                  {"mu_z_K400", mu_fine},
                  {"refinement_ratio", ratio},
                  {"transverse_max", transverse},
                  {"max_angmom", fine.max_angmom}};
    r.pass = mu_fine <= 1e-3 && ratio >= 2.0 && transverse >= 0.1;
    r.note = format("mu_z %.1e -> %.1e (ratio %.2f), transverse %.2f", mu_coarse,
                    mu_fine, ratio, transverse);
    return r;
}

// --- criterion 9: parabolic growth exponent 2/3 and shape convergence ---
inline CheckResult check_parabolic_asymptotics(Context& ctx) {
    CheckResult r{9, "parabolic asymptotics of calibrating curves", false, 0.0, {}, {}, ""};
    const HomotheticOrbit orbit = analytic_two_body();
    WeakKamSpec spec = ctx.make_spec(orbit);
    std::mt19937_64 rng = ctx.rng(9);
    const Configuration x = generic_point(orbit, rng, 0.3);

    const CalibrationReport report = calibrating_curve(x, spec);
    const double slope = fit_growth_exponent(report.curve);

    bool decreasing = report.asymptotic_error.size() >= 4;
    for (size_t k = 1; k < report.asymptotic_error.size(); ++k)
        decreasing = decreasing &&
                     report.asymptotic_error[k] <= report.asymptotic_error[k - 1] + 1e-12;

    r.tolerances = {{"slope_error", 0.01}, {"dyadic_decreasing", true}};
    r.measured = {{"slope", slope},
                  {"slope_error", std::abs(slope - 2.0 / 3.0)},
                  {"asymptotic_error", report.asymptotic_error},
                  {"final_shape_error", report.asymptotic_error.empty()
                                            ? 0.0
                                            : report.asymptotic_error.back()}};
    r.pass = std::abs(slope - 2.0 / 3.0) <= 0.01 && decreasing;
    r.note = format("exponent %.4f, shape error %.2e at the last dyadic time", slope,
                    report.asymptotic_error.empty() ? 0.0
                                                    : report.asymptotic_error.back());
    return r;
}

// --- criterion 10: conservation along every converged minimizer of the run ---
inline CheckResult check_conservation(Context& ctx) {
    CheckResult r{10, "conservation along all converged phi results", false, 0.0, {}, {}, ""};
    const ConservationLog& log = ctx.conservation;

    // The energy residual is a second-order mesh quantity: on a K-segment grid
    // the centered-difference residual of the exact geodesic is already
    // O((L/K)^2).  The 1e-3 bound is enforced at production resolution
    // (config.nodes and finer); the coarser meshes that the refinement-study
    // criteria deliberately solve on get the mesh-consistent ceiling
    // 1e-3 * (config.nodes / K)^2.
    const int production = ctx.config.nodes;
    double production_max = 0.0, study_max = 0.0, study_ceiling_frac = 0.0;
    json by_mesh = json::object();
    for (const auto& [segments, residual] : log.energy_by_segments) {
        by_mesh[std::to_string(segments)] = residual;
        if (segments >= production) {
            production_max = std::max(production_max, residual);
        } else {
            study_max = std::max(study_max, residual);
            const double ratio = static_cast<double>(production) / segments;
            study_ceiling_frac = std::max(study_ceiling_frac, residual / (1e-3 * ratio * ratio));
        }
    }

    r.tolerances = {{"energy_residual_production", 1e-3},
                    {"energy_residual_study", "1e-3 * (production_nodes / K)^2"},
                    {"com_drift_rel", 1e-8}};
    r.measured = {{"solves", log.solves},
                  {"converged", log.converged},
                  {"degenerate", log.degenerate},
                  {"production_nodes", production},
                  {"max_energy_residual_production", production_max},
                  {"max_energy_residual_study", study_max},
                  {"study_ceiling_fraction", study_ceiling_frac},
                  {"energy_residual_by_mesh", by_mesh},
                  {"max_com_drift_rel", log.max_com_drift}};
    r.pass = log.converged >= 1 && production_max <= 1e-3 && study_ceiling_frac <= 1.0 &&
             log.max_com_drift <= 1e-8;
    r.note = format("%d solves, energy %.1e at production K, %.1e on study meshes, com drift %.1e",
                    log.converged, production_max, study_max, log.max_com_drift);
    return r;
}

using CheckFn = CheckResult (*)(Context&);

struct NamedCheck {
    int id;
    const char* name;
    CheckFn fn;
};

inline const std::array<NamedCheck, 10>& all_checks() {
    static const std::array<NamedCheck, 10> checks = {{
        {1, "minimal central configuration (N=3 equal masses, d=2)", check_central_config},
        {2, "homothetic orbit ground truth (two-body)", check_homothetic_ground_truth},
        {3, "Mane potential phi: golden value and metric properties", check_phi_golden},
        {4, "Busemann values on the homothetic ray", check_busemann_ray},
        {5, "eikonal identity at generic points", check_eikonal},
        {6, "domination by the Mane potential", check_domination},
        {7, "zero angular momentum for rotation-invariant solutions",
         check_zero_angular_momentum},
        {8, "z-axis momentum map vanishes for subgroup-invariant fields",
         check_subgroup_momentum},
        {9, "parabolic asymptotics of calibrating curves", check_parabolic_asymptotics},
        {10, "conservation along all converged phi results", check_conservation},
    }};
    return checks;
}

}   // namespace verify_detail

inline json to_json(const CheckResult& r) {
    return {{"id", r.id},           {"name", r.name},
            {"pass", r.pass},       {"runtime_seconds", r.runtime_seconds},
            {"measured", r.measured}, {"tolerances", r.tolerances},
            {"note", r.note}};
}

inline json to_json(const SuiteReport& report) {
    json checks = json::array();
    for (const CheckResult& r : report.checks) checks.push_back(to_json(r));
    return {{"criteria", checks},
            {"all_pass", report.all_pass},
            {"runtime_seconds", report.runtime_seconds}};
}

/// Run the ten acceptance criteria in order, one line per criterion on `progress`.
/// Check failures are collected, not fatal; an exception inside a check marks it
/// failed with the reason and the suite moves on.
inline SuiteReport run_acceptance(const ExperimentConfig& config,
                                  std::shared_ptr<PhiCache> cache = nullptr,
                                  std::ostream* progress = nullptr) {
    config.validate();
    verify_detail::Context ctx{config, std::move(cache), {}};
    SuiteReport report;
    report.all_pass = true;
    const auto suite_start = std::chrono::steady_clock::now();

    for (const verify_detail::NamedCheck& check : verify_detail::all_checks()) {
        const auto start = std::chrono::steady_clock::now();
        CheckResult result;
        try {
            result = check.fn(ctx);
        } catch (const std::exception& e) {
            result = CheckResult{check.id, check.name, false, 0.0, {}, {}, e.what()};
        }
        result.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.all_pass = report.all_pass && result.pass;
        if (progress)
            *progress << (result.pass ? "[PASS]" : "[FAIL]") << " criterion "
                      << result.id << ": " << result.name << " -- " << result.note
                      << verify_detail::format(" (%.2f s)\n", result.runtime_seconds);
        report.checks.push_back(std::move(result));
    }
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start)
            .count();
    return report;
}

}   // namespace wkam

#endif
