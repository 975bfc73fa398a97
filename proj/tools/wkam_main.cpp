#include <wkam/verify.hpp>

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

using wkam::Configuration;
using wkam::ExperimentConfig;
using wkam::FieldSample;
using wkam::HomotheticOrbit;
using wkam::json;
using wkam::MatrixXd;
using wkam::MinimalConfiguration;
using wkam::MinimizerResult;
using wkam::PhiCache;
using wkam::PhiOptions;
using wkam::WeakKamMode;
using wkam::WeakKamSpec;

struct GlobalArgs {
    std::string config_path;
    std::string cache_dir;      // empty disables the cache
    std::string out_path;       // empty writes to stdout
    std::string central_path;   // precomputed central configuration (JSON)
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;
};

ExperimentConfig load_config(const GlobalArgs& g) {
    ExperimentConfig cfg;
    if (!g.config_path.empty()) cfg = wkam::config_from_json(wkam::read_json_file(g.config_path));
    cfg.validate();
    if (g.seed_given) cfg.rng_seed = g.seed;
    return cfg;
}

std::shared_ptr<PhiCache> make_cache(const GlobalArgs& g) {
    if (g.cache_dir.empty()) return nullptr;
    return std::make_shared<PhiCache>(g.cache_dir);
}

/// Central configuration from --central if given, otherwise solved from the config.
MinimalConfiguration central_for(const ExperimentConfig& cfg, const GlobalArgs& g) {
    if (!g.central_path.empty()) {
        MinimalConfiguration a =
            wkam::minimal_configuration_from_json(wkam::read_json_file(g.central_path));
        if (!(a.a.masses == cfg.mass_system()))
            throw wkam::SerializationError("central configuration masses disagree with the config");
        if (a.a.dim() != cfg.d)
            throw wkam::SerializationError("central configuration dimension disagrees with the config");
        return a;
    }
    return wkam::minimize_on_sphere(cfg.mass_system(), cfg.d, cfg.seeds, cfg.rng_seed);
}

WeakKamSpec spec_for(const ExperimentConfig& cfg, const MinimalConfiguration& a,
                     std::shared_ptr<PhiCache> cache) {
    WeakKamSpec spec = cfg.weak_kam_spec(HomotheticOrbit(a));
    if (cache) spec.phi_eval = wkam::cached_phi(std::move(cache));
    return spec;
}

Configuration point_for(const std::string& path, const WeakKamSpec& spec) {
    Configuration x = wkam::configuration_from_json(wkam::read_json_file(path));
    if (!(x.masses == spec.orbit.a.a.masses))
        throw wkam::SerializationError("point masses disagree with the central configuration");
    if (x.dim() != spec.orbit.a.a.dim())
        throw wkam::SerializationError("point dimension disagrees with the central configuration");
    return x;
}

void emit(const json& j, const GlobalArgs& g) {
    if (g.out_path.empty())
        std::cout << j.dump(2) << "\n";
    else
        wkam::write_json_file(g.out_path, j);
}

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_safe(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n') c = ';';
    return s;
}

/// Rotation parameter of R: the signed planar angle for d = 2, the principal
/// angle acos((tr R - (d-2))/2) otherwise.
double rotation_angle(const MatrixXd& R) {
    if (R.rows() == 2) return std::atan2(R(1, 0), R(0, 0));
    const double c = 0.5 * (R.trace() - (static_cast<double>(R.rows()) - 2.0));
    return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Generator plane for --rotation: the config's single plane, or (0,1) when d = 2.
MatrixXd rotation_plane(const ExperimentConfig& cfg) {
    if (cfg.generator_planes.size() == 1)
        return wkam::GroupGenerators::plane(cfg.d, cfg.generator_planes[0].first,
                                            cfg.generator_planes[0].second);
    if (cfg.d == 2) return wkam::GroupGenerators::plane(2, 0, 1);
    throw wkam::SerializationError(
        "--rotation needs d = 2 or exactly one generator plane in the config");
}

void run_indexed(size_t count, int threads, const std::function<void(size_t)>& work) {
    if (threads <= 1) {
        for (size_t i = 0; i < count; ++i) work(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const int n = std::min<int>(threads, static_cast<int>(count));
    pool.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) work(i);
        });
    for (std::thread& t : pool) t.join();
}

}   // namespace

int main(int argc, char** argv) {
    CLI::App app{"weak KAM toolkit for the Newtonian N-body problem"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "experiment configuration (JSON)");
    app.add_option("--cache-dir", g.cache_dir, "phi cache directory; empty disables")
        ->envname("WKAM_CACHE_DIR");
    app.add_option("--seed", g.seed, "override the configured rng seed")
        ->each([&g](const std::string&) { g.seed_given = true; });
    app.add_option("--threads", g.threads, "worker threads for grid sampling")
        ->check(CLI::Range(1, 256));
    app.add_option("--out", g.out_path, "output file; default stdout");

    int rc = 0;

    CLI::App* central_cmd =
        app.add_subcommand("central-config", "minimal central configuration on I = 1");
    central_cmd->fallthrough();
    central_cmd->callback([&] {
        const ExperimentConfig cfg = load_config(g);
        emit(wkam::to_json(wkam::minimize_on_sphere(cfg.mass_system(), cfg.d, cfg.seeds,
                                                    cfg.rng_seed)),
             g);
    });

    CLI::App* homothetic_cmd =
        app.add_subcommand("homothetic", "parabolic homothetic orbit gamma0(t) = c t^{2/3} a");
    homothetic_cmd->fallthrough();
    double hom_t0 = 1.0, hom_t1 = 8.0;
    int hom_segments = 32;
    homothetic_cmd->add_option("--central", g.central_path, "central configuration (JSON)")
        ->check(CLI::ExistingFile);
    homothetic_cmd->add_option("--t0", hom_t0, "first sample time")->check(CLI::PositiveNumber);
    homothetic_cmd->add_option("--t1", hom_t1, "last sample time")->check(CLI::PositiveNumber);
    homothetic_cmd->add_option("--segments", hom_segments, "grid segments")
        ->check(CLI::Range(2, 1 << 20));
    homothetic_cmd->callback([&] {
        const ExperimentConfig cfg = load_config(g);
        if (!(hom_t0 < hom_t1))
            throw wkam::SerializationError("homothetic: need --t0 < --t1");
        const HomotheticOrbit orbit(central_for(cfg, g));
        const std::vector<double> grid = wkam::uniform_grid(hom_t0, hom_t1, hom_segments);
        json out;
        out["central"] = wkam::to_json(orbit.a);
        out["U0"] = orbit.U0;
        out["c"] = orbit.c;
        out["action"] = wkam::orbit_action(orbit, hom_t0, hom_t1);
        out["newton_residual"] = wkam::verify_solution(orbit, grid);
        out["orbit"] = wkam::to_json(wkam::sample_orbit(orbit, grid));
        emit(out, g);
    });

    CLI::App* phi_cmd =
        app.add_subcommand("phi", "Mane critical action potential between two configurations");
    phi_cmd->fallthrough();
    std::string phi_from, phi_to, phi_backend;
    int phi_nodes = 0;
    phi_cmd->add_option("--from", phi_from, "start configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    phi_cmd->add_option("--to", phi_to, "end configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    phi_cmd->add_option("--nodes", phi_nodes, "mesh segments; default from config")
        ->check(CLI::Range(16, 1 << 20));
    phi_cmd->add_option("--backend", phi_backend, "jacobi | time | both; default from config")
        ->check(CLI::IsMember({"jacobi", "time", "time_domain", "both"}));
    phi_cmd->callback([&] {
        const ExperimentConfig cfg = load_config(g);
        const Configuration x = wkam::configuration_from_json(wkam::read_json_file(phi_from));
        const Configuration y = wkam::configuration_from_json(wkam::read_json_file(phi_to));
        PhiOptions opts = cfg.phi_options();
        if (phi_nodes > 0) opts.nodes = phi_nodes;
        auto cache = make_cache(g);
        auto solve = [&](PhiOptions o) {
            if (cache) return wkam::cached_phi(cache)(x, y, o);
            return wkam::phi(x, y, o);
        };
        if (phi_backend == "both") {
            PhiOptions jac = opts, tim = opts;
            jac.backend = wkam::PhiBackend::jacobi;
            tim.backend = wkam::PhiBackend::time_domain;
            const MinimizerResult a = solve(jac);
            const MinimizerResult b = solve(tim);
            const double gap = std::abs(a.phi - b.phi) /
                               std::max({std::abs(a.phi), std::abs(b.phi), 1e-12});
            emit(json{{"jacobi", wkam::to_json(a)},
                      {"time_domain", wkam::to_json(b)},
                      {"relative_gap", gap}},
                 g);
        } else {
            if (!phi_backend.empty()) opts.backend = wkam::backend_from_name(phi_backend);
            emit(wkam::to_json(solve(opts)), g);
        }
    });

    CLI::App* busemann_cmd =
        app.add_subcommand("busemann", "Busemann weak KAM solution at a point");
    busemann_cmd->fallthrough();
    std::string busemann_point;
    double busemann_horizon = 0.0, busemann_rotation = 0.0;
    busemann_cmd->add_option("--point", busemann_point, "configuration to evaluate at (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    busemann_cmd->add_option("--central", g.central_path, "central configuration (JSON)")
        ->check(CLI::ExistingFile);
    busemann_cmd->add_option("--horizon", busemann_horizon, "override the configured horizon T")
        ->check(CLI::PositiveNumber);
    CLI::Option* rotation_opt = busemann_cmd->add_option(
        "--rotation", busemann_rotation, "evaluate the branch rotated by this angle (radians)");
    busemann_cmd->callback([&] {
        ExperimentConfig cfg = load_config(g);
        if (busemann_horizon > 0.0) cfg.horizon = busemann_horizon;
        const WeakKamSpec spec = spec_for(cfg, central_for(cfg, g), make_cache(g));
        const Configuration x = point_for(busemann_point, spec);
        const FieldSample sample = [&]() -> FieldSample {
            if (rotation_opt->count() > 0) {
                const MatrixXd theta = wkam::exp_skew(busemann_rotation * rotation_plane(cfg));
                return wkam::busemann_rotated(x, theta, spec);
            }
            if (cfg.mode == WeakKamMode::rotated)
                throw wkam::SerializationError("busemann: mode \"rotated\" needs --rotation");
            return wkam::evaluate_field(x, spec);
        }();
        emit(wkam::to_json(sample), g);
    });

    CLI::App* calibrate_cmd = app.add_subcommand(
        "calibrate", "calibrating curve from a point with conservation diagnostics");
    calibrate_cmd->fallthrough();
    std::string calibrate_point;
    double calibrate_horizon = 0.0;
    calibrate_cmd->add_option("--point", calibrate_point, "configuration to calibrate from (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    calibrate_cmd->add_option("--central", g.central_path, "central configuration (JSON)")
        ->check(CLI::ExistingFile);
    calibrate_cmd->add_option("--horizon", calibrate_horizon, "override the configured horizon T")
        ->check(CLI::PositiveNumber);
    calibrate_cmd->callback([&] {
        ExperimentConfig cfg = load_config(g);
        if (calibrate_horizon > 0.0) cfg.horizon = calibrate_horizon;
        if (cfg.mode == WeakKamMode::rotated)
            throw wkam::SerializationError("calibrate: mode must be fixed or invariant");
        const WeakKamSpec spec = spec_for(cfg, central_for(cfg, g), make_cache(g));
        const Configuration x = point_for(calibrate_point, spec);
        emit(wkam::to_json(wkam::calibrating_curve(x, spec)), g);
    });

    CLI::App* sample_cmd =
        app.add_subcommand("sample-field", "evaluate the field on a grid, one CSV row per point");
    sample_cmd->fallthrough();
    std::string sample_grid;
    sample_cmd->add_option("--grid", sample_grid, "grid file {\"points\": [configuration, ...]}")
        ->required()
        ->check(CLI::ExistingFile);
    sample_cmd->add_option("--central", g.central_path, "central configuration (JSON)")
        ->check(CLI::ExistingFile);
    sample_cmd->callback([&] {
        const ExperimentConfig cfg = load_config(g);
        if (cfg.mode == WeakKamMode::rotated)
            throw wkam::SerializationError("sample-field: mode must be fixed or invariant");
        const std::vector<Configuration> points =
            wkam::grid_from_json(wkam::read_json_file(sample_grid));
        if (!(points[0].masses == cfg.mass_system()))
            throw wkam::SerializationError("sample-field: grid masses disagree with the config");
        for (const Configuration& p : points)
            if (p.dim() != cfg.d)
                throw wkam::SerializationError(
                    "sample-field: grid dimension disagrees with the config");
        const WeakKamSpec spec = spec_for(cfg, central_for(cfg, g), make_cache(g));

        std::string header = "index";
        for (Eigen::Index r = 0; r < points[0].bodies(); ++r)
            for (Eigen::Index c = 0; c < points[0].dim(); ++c)
                header += ",x" + std::to_string(r) + "_" + std::to_string(c);
        header += ",u,grad_dual_norm,eikonal_residual,rotation_angle,error_estimate,reason";

        std::vector<std::string> rows(points.size());
        run_indexed(points.size(), g.threads, [&](size_t i) {
            const Configuration& x = points[i];
            std::string line = std::to_string(i);
            for (Eigen::Index r = 0; r < x.bodies(); ++r)
                for (Eigen::Index c = 0; c < x.dim(); ++c) line += "," + g17(x.points(r, c));
            try {
                const double two_u = 2.0 * wkam::potential(x);
                const FieldSample s = wkam::evaluate_field(x, spec);
                const double grad_norm = wkam::dual_norm(s.gradient, x.masses);
                line += "," + g17(s.u) + "," + g17(grad_norm) + "," +
                        g17((grad_norm * grad_norm - two_u) / two_u) + "," +
                        g17(rotation_angle(s.optimal_rotation)) + "," + g17(s.error_estimate) +
                        ",";
            } catch (const std::exception& e) {
                const double nan = std::numeric_limits<double>::quiet_NaN();
                const std::string n = g17(nan);
                line +=
                    "," + n + "," + n + "," + n + "," + n + "," + n + "," + csv_safe(e.what());
            }
            rows[i] = std::move(line);
        });

        std::string table = header + "\n";
        for (const std::string& row : rows) table += row + "\n";
        if (g.out_path.empty()) {
            std::cout << table;
        } else {
            std::ofstream out(g.out_path);
            if (!out) throw wkam::SerializationError("cannot write " + g.out_path);
            out << table;
        }
    });

    CLI::App* verify_cmd =
        app.add_subcommand("verify", "run the acceptance suite against the config");
    verify_cmd->fallthrough();
    verify_cmd->callback([&] {
        const ExperimentConfig cfg = load_config(g);
        const wkam::SuiteReport report = wkam::run_acceptance(cfg, make_cache(g), &std::cout);
        size_t passed = 0;
        for (const wkam::CheckResult& r : report.checks) passed += r.pass ? 1 : 0;
        std::printf("%zu/%zu criteria passed (%.1f s)\n", passed, report.checks.size(),
                    report.runtime_seconds);
        if (!g.out_path.empty()) wkam::write_json_file(g.out_path, wkam::to_json(report));
        rc = report.all_pass ? 0 : 1;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const wkam::SerializationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {   // covers ShapeError and GroupError
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {   // collisions, non-convergence, io failures
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
