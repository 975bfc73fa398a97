#ifndef WKAM_CONFIG_HPP
#define WKAM_CONFIG_HPP

#include <wkam/serialization.hpp>

#include <set>

namespace wkam {

/// Everything an experiment run needs: the mass system, solver mesh and
/// tolerances, weak-KAM horizon and mode, and the single seed all randomness
/// flows from.  Schema-validated before any computation.
struct ExperimentConfig {
    std::vector<double> masses{1.0, 1.0};
    Eigen::Index d = 2;

    int nodes = 400;                  // phi mesh segments K
    PhiBackend backend = PhiBackend::jacobi;
    double grad_tol = 1e-8;
    int max_iters = 3000;
    double barrier_clearance = 0.05;

    double horizon = 1e3;
    WeakKamMode mode = WeakKamMode::fixed;
    std::vector<std::pair<int, int>> generator_planes;   // empty + invariant = full so(d)
    bool richardson = false;
    int scan_points = 64;

    int seeds = 32;                   // central-configuration multistarts
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (masses.empty()) throw SerializationError("config: masses must be non-empty");
        for (double m : masses)
            if (!(m > 0.0) || !std::isfinite(m))
                throw SerializationError("config: masses must be positive and finite");
        if (d < 2) throw SerializationError("config: d must be >= 2");
        if (nodes < 16) throw SerializationError("config: nodes must be >= 16");
        if (!(grad_tol > 0.0)) throw SerializationError("config: grad_tol must be > 0");
        if (max_iters < 1) throw SerializationError("config: max_iters must be >= 1");
        if (!(barrier_clearance > 0.0))
            throw SerializationError("config: barrier_clearance must be > 0");
        if (!(horizon > 0.0)) throw SerializationError("config: horizon must be > 0");
        if (scan_points < 8) throw SerializationError("config: scan_points must be >= 8");
        if (seeds < 1) throw SerializationError("config: seeds must be >= 1");
        for (const auto& [i, j] : generator_planes) {
            if (i < 0 || j < 0 || i >= d || j >= d || i == j)
                throw SerializationError("config: generator plane indices out of range");
        }
    }

    Masses mass_system() const {
        return Masses(Eigen::Map<const VectorXd>(masses.data(),
                                                 static_cast<Eigen::Index>(masses.size())));
    }

    PhiOptions phi_options() const {
        PhiOptions opts;
        opts.nodes = nodes;
        opts.backend = backend;
        opts.grad_tol = grad_tol;
        opts.max_iters = max_iters;
        opts.barrier_clearance = barrier_clearance;
        return opts;
    }

    GroupGenerators generators() const {
        if (generator_planes.empty()) return GroupGenerators::full(d);
        std::vector<MatrixXd> gens;
        for (const auto& [i, j] : generator_planes)
            gens.push_back(GroupGenerators::plane(d, i, j));
        return GroupGenerators(d, std::move(gens));
    }

    WeakKamSpec weak_kam_spec(HomotheticOrbit orbit) const {
        WeakKamSpec spec(std::move(orbit));
        spec.mode = mode;
        spec.horizon = horizon;
        spec.richardson = richardson;
        if (mode == WeakKamMode::invariant) spec.generators = generators();
        spec.phi_options = phi_options();
        spec.scan_points = scan_points;
        return spec;
    }
};

inline WeakKamMode mode_from_name(const std::string& name) {
    if (name == "fixed") return WeakKamMode::fixed;
    if (name == "rotated") return WeakKamMode::rotated;
    if (name == "invariant") return WeakKamMode::invariant;
    throw SerializationError("config: mode must be fixed, rotated, or invariant");
}

inline const char* mode_name(WeakKamMode mode) {
    switch (mode) {
        case WeakKamMode::fixed: return "fixed";
        case WeakKamMode::rotated: return "rotated";
        default: return "invariant";
    }
}

inline ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw SerializationError("config: expected a JSON object");
    static const std::set<std::string> known = {
        "masses",  "d",       "nodes",      "backend",     "grad_tol",
        "max_iters", "barrier_clearance", "horizon", "mode", "generators",
        "richardson", "scan_points", "seeds", "rng_seed"};
    for (const auto& [key, value] : j.items())
        if (known.find(key) == known.end())
            throw SerializationError("config: unknown key \"" + key + "\"");

    ExperimentConfig cfg;
    try {
        if (j.contains("masses")) cfg.masses = j.at("masses").get<std::vector<double>>();
        if (j.contains("d")) cfg.d = j.at("d").get<Eigen::Index>();
        if (j.contains("nodes")) cfg.nodes = j.at("nodes").get<int>();
        if (j.contains("backend"))
            cfg.backend = backend_from_name(j.at("backend").get<std::string>());
        if (j.contains("grad_tol")) cfg.grad_tol = j.at("grad_tol").get<double>();
        if (j.contains("max_iters")) cfg.max_iters = j.at("max_iters").get<int>();
        if (j.contains("barrier_clearance"))
            cfg.barrier_clearance = j.at("barrier_clearance").get<double>();
        if (j.contains("horizon")) cfg.horizon = j.at("horizon").get<double>();
        if (j.contains("mode")) cfg.mode = mode_from_name(j.at("mode").get<std::string>());
        if (j.contains("generators")) {
            const json& g = j.at("generators");
            if (g.is_string() && g.get<std::string>() == "full") {
                cfg.generator_planes.clear();
            } else if (g.is_array()) {
                for (const json& plane : g) {
                    if (!plane.is_array() || plane.size() != 2)
                        throw SerializationError(
                            "config: generators must be \"full\" or [[i,j], ...]");
                    cfg.generator_planes.emplace_back(plane[0].get<int>(),
                                                      plane[1].get<int>());
                }
            } else {
                throw SerializationError("config: generators must be \"full\" or [[i,j], ...]");
            }
        }
        if (j.contains("richardson")) cfg.richardson = j.at("richardson").get<bool>();
        if (j.contains("scan_points")) cfg.scan_points = j.at("scan_points").get<int>();
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<int>();
        if (j.contains("rng_seed")) cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw SerializationError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline json to_json(const ExperimentConfig& cfg) {
    json j;
    j["masses"] = cfg.masses;
    j["d"] = cfg.d;
    j["nodes"] = cfg.nodes;
    j["backend"] = backend_name(cfg.backend);
    j["grad_tol"] = cfg.grad_tol;
    j["max_iters"] = cfg.max_iters;
    j["barrier_clearance"] = cfg.barrier_clearance;
    j["horizon"] = cfg.horizon;
    j["mode"] = mode_name(cfg.mode);
    if (cfg.generator_planes.empty()) {
        j["generators"] = "full";
    } else {
        json planes = json::array();
        for (const auto& [a, b] : cfg.generator_planes) planes.push_back({a, b});
        j["generators"] = std::move(planes);
    }
    j["richardson"] = cfg.richardson;
    j["scan_points"] = cfg.scan_points;
    j["seeds"] = cfg.seeds;
    j["rng_seed"] = cfg.rng_seed;
    return j;
}

}   // namespace wkam

#endif
