#ifndef WKAM_SERIALIZATION_HPP
#define WKAM_SERIALIZATION_HPP

#include <wkam/weak_kam.hpp>

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

namespace wkam {

using json = nlohmann::json;

struct SerializationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline json matrix_to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline MatrixXd matrix_from_json(const json& rows, const char* what) {
    if (!rows.is_array() || rows.empty())
        throw SerializationError(std::string(what) + ": expected a non-empty array of rows");
    const size_t cols = rows[0].is_array() ? rows[0].size() : 0;
    if (cols == 0) throw SerializationError(std::string(what) + ": rows must be non-empty arrays");
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].is_array() || rows[i].size() != cols)
            throw SerializationError(std::string(what) + ": ragged rows");
        for (size_t j = 0; j < cols; ++j) {
            if (!rows[i][j].is_number())
                throw SerializationError(std::string(what) + ": non-numeric entry");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j].get<double>();
        }
    }
    return m;
}

inline VectorXd vector_from_json(const json& arr, const char* what) {
    if (!arr.is_array() || arr.empty())
        throw SerializationError(std::string(what) + ": expected a non-empty array");
    VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number())
            throw SerializationError(std::string(what) + ": non-numeric entry");
        v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
    return v;
}

}   // namespace detail

inline json to_json(const Configuration& x) {
    json j;
    j["d"] = x.dim();
    j["masses"] = std::vector<double>(x.masses.values().data(),
                                      x.masses.values().data() + x.masses.count());
    j["positions"] = detail::matrix_to_json(x.points);
    return j;
}

inline Configuration configuration_from_json(const json& j) {
    if (!j.is_object() || !j.contains("masses") || !j.contains("positions"))
        throw SerializationError("configuration: need {\"d\", \"masses\", \"positions\"}");
    const VectorXd m = detail::vector_from_json(j.at("masses"), "configuration.masses");
    const MatrixXd pts = detail::matrix_from_json(j.at("positions"), "configuration.positions");
    try {
        Configuration x(Masses(m), pts);
        if (j.contains("d") && j.at("d").get<Eigen::Index>() != x.dim())
            throw SerializationError("configuration: \"d\" disagrees with positions");
        return x;
    } catch (const std::invalid_argument& e) {   // covers ShapeError and bad masses
        throw SerializationError(std::string("configuration: ") + e.what());
    }
}

inline json to_json(const Trajectory& traj) {
    json j;
    j["times"] = traj.times;
    json nodes = json::array();
    for (size_t k = 0; k < traj.nodes.size(); ++k)
        nodes.push_back(to_json(Configuration(traj.masses, traj.nodes[k])));
    j["nodes"] = std::move(nodes);
    return j;
}

inline Trajectory trajectory_from_json(const json& j) {
    if (!j.is_object() || !j.contains("times") || !j.contains("nodes"))
        throw SerializationError("trajectory: need {\"times\", \"nodes\"}");
    if (!j.at("times").is_array() || j.at("nodes").size() != j.at("times").size())
        throw SerializationError("trajectory: times/nodes length mismatch");
    if (j.at("nodes").empty()) throw SerializationError("trajectory: empty");
    std::vector<double> times;
    for (const json& t : j.at("times")) {
        if (!t.is_number()) throw SerializationError("trajectory: non-numeric time");
        times.push_back(t.get<double>());
    }
    std::vector<MatrixXd> nodes;
    Configuration first = configuration_from_json(j.at("nodes")[0]);
    nodes.push_back(first.points);
    for (size_t k = 1; k < j.at("nodes").size(); ++k) {
        Configuration node = configuration_from_json(j.at("nodes")[k]);
        if (!(node.masses == first.masses))
            throw SerializationError("trajectory: nodes carry different masses");
        nodes.push_back(std::move(node.points));
    }
    try {
        return Trajectory(first.masses, std::move(times), std::move(nodes));
    } catch (const std::exception& e) {
        throw SerializationError(std::string("trajectory: ") + e.what());
    }
}

inline const char* backend_name(PhiBackend backend) {
    return backend == PhiBackend::jacobi ? "jacobi" : "time_domain";
}

inline PhiBackend backend_from_name(const std::string& name) {
    if (name == "jacobi") return PhiBackend::jacobi;
    if (name == "time_domain" || name == "time") return PhiBackend::time_domain;
    throw SerializationError("backend: expected \"jacobi\" or \"time_domain\"");
}

inline json to_json(const MinimizerResult& result) {
    json j;
    j["phi"] = result.phi;
    j["backend"] = backend_name(result.backend);
    j["newton_residual"] = result.newton_residual;
    j["energy_residual"] = result.energy_residual;
    j["converged"] = result.converged;
    j["multiple_minima"] = result.multiple_minima;
    j["trajectory"] = to_json(result.trajectory);
    j["from_shift"] = std::vector<double>(result.from_shift.data(),
                                          result.from_shift.data() + result.from_shift.size());
    j["to_shift"] = std::vector<double>(result.to_shift.data(),
                                        result.to_shift.data() + result.to_shift.size());
    return j;
}

inline MinimizerResult minimizer_result_from_json(const json& j) {
    for (const char* key :
         {"phi", "backend", "newton_residual", "energy_residual", "converged", "trajectory"})
        if (!j.contains(key))
            throw SerializationError(std::string("minimizer result: missing \"") + key + "\"");
    Trajectory traj = trajectory_from_json(j.at("trajectory"));
    Eigen::RowVectorXd from_shift = Eigen::RowVectorXd::Zero(traj.nodes[0].cols());
    Eigen::RowVectorXd to_shift = from_shift;
    if (j.contains("from_shift"))
        from_shift = detail::vector_from_json(j.at("from_shift"), "from_shift").transpose();
    if (j.contains("to_shift"))
        to_shift = detail::vector_from_json(j.at("to_shift"), "to_shift").transpose();
    return MinimizerResult{j.at("phi").get<double>(),
                           std::move(traj),
                           backend_from_name(j.at("backend").get<std::string>()),
                           j.at("newton_residual").get<double>(),
                           j.at("energy_residual").get<double>(),
                           j.at("converged").get<bool>(),
                           j.value("multiple_minima", false),
                           std::move(from_shift),
                           std::move(to_shift)};
}

inline json to_json(const MinimalConfiguration& min_config) {
    json j = to_json(min_config.a);
    j["U0"] = min_config.U0;
    j["residual"] = min_config.lagrange_residual;
    j["multistarts"] = min_config.multistart_count;
    return j;
}

/// Inverse of to_json(MinimalConfiguration); U0 is recomputed from the points
/// and must agree with the stored value, so stale or edited files are rejected.
inline MinimalConfiguration minimal_configuration_from_json(const json& j) {
    Configuration a = configuration_from_json(j);
    if (!j.contains("U0") || !j.at("U0").is_number())
        throw SerializationError("central configuration: missing numeric \"U0\"");
    const double u0 = j.at("U0").get<double>();
    const double u_actual = potential(a);
    if (std::abs(u0 - u_actual) > 1e-8 * std::max(1.0, u_actual))
        throw SerializationError("central configuration: stored U0 disagrees with the points");
    if (std::abs(moment_of_inertia(a) - 1.0) > 1e-8)
        throw SerializationError("central configuration: points must satisfy I = 1");
    return MinimalConfiguration{std::move(a), u0, j.value("residual", 0.0),
                                j.value("multistarts", 0), {}};
}

inline json to_json(const FieldSample& sample) {
    json j;
    j["x"] = to_json(sample.x);
    j["u"] = sample.u;
    j["gradient"] = detail::matrix_to_json(sample.gradient);
    j["optimal_rotation"] = detail::matrix_to_json(sample.optimal_rotation);
    j["error_estimate"] = sample.error_estimate;
    return j;
}

inline json to_json(const CalibrationReport& report) {
    json j;
    j["curve"] = to_json(report.curve);
    j["calibration_defect"] = report.calibration_defect;
    j["max_angular_momentum"] = report.max_angmom;
    j["momentum_components"] =
        std::vector<double>(report.momentum_components.data(),
                            report.momentum_components.data() + report.momentum_components.size());
    j["asymptotic_error"] = report.asymptotic_error;
    j["com_drift"] = report.com_drift;
    j["u"] = report.u_value;
    j["optimal_rotation"] = detail::matrix_to_json(report.optimal_rotation);
    return j;
}

/// Grid file {"points": [Configuration, ...]}; all points must share the masses.
inline std::vector<Configuration> grid_from_json(const json& j) {
    if (!j.is_object() || !j.contains("points") || !j.at("points").is_array() ||
        j.at("points").empty())
        throw SerializationError("grid: need {\"points\": [configuration, ...]}");
    std::vector<Configuration> points;
    for (const json& p : j.at("points")) points.push_back(configuration_from_json(p));
    for (size_t k = 1; k < points.size(); ++k)
        if (!(points[k].masses == points[0].masses))
            throw SerializationError("grid: points carry different masses");
    return points;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SerializationError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SerializationError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw SerializationError("cannot write " + path);
    out << j.dump(2) << "\n";
}

}   // namespace wkam

#endif
