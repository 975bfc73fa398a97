#ifndef WKAM_ACTION_PATH_HPP
#define WKAM_ACTION_PATH_HPP

#include <wkam/mass_geometry.hpp>
#include <wkam/optim.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace wkam {

/// Discretized curve: K+1 position matrices sampled at strictly increasing times.
/// Interior nodes must be collision-free (minimizers avoid interior collisions).
struct Trajectory {
    Masses masses;
    std::vector<double> times;
    std::vector<MatrixXd> nodes;

    Trajectory(Masses m, std::vector<double> t, std::vector<MatrixXd> n)
        : masses(std::move(m)), times(std::move(t)), nodes(std::move(n)) {
        if (times.size() != nodes.size())
            throw ShapeError("Trajectory: times and nodes must have equal length");
        if (times.empty()) throw ShapeError("Trajectory: need at least one node");
        for (size_t k = 0; k < nodes.size(); ++k) {
            if (nodes[k].rows() != masses.count() || nodes[k].cols() != nodes[0].cols())
                throw ShapeError("Trajectory: inconsistent node shapes");
            if (k > 0 && !(times[k] > times[k - 1]))
                throw std::invalid_argument("Trajectory: times must be strictly increasing");
        }
        for (size_t k = 1; k + 1 < nodes.size(); ++k)
            if (has_collision(nodes[k]))
                throw CollisionError("Trajectory: interior node " + std::to_string(k) +
                                     " has colliding bodies");
    }

    size_t segments() const { return nodes.size() - 1; }
    Configuration at(size_t k) const { return Configuration(masses, nodes[k]); }
    double duration() const { return times.back() - times.front(); }
};

/// Lagrangian action A(gamma) = int 1/2 |v|^2 + U, with segment finite-difference
/// velocities and midpoint-rule potential (second order in the mesh).
inline double action(const Trajectory& traj) {
    double a = 0.0;
    for (size_t k = 0; k + 1 < traj.nodes.size(); ++k) {
        const double dt = traj.times[k + 1] - traj.times[k];
        const MatrixXd dx = traj.nodes[k + 1] - traj.nodes[k];
        const MatrixXd mid = 0.5 * (traj.nodes[k] + traj.nodes[k + 1]);
        const double kinetic = 0.5 * mass_inner(dx, dx, traj.masses) / (dt * dt);
        a += (kinetic + potential(mid, traj.masses)) * dt;
    }
    return a;
}

/// Length in the Jacobi-Maupertuis metric sqrt(2U) * (mass metric): the action of
/// the geometric path under its zero-energy time parametrization.
inline double jacobi_length(const std::vector<MatrixXd>& path, const Masses& masses) {
    double len = 0.0;
    for (size_t k = 0; k + 1 < path.size(); ++k) {
        const MatrixXd mid = 0.5 * (path[k] + path[k + 1]);
        len += std::sqrt(2.0 * potential(mid, masses)) *
               mass_norm(path[k + 1] - path[k], masses);
    }
    return len;
}

/// Assign times so each segment satisfies dt = |dx| / sqrt(2 U(midpoint)),
/// the zero-energy condition 1/2 |v|^2 = U of completely parabolic motion.
inline Trajectory reparametrize_energy_zero(const std::vector<MatrixXd>& path,
                                            const Masses& masses, double t_start = 0.0) {
    if (path.empty()) throw ShapeError("reparametrize_energy_zero: empty path");
    std::vector<double> times{t_start};
    for (size_t k = 0; k + 1 < path.size(); ++k) {
        const double step = mass_norm(path[k + 1] - path[k], masses);
        if (step == 0.0)
            throw std::invalid_argument("reparametrize_energy_zero: repeated node " +
                                        std::to_string(k));
        const MatrixXd mid = 0.5 * (path[k] + path[k + 1]);
        times.push_back(times.back() + step / std::sqrt(2.0 * potential(mid, masses)));
    }
    return Trajectory(masses, std::move(times), path);
}

namespace detail {

/// Second-order velocity at interior node i of a (possibly nonuniform) time grid.
inline MatrixXd centered_velocity(const Trajectory& traj, size_t i) {
    const double h0 = traj.times[i] - traj.times[i - 1];
    const double h1 = traj.times[i + 1] - traj.times[i];
    const double denom = h0 * h1 * (h0 + h1);
    return (h0 * h0 * traj.nodes[i + 1] + (h1 * h1 - h0 * h0) * traj.nodes[i] -
            h1 * h1 * traj.nodes[i - 1]) /
           denom;
}

/// Second divided difference (acceleration) at interior node i.
inline MatrixXd centered_acceleration(const Trajectory& traj, size_t i) {
    const double h0 = traj.times[i] - traj.times[i - 1];
    const double h1 = traj.times[i + 1] - traj.times[i];
    return 2.0 *
           ((traj.nodes[i + 1] - traj.nodes[i]) / h1 - (traj.nodes[i] - traj.nodes[i - 1]) / h0) /
           (h0 + h1);
}

}   // namespace detail

/// Max over interior nodes of |1/2 |v|^2 - U| / U with centered-difference
/// velocities: how far the trajectory is from zero total energy.
inline double energy_residual(const Trajectory& traj) {
    if (traj.nodes.size() < 3)
        throw ShapeError("energy_residual: need at least three nodes");
    double worst = 0.0;
    for (size_t i = 1; i + 1 < traj.nodes.size(); ++i) {
        const MatrixXd v = detail::centered_velocity(traj, i);
        const double u = potential(traj.nodes[i], traj.masses);
        worst = std::max(worst, std::abs(0.5 * mass_inner(v, v, traj.masses) - u) / u);
    }
    return worst;
}

/// Max over interior nodes of the Euler-Lagrange defect |M a - grad U|_* / |grad U|_*.
inline double newton_residual(const Trajectory& traj) {
    if (traj.nodes.size() < 3)
        throw ShapeError("newton_residual: need at least three nodes");
    double worst = 0.0;
    for (size_t i = 1; i + 1 < traj.nodes.size(); ++i) {
        const MatrixXd acc = detail::centered_acceleration(traj, i);
        const MatrixXd grad = potential_gradient(traj.nodes[i], traj.masses);
        const MatrixXd defect =
            (acc.array().colwise() * traj.masses.values().array()).matrix() - grad;
        worst = std::max(worst, dual_norm(defect, traj.masses) / dual_norm(grad, traj.masses));
    }
    return worst;
}

/// Max deviation of the center of mass from its best-fit linear-in-t motion.
inline double center_of_mass_drift(const Trajectory& traj) {
    const size_t n = traj.nodes.size();
    const Eigen::Index d = traj.nodes[0].cols();
    MatrixXd g(static_cast<Eigen::Index>(n), d);
    VectorXd t(static_cast<Eigen::Index>(n));
    for (size_t k = 0; k < n; ++k) {
        g.row(static_cast<Eigen::Index>(k)) = center_of_mass(traj.nodes[k], traj.masses);
        t[static_cast<Eigen::Index>(k)] = traj.times[k];
    }
    if (n == 1) return 0.0;
    MatrixXd design(static_cast<Eigen::Index>(n), 2);
    design.col(0).setOnes();
    design.col(1) = t;
    const MatrixXd coeff = design.colPivHouseholderQr().solve(g);
    return (g - design * coeff).rowwise().norm().maxCoeff();
}

enum class PhiBackend : std::uint8_t { jacobi, time_domain };

struct PhiOptions {
    int nodes = 200;                   // number of segments K
    PhiBackend backend = PhiBackend::jacobi;
    double grad_tol = 1e-8;            // relative to 1 + objective scale
    int max_iters = 3000;
    double barrier_clearance = 0.05;   // epsilon_c as a fraction of the configuration scale
};

struct MinimizerResult {
    double phi;
    Trajectory trajectory;
    PhiBackend backend;
    double newton_residual;
    double energy_residual;
    bool converged;
    bool multiple_minima;   // another local minimizer ties within 1e-6
    // center-of-mass shifts removed from the endpoints before solving
    Eigen::RowVectorXd from_shift{}, to_shift{};
};

namespace detail {

/// Mass-weighted coordinates w_i = sqrt(m_i) r_i make the mass metric Euclidean.
inline MatrixXd to_weighted(const MatrixXd& r, const Masses& m) {
    return (r.array().colwise() * m.values().array().sqrt()).matrix();
}
inline MatrixXd from_weighted(const MatrixXd& w, const Masses& m) {
    return (w.array().colwise() / m.values().array().sqrt()).matrix();
}

/// Shared discrete-path workspace for the phi backends: endpoints fixed in
/// weighted coordinates, interior nodes packed as the optimization vector.
struct PathProblem {
    Masses masses;
    MatrixXd w_from, w_to;   // weighted endpoints
    int segments;
    Eigen::Index n, d;
    double clearance;        // near-collision barrier radius
    double barrier_weight;   // 0 disables the barrier

    PathProblem(const Masses& m, const MatrixXd& from, const MatrixXd& to, int k, double eps)
        : masses(m), w_from(to_weighted(from, m)), w_to(to_weighted(to, m)), segments(k),
          n(from.rows()), d(from.cols()), clearance(eps), barrier_weight(0.0) {}

    Eigen::Index vars() const { return (segments - 1) * n * d; }

    MatrixXd node(const VectorXd& z, int k) const {
        if (k == 0) return w_from;
        if (k == segments) return w_to;
        return Eigen::Map<const MatrixXd>(z.data() + (k - 1) * n * d, n, d);
    }

    void add_to_node(VectorXd& grad, int k, const MatrixXd& contribution) const {
        if (k == 0 || k == segments) return;
        Eigen::Map<MatrixXd>(grad.data() + (k - 1) * n * d, n, d) += contribution;
    }

    VectorXd pack(const std::vector<MatrixXd>& interior) const {
        VectorXd z(vars());
        for (int k = 1; k < segments; ++k)
            Eigen::Map<MatrixXd>(z.data() + (k - 1) * n * d, n, d) = interior[k - 1];
        return z;
    }

    std::vector<MatrixXd> unpack_positions(const VectorXd& z) const {
        std::vector<MatrixXd> path;
        path.reserve(segments + 1);
        for (int k = 0; k <= segments; ++k) path.push_back(from_weighted(node(z, k), masses));
        return path;
    }

    /// Quadratic hinge penalty sum max(0, eps - r_ij)^2 at a configuration (r coords),
    /// with its gradient in weighted coordinates accumulated into `grad_w`.
    double barrier_at(const MatrixXd& r, MatrixXd* grad_r) const {
        double value = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const Eigen::RowVectorXd diff = r.row(i) - r.row(j);
                const double dist = diff.norm();
                if (dist >= clearance || dist == 0.0) continue;
                const double gap = clearance - dist;
                value += gap * gap;
                if (grad_r) {
                    const Eigen::RowVectorXd dd = (-2.0 * gap / dist) * diff;
                    grad_r->row(i) += dd;
                    grad_r->row(j) -= dd;
                }
            }
        return value;
    }
};

/// Discrete Dirichlet energy of the Jacobi metric on a uniform sigma-grid:
///   E = K * sum_k U(mid_k) |dw_k|^2  (+ barrier).
/// Minimizers are Jacobi geodesics traversed at constant Jacobi speed, and the
/// Jacobi length of the minimizer is sqrt(2 E_min).
struct JacobiEnergy {
    const PathProblem& prob;

    double operator()(const VectorXd& z, VectorXd& grad) const {
        const double kf = static_cast<double>(prob.segments);
        grad.setZero(z.size());
        double energy = 0.0;
        try {
            for (int k = 0; k < prob.segments; ++k) {
                const MatrixXd wa = prob.node(z, k), wb = prob.node(z, k + 1);
                const MatrixXd mid_r = from_weighted(0.5 * (wa + wb), prob.masses);
                const double u = potential(mid_r, prob.masses);
                const MatrixXd dw = wb - wa;
                const double seg2 = dw.squaredNorm();
                energy += kf * u * seg2;

                const MatrixXd gu =
                    kf * seg2 * 0.5 * from_weighted(potential_gradient(mid_r, prob.masses),
                                                    prob.masses);
                prob.add_to_node(grad, k, gu - 2.0 * kf * u * dw);
                prob.add_to_node(grad, k + 1, gu + 2.0 * kf * u * dw);

                if (prob.barrier_weight > 0.0) {
                    MatrixXd br = MatrixXd::Zero(prob.n, prob.d);
                    energy += prob.barrier_weight * prob.barrier_at(mid_r, &br);
                    const MatrixXd bw =
                        prob.barrier_weight * 0.5 * from_weighted(br, prob.masses);
                    prob.add_to_node(grad, k, bw);
                    prob.add_to_node(grad, k + 1, bw);
                }
            }
        } catch (const CollisionError&) {
            return std::numeric_limits<double>::infinity();
        }
        return energy;
    }
};

/// Discrete time-domain action on a fixed grid of time fractions with a single
/// free log-duration variable:  A = sum_k |dw_k|^2 / (2 tau f_k) + tau f_k U(mid_k).
struct TimeDomainAction {
    const PathProblem& prob;
    const std::vector<double>& fractions;   // positive, summing to 1

    double operator()(const VectorXd& z, VectorXd& grad) const {
        // layout: interior nodes then log(tau)
        const double tau = std::exp(z[z.size() - 1]);
        grad.setZero(z.size());
        double value = 0.0;
        double dv_dlogtau = 0.0;
        try {
            for (int k = 0; k < prob.segments; ++k) {
                const double dt = tau * fractions[static_cast<size_t>(k)];
                const MatrixXd wa = prob.node(z, k), wb = prob.node(z, k + 1);
                const MatrixXd mid_r = from_weighted(0.5 * (wa + wb), prob.masses);
                const double u = potential(mid_r, prob.masses);
                const MatrixXd dw = wb - wa;
                const double kinetic = 0.5 * dw.squaredNorm() / dt;
                value += kinetic + dt * u;
                dv_dlogtau += dt * u - kinetic;

                const MatrixXd gu =
                    dt * 0.5 *
                    from_weighted(potential_gradient(mid_r, prob.masses), prob.masses);
                prob.add_to_node(grad, k, gu - dw / dt);
                prob.add_to_node(grad, k + 1, gu + dw / dt);

                if (prob.barrier_weight > 0.0) {
                    MatrixXd br = MatrixXd::Zero(prob.n, prob.d);
                    value += prob.barrier_weight * prob.barrier_at(mid_r, &br);
                    const MatrixXd bw =
                        prob.barrier_weight * 0.5 * from_weighted(br, prob.masses);
                    prob.add_to_node(grad, k, bw);
                    prob.add_to_node(grad, k + 1, bw);
                }
            }
        } catch (const CollisionError&) {
            return std::numeric_limits<double>::infinity();
        }
        grad[grad.size() - 1] = dv_dlogtau;
        return value;
    }

    // node(z, k) ignores the trailing log-tau entry because PathProblem reads only
    // the leading (segments-1)*n*d entries; keep it that way.
};

/// LDL^T-factorized weighted chain Laplacian with fixed ends: the dominant part
/// of the discrete-path Hessians.  Used as the L-BFGS seed inverse Hessian so
/// the iteration count stays mesh-independent.  Applies per coordinate stripe;
/// trailing `extra` entries (e.g. a log-duration variable) are left untouched.
class PathLaplacian {
public:
    PathLaplacian(const std::vector<double>& segment_weights, Eigen::Index stride,
                  Eigen::Index extra)
        : stride_(stride), extra_(extra) {
        const size_t m = segment_weights.size() - 1;   // interior nodes of the chain
        diag_.resize(m);
        lower_.assign(m, 0.0);
        for (size_t i = 0; i < m; ++i) {
            const double b = 2.0 * (segment_weights[i] + segment_weights[i + 1]);
            if (i == 0) {
                diag_[i] = b;
            } else {
                const double e_prev = -2.0 * segment_weights[i];
                lower_[i] = e_prev / diag_[i - 1];
                diag_[i] = b - lower_[i] * e_prev;
            }
        }
    }

    void operator()(VectorXd& q) const {
        const Eigen::Index m = static_cast<Eigen::Index>(diag_.size());
        for (Eigen::Index c = 0; c < stride_; ++c) {
            for (Eigen::Index i = 1; i < m; ++i)
                q[i * stride_ + c] -= lower_[static_cast<size_t>(i)] * q[(i - 1) * stride_ + c];
            for (Eigen::Index i = 0; i < m; ++i) q[i * stride_ + c] /= diag_[static_cast<size_t>(i)];
            for (Eigen::Index i = m - 2; i >= 0; --i)
                q[i * stride_ + c] -= lower_[static_cast<size_t>(i + 1)] * q[(i + 1) * stride_ + c];
        }
        (void)extra_;   // trailing entries pass through unchanged
    }

private:
    std::vector<double> diag_, lower_;
    Eigen::Index stride_, extra_;
};

/// Initialization in weighted coordinates: geometric interpolation of the overall
/// scale with chordal interpolation of the normalized shape, so that endpoints of
/// very different size produce sensibly graded intermediate configurations.  The
/// shape chord is bent sideways by a signed transverse detour; returns nothing if
/// the bent chord still grazes the collision set.
inline std::optional<std::vector<MatrixXd>> detour_interior(const PathProblem& prob,
                                                            const MatrixXd& perp,
                                                            double detour) {
    const double lam0 = prob.w_from.norm();
    const double lam1 = prob.w_to.norm();
    const MatrixXd shape0 = prob.w_from / lam0;
    const MatrixXd shape1 = prob.w_to / lam1;
    constexpr double pi = 3.141592653589793;
    std::vector<MatrixXd> interior;
    MatrixXd prev = prob.w_from;
    for (int k = 1; k <= prob.segments; ++k) {
        const double s = static_cast<double>(k) / prob.segments;
        MatrixXd shape = (1.0 - s) * shape0 + s * shape1 + (detour * std::sin(pi * s)) * perp;
        const double norm = shape.norm();
        if (norm < 1e-8) return std::nullopt;
        const MatrixXd w = (std::pow(lam0, 1.0 - s) * std::pow(lam1, s) / norm) * shape;
        if (k < prob.segments) interior.push_back(w);
        const MatrixXd mid = from_weighted(0.5 * (prev + w), prob.masses);
        if (min_pair_distance(from_weighted(w, prob.masses)) <= 0.5 * prob.clearance ||
            min_pair_distance(mid) <= 0.5 * prob.clearance)
            return std::nullopt;
        prev = w;
    }
    return interior;
}

/// Candidate starts: the plain chord plus the first collision-free detour of each
/// sign.  Near a collision the two signs seed distinct winding classes, and each
/// class can hold its own local minimizer (for two bodies the Jacobi metric is a
/// cone of total angle pi, so chords past the vertex come in two homotopy types).
inline std::vector<std::vector<MatrixXd>> initial_candidates(const PathProblem& prob) {
    // deterministic transverse direction: a quarter turn in the leading plane
    const MatrixXd shape0 = prob.w_from / prob.w_from.norm();
    MatrixXd perp = shape0;
    perp.col(0) = -shape0.col(1);
    perp.col(1) = shape0.col(0);
    perp /= perp.norm();

    std::vector<std::vector<MatrixXd>> candidates;
    if (auto chord = detour_interior(prob, perp, 0.0)) candidates.push_back(std::move(*chord));
    for (const double sign : {1.0, -1.0})
        for (double detour = 0.1; detour <= 1.01; detour += 0.1)
            if (auto bent = detour_interior(prob, perp, sign * detour)) {
                candidates.push_back(std::move(*bent));
                break;
            }
    if (candidates.empty())
        throw CollisionError("phi: could not build a collision-free initial path");
    return candidates;
}

}   // namespace detail

/// Mane critical action potential phi(x, y): the infimum of the free-time action
/// among collision-free paths from x to y.  Both endpoints are mean-centered
/// internally.  The jacobi backend minimizes the Jacobi-metric Dirichlet energy
/// (free time eliminated analytically); the time_domain backend minimizes the
/// discrete action jointly in interior nodes and total duration.
inline MinimizerResult phi(const Configuration& x, const Configuration& y,
                           const PhiOptions& opts = {}) {
    if (!(x.masses == y.masses))
        throw ShapeError("phi: endpoints carry different masses");
    if (x.dim() != y.dim()) throw ShapeError("phi: endpoints have different dimensions");
    if (opts.nodes < 2) throw std::invalid_argument("phi: need at least two segments");

    MatrixXd from = x.points, to = y.points;
    const Eigen::RowVectorXd from_shift = recenter(from, x.masses);
    const Eigen::RowVectorXd to_shift = recenter(to, x.masses);
    const double scale = std::max(config_scale(from), config_scale(to));

    if (mass_norm(from - to, x.masses) <= 1e-15 * std::max(scale, 1.0)) {
        // infimum over shrinking stationary loops is 0 and is not attained
        Trajectory point(x.masses, {0.0}, {from});
        return MinimizerResult{0.0,  std::move(point), opts.backend, 0.0, 0.0, true,
                               false, from_shift, to_shift};
    }
    if (has_collision(from) || has_collision(to))
        throw CollisionError("phi: endpoints must be collision-free");

    // the barrier radius follows the smaller endpoint: that is where a path
    // between configurations of very different size can graze a collision
    const double near_scale = std::min(config_scale(from), config_scale(to));
    const double u_scale = potential(from, x.masses) + potential(to, x.masses);

    // barrier stage keeps early iterates clear of collisions; final stage removes
    // it.  an empty fractions list selects the jacobi objective.
    auto two_stage = [&](detail::PathProblem& prob, const VectorXd& z0,
                         const std::vector<double>& fractions) {
        const bool td = !fractions.empty();
        auto run = [&](const VectorXd& start, double barrier, double tol_scale) {
            prob.barrier_weight = barrier;

            // seed inverse Hessian: chain Laplacian weighted like the current path
            std::vector<double> weights;
            weights.reserve(static_cast<size_t>(prob.segments));
            for (int k = 0; k < prob.segments; ++k) {
                const MatrixXd mid = detail::from_weighted(
                    0.5 * (prob.node(start, k) + prob.node(start, k + 1)), x.masses);
                double u;
                try {
                    u = potential(mid, x.masses);
                } catch (const CollisionError&) {
                    u = 1.0;
                }
                if (td) {
                    const double tau = std::exp(start[start.size() - 1]);
                    weights.push_back(0.5 / (tau * fractions[static_cast<size_t>(k)]));
                } else {
                    weights.push_back(static_cast<double>(prob.segments) * u);
                }
            }

            LbfgsOptions lopts;
            lopts.max_iters = opts.max_iters;
            lopts.precondition =
                detail::PathLaplacian(weights, prob.n * prob.d, td ? 1 : 0);
            VectorXd probe_grad(start.size());
            double value0;
            if (td)
                value0 = detail::TimeDomainAction{prob, fractions}(start, probe_grad);
            else
                value0 = detail::JacobiEnergy{prob}(start, probe_grad);
            lopts.grad_tol = opts.grad_tol * tol_scale * (1.0 + std::abs(value0));
            if (td)
                return lbfgs_minimize(detail::TimeDomainAction{prob, fractions}, start, lopts);
            return lbfgs_minimize(detail::JacobiEnergy{prob}, start, lopts);
        };
        LbfgsResult stage1 = run(z0, 10.0 * u_scale / (prob.clearance * prob.clearance), 100.0);
        return run(stage1.x, 0.0, 1.0);
    };

    // triage the candidate starts on a coarse mesh (jacobi objective: minimizing
    // paths agree across backends) and keep the smallest action; a second distinct
    // coarse minimizer within 1e-6 flags multiplicity
    const int coarse_segments = std::min(opts.nodes, std::max(24, opts.nodes / 8));
    detail::PathProblem coarse(x.masses, from, to, coarse_segments,
                               opts.barrier_clearance * near_scale);
    std::vector<VectorXd> minima;
    std::vector<double> values;
    for (const auto& interior : detail::initial_candidates(coarse)) {
        minima.push_back(two_stage(coarse, coarse.pack(interior), {}).x);
        values.push_back(jacobi_length(coarse.unpack_positions(minima.back()), x.masses));
    }
    size_t best = 0;
    for (size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[best]) best = i;
    bool multiple_minima = false;
    for (size_t i = 0; i < values.size() && !multiple_minima; ++i) {
        if (i == best) continue;
        if (values[i] - values[best] > 1e-6 * std::max(1.0, std::abs(values[best]))) continue;
        double gap = 0.0;
        for (int k = 1; k < coarse.segments; ++k)
            gap = std::max(gap, (coarse.node(minima[i], k) - coarse.node(minima[best], k)).norm());
        if (gap > 1e-3 * std::max(coarse.w_from.norm(), coarse.w_to.norm()))
            multiple_minima = true;
    }

    // refine the winner at full resolution, warm-started by linear upsampling
    detail::PathProblem prob(x.masses, from, to, opts.nodes,
                             opts.barrier_clearance * near_scale);
    VectorXd z0;
    if (coarse.segments == opts.nodes) {
        z0 = minima[best];
    } else {
        std::vector<MatrixXd> interior;
        interior.reserve(static_cast<size_t>(opts.nodes - 1));
        for (int k = 1; k < opts.nodes; ++k) {
            const double s = static_cast<double>(k) * coarse.segments / opts.nodes;
            const int j = std::min(static_cast<int>(s), coarse.segments - 1);
            interior.push_back((1.0 + j - s) * coarse.node(minima[best], j) +
                               (s - j) * coarse.node(minima[best], j + 1));
        }
        z0 = prob.pack(interior);
    }

    const bool time_domain = opts.backend == PhiBackend::time_domain;
    std::vector<double> fractions;
    if (time_domain) {
        // freeze time fractions from the zero-energy parametrization of the start
        const Trajectory init = reparametrize_energy_zero(prob.unpack_positions(z0), x.masses);
        const double total = init.duration();
        for (size_t k = 0; k + 1 < init.times.size(); ++k)
            fractions.push_back((init.times[k + 1] - init.times[k]) / total);
        VectorXd augmented(z0.size() + 1);
        augmented << z0, std::log(total);
        z0 = std::move(augmented);
    }

    LbfgsResult fine = two_stage(prob, z0, fractions);
    std::vector<MatrixXd> path = prob.unpack_positions(fine.x);
    bool converged = fine.converged;
    for (size_t k = 1; k + 1 < path.size(); ++k)
        if (min_pair_distance(path[k]) <= 1e-3 * prob.clearance) converged = false;

    auto finish = [&](double value, Trajectory traj) {
        const double nres = newton_residual(traj);
        const double eres = energy_residual(traj);
        return MinimizerResult{value, std::move(traj), opts.backend,
                               nres,  eres,            converged,
                               multiple_minima, from_shift, to_shift};
    };
    if (time_domain) {
        const double tau = std::exp(fine.x[fine.x.size() - 1]);
        std::vector<double> times{0.0};
        for (int k = 0; k < opts.nodes; ++k)
            times.push_back(times.back() + tau * fractions[static_cast<size_t>(k)]);
        return finish(fine.value, Trajectory(x.masses, std::move(times), std::move(path)));
    }
    return finish(jacobi_length(path, x.masses), reparametrize_energy_zero(path, x.masses));
}

}   // namespace wkam

#endif
