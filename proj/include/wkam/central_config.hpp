#ifndef WKAM_CENTRAL_CONFIG_HPP
#define WKAM_CENTRAL_CONFIG_HPP

#include <wkam/mass_geometry.hpp>
#include <wkam/optim.hpp>

#include <random>
#include <vector>

namespace wkam {

/// A certified minimal central configuration: minimum of U on {I = 1, G = 0}.
struct MinimalConfiguration {
    Configuration a;
    double U0;
    double lagrange_residual;
    int multistart_count;
    std::vector<double> u_trace;   // accepted U values of the winning start (non-increasing)
};

/// First-order centrality defect ||grad U(x) + U(x) M x||_* on the sphere I(x) = 1.
/// Zero exactly at central configurations.
inline double centrality_residual(const Configuration& x) {
    const double inertia = moment_of_inertia(x);
    if (std::abs(inertia - 1.0) > 1e-8)
        throw std::invalid_argument("centrality_residual: configuration must satisfy I(x) = 1");
    const double u = potential(x);
    MatrixXd r = potential_gradient(x);
    r += u * (x.points.array().colwise() * x.masses.values().array()).matrix();
    return dual_norm(r, x.masses);
}

namespace detail {

/// Orthogonal change of frame fixing the rotation gauge: first (nonzero) body on
/// the positive first axis, second body in the upper half of the (1,2)-plane,
/// later axes sign-fixed by the first body with a nonzero component.
inline MatrixXd canonical_frame_transform(const MatrixXd& pts) {
    const Eigen::Index n = pts.rows(), d = pts.cols();
    const double tol = 1e-10 * std::max(config_scale(pts), 1e-300);

    MatrixXd q = MatrixXd::Zero(d, d);
    Eigen::Index built = 0;
    for (Eigen::Index i = 0; i < n && built < d; ++i) {
        Eigen::VectorXd v = pts.row(i).transpose();
        for (Eigen::Index k = 0; k < built; ++k) v -= q.col(k).dot(v) * q.col(k);
        if (v.norm() > tol) q.col(built++) = v / v.norm();
    }
    // pad with standard basis directions for degenerate (e.g. collinear) configurations
    for (Eigen::Index c = 0; c < d && built < d; ++c) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(d, c);
        for (Eigen::Index k = 0; k < built; ++k) v -= q.col(k).dot(v) * q.col(k);
        if (v.norm() > tol) q.col(built++) = v / v.norm();
    }

    // Gram-Schmidt over bodies already makes each pivot body's leading new
    // coordinate positive; fix remaining sign freedom on the padded axes.
    MatrixXd transformed = pts * q;
    for (Eigen::Index c = 0; c < d; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(transformed(i, c)) > tol) {
                if (transformed(i, c) < 0.0) q.col(c) = -q.col(c);
                break;
            }
        }
    }
    return q;
}

inline Configuration to_canonical_frame(const Configuration& x) {
    return Configuration(x.masses, x.points * canonical_frame_transform(x.points));
}

/// Random start on {I = 1, G = 0} avoiding near-collisions (min r_ij > 0.1/sqrt(N)).
inline MatrixXd random_sphere_start(const Masses& masses, Eigen::Index d, std::mt19937_64& rng) {
    const Eigen::Index n = masses.count();
    for (int attempt = 0; attempt < 1000; ++attempt) {
        MatrixXd pts(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j) pts(i, j) = normal_sample(rng);
        recenter(pts, masses);
        const double norm = mass_norm(pts, masses);
        if (norm < 1e-8) continue;
        pts /= norm;
        if (min_pair_distance(pts) > 0.1 / std::sqrt(static_cast<double>(n))) return pts;
    }
    throw std::runtime_error("random_sphere_start: could not sample a collision-free start");
}

/// Hessian of U as an (N d) x (N d) matrix in row-major body blocks.
inline MatrixXd potential_hessian(const MatrixXd& pts, const Masses& masses) {
    const Eigen::Index n = pts.rows(), d = pts.cols();
    MatrixXd h = MatrixXd::Zero(n * d, n * d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Eigen::VectorXd diff = (pts.row(i) - pts.row(j)).transpose();
            const double r = diff.norm();
            const Eigen::VectorXd u = diff / r;
            const MatrixXd block =
                masses[i] * masses[j] * (3.0 * u * u.transpose() - MatrixXd::Identity(d, d)) /
                (r * r * r);
            h.block(i * d, i * d, d, d) += block;
            h.block(j * d, j * d, d, d) += block;
            h.block(i * d, j * d, d, d) -= block;
            h.block(j * d, i * d, d, d) -= block;
        }
    return h;
}

struct SphereDescent {
    MatrixXd pts;
    double u_value;
    double tangent_grad_norm;
    std::vector<double> u_trace;
    bool converged;
};

/// Projected-gradient descent for U on {I = 1, G = 0} in the mass metric with
/// Armijo backtracking and renormalization after every step.
inline SphereDescent project_and_descend(MatrixXd pts, const Masses& masses, double grad_tol,
                                         int max_iters) {
    SphereDescent out{std::move(pts), 0.0, 0.0, {}, false};
    out.u_value = potential(out.pts, masses);
    out.u_trace.push_back(out.u_value);
    double step = 1.0;

    for (int it = 0; it < max_iters; ++it) {
        // mass-metric gradient, tangent to the sphere
        MatrixXd g = potential_gradient(out.pts, masses);
        g.array().colwise() /= masses.values().array();
        g -= mass_inner(g, out.pts, masses) * out.pts;
        const double gnorm = mass_norm(g, masses);
        out.tangent_grad_norm = gnorm;
        if (gnorm <= grad_tol) {
            out.converged = true;
            return out;
        }

        step = std::min(step * 2.0, 1e3 / std::max(gnorm, 1e-300));
        bool accepted = false;
        for (int ls = 0; ls < 80; ++ls) {
            MatrixXd trial = out.pts - step * g;
            recenter(trial, masses);
            trial /= mass_norm(trial, masses);
            double trial_u;
            try {
                trial_u = potential(trial, masses);
            } catch (const CollisionError&) {
                step *= 0.5;
                continue;
            }
            if (trial_u <= out.u_value - 1e-4 * step * gnorm * gnorm) {
                out.pts = std::move(trial);
                out.u_value = trial_u;
                out.u_trace.push_back(trial_u);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) return out;   // stalled: line search exhausted
    }
    return out;
}

/// Newton polish of the full Lagrange system
///   grad U + lambda M x + M (1 (x) nu) = 0,  (I - 1)/2 = 0,  G = 0
/// in the unknowns (x, lambda, nu).  Quadratic convergence near a central configuration.
inline bool newton_polish(MatrixXd& pts, const Masses& masses, int max_iters = 25) {
    const Eigen::Index n = pts.rows(), d = pts.cols();
    const Eigen::Index dim = n * d + 1 + d;
    double lambda = potential(pts, masses);
    VectorXd nu = VectorXd::Zero(d);

    for (int it = 0; it < max_iters; ++it) {
        const MatrixXd grad_u = potential_gradient(pts, masses);
        VectorXd f(dim);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < d; ++c)
                f[i * d + c] = grad_u(i, c) + lambda * masses[i] * pts(i, c) + masses[i] * nu[c];
        const double inertia = (masses.values().array() * pts.array().square().rowwise().sum()).sum();
        f[n * d] = 0.5 * (inertia - 1.0);
        for (Eigen::Index c = 0; c < d; ++c)
            f[n * d + 1 + c] = (masses.values().array() * pts.col(c).array()).sum();

        if (f.norm() < 1e-14) return true;

        MatrixXd jac = MatrixXd::Zero(dim, dim);
        jac.topLeftCorner(n * d, n * d) = potential_hessian(pts, masses);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < d; ++c) {
                jac(i * d + c, i * d + c) += lambda * masses[i];
                jac(i * d + c, n * d) = masses[i] * pts(i, c);            // d/d lambda
                jac(i * d + c, n * d + 1 + c) = masses[i];                // d/d nu_c
                jac(n * d, i * d + c) = masses[i] * pts(i, c);            // inertia row
                jac(n * d + 1 + c, i * d + c) = masses[i];                // center rows
            }

        const VectorXd delta = jac.fullPivLu().solve(-f);
        if (!delta.allFinite()) return false;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < d; ++c) pts(i, c) += delta[i * d + c];
        lambda += delta[n * d];
        nu += delta.tail(d);
        if (delta.norm() < 1e-15) return true;
    }
    return false;
}

}   // namespace detail

/// Best local minimum of U on {I = 1, G = 0} over `seeds` independent random starts.
/// Each start runs projected-gradient descent polished by a Newton step on the
/// Lagrange system; the reducer keeps the smallest U.  Deterministic given rng_seed
/// (start s uses its own stream seeded with rng_seed + s).
inline MinimalConfiguration minimize_on_sphere(const Masses& masses, Eigen::Index d,
                                               int seeds = 32, unsigned long long rng_seed = 0) {
    if (masses.count() < 2) throw ShapeError("minimize_on_sphere: need at least two bodies");
    if (d < 2) throw ShapeError("minimize_on_sphere: dimension must be >= 2");
    if (seeds < 1) throw std::invalid_argument("minimize_on_sphere: seeds must be positive");

    bool have_best = false;
    MatrixXd best_pts;
    double best_u = std::numeric_limits<double>::infinity();
    std::vector<double> best_trace;
    double best_failed_u = std::numeric_limits<double>::infinity();

    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(rng_seed + static_cast<unsigned long long>(s));
        MatrixXd start = detail::random_sphere_start(masses, d, rng);
        detail::SphereDescent run =
            detail::project_and_descend(std::move(start), masses, 1e-7, 4000);

        MatrixXd polished = run.pts;
        const bool certified = detail::newton_polish(polished, masses);
        if (!certified) {
            best_failed_u = std::min(best_failed_u, run.u_value);
            continue;
        }
        recenter(polished, masses);
        polished /= mass_norm(polished, masses);
        const double u = potential(polished, masses);
        if (u < best_u) {
            best_u = u;
            best_pts = std::move(polished);
            best_trace = std::move(run.u_trace);
            have_best = true;
        }
    }

    if (!have_best)
        throw ConvergenceError("minimize_on_sphere: no start converged within the iteration cap",
                               best_failed_u);

    Configuration a =
        detail::to_canonical_frame(Configuration(masses, std::move(best_pts)));
    const double residual = centrality_residual(a);
    return MinimalConfiguration{std::move(a), best_u, residual, seeds, std::move(best_trace)};
}

}   // namespace wkam

#endif
