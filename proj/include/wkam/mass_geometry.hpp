#ifndef WKAM_MASS_GEOMETRY_HPP
#define WKAM_MASS_GEOMETRY_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace wkam {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Thrown when arguments have incompatible shapes (distinct from physical errors).
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Thrown when two bodies coincide and the potential is infinite.
class CollisionError : public std::domain_error {
public:
    explicit CollisionError(const std::string& msg) : std::domain_error(msg) {}
};

/// Thrown on invalid group data (non-skew or dependent generators, non-orthogonal rotations).
class GroupError : public std::invalid_argument {
public:
    explicit GroupError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Pairwise separations below COLLISION_REL_TOL times the configuration scale
/// count as collisions; the potential is treated as infinite there.
inline constexpr double COLLISION_REL_TOL = 1e-12;

/// Positive body masses m_1..m_N with their stored total.
class Masses {
public:
    explicit Masses(VectorXd values) : m_(std::move(values)), total_(0.0) {
        if (m_.size() < 1)
            throw ShapeError("Masses: need at least one body");
        for (Eigen::Index i = 0; i < m_.size(); ++i)
            if (!(m_[i] > 0.0) || !std::isfinite(m_[i]))
                throw std::invalid_argument("Masses: every mass must be positive and finite");
        total_ = m_.sum();
    }
    Masses(std::initializer_list<double> values)
        : Masses(Eigen::Map<const VectorXd>(values.begin(),
                                            static_cast<Eigen::Index>(values.size()))) {}

    const VectorXd& values() const { return m_; }
    double operator[](Eigen::Index i) const { return m_[i]; }
    Eigen::Index count() const { return m_.size(); }
    double total() const { return total_; }

    friend bool operator==(const Masses& a, const Masses& b) { return a.m_ == b.m_; }

private:
    VectorXd m_;
    double total_;
};

/// Positions of N point masses in R^d, one body per row.
struct Configuration {
    Masses masses;
    MatrixXd points;   // N x d

    Configuration(Masses m, MatrixXd pts) : masses(std::move(m)), points(std::move(pts)) {
        if (points.rows() != masses.count())
            throw ShapeError("Configuration: points rows != number of masses");
        if (points.cols() < 2)
            throw ShapeError("Configuration: spatial dimension must be >= 2");
    }

    Eigen::Index bodies() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }
};

/// Velocities paired with a Configuration of the same shape.
struct Velocity {
    MatrixXd v;   // N x d
};

inline void check_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(what) + ": shape mismatch");
}

inline void check_mass_shape(const MatrixXd& a, const Masses& m, const char* what) {
    if (a.rows() != m.count())
        throw ShapeError(std::string(what) + ": rows != number of masses");
}

/// Mass inner product  x . y = sum_i m_i <x_i, y_i>.
inline double mass_inner(const MatrixXd& x, const MatrixXd& y, const Masses& masses) {
    check_same_shape(x, y, "mass_inner");
    check_mass_shape(x, masses, "mass_inner");
    return (masses.values().array() * (x.array() * y.array()).rowwise().sum()).sum();
}

inline double mass_inner(const Configuration& x, const Configuration& y) {
    if (!(x.masses == y.masses))
        throw ShapeError("mass_inner: configurations carry different masses");
    return mass_inner(x.points, y.points, x.masses);
}

inline double mass_inner(const Velocity& a, const Velocity& b, const Masses& masses) {
    return mass_inner(a.v, b.v, masses);
}

inline double mass_norm(const MatrixXd& x, const Masses& masses) {
    return std::sqrt(mass_inner(x, x, masses));
}

/// Dual mass norm ||p||_*^2 = sum_i |p_i|^2 / m_i on covectors (see eikonal equation).
inline double dual_norm(const MatrixXd& p, const Masses& masses) {
    check_mass_shape(p, masses, "dual_norm");
    return std::sqrt((p.array().square().rowwise().sum() / masses.values().array()).sum());
}

/// Moment of inertia I(x) = ||x||^2.
inline double moment_of_inertia(const Configuration& x) {
    return mass_inner(x.points, x.points, x.masses);
}

/// Largest body distance from the origin; sets the scale for collision thresholds.
inline double config_scale(const MatrixXd& pts) {
    return pts.rowwise().norm().maxCoeff();
}

/// Smallest pairwise separation r_ij (i < j).
inline double min_pair_distance(const MatrixXd& pts) {
    const Eigen::Index n = pts.rows();
    double rmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            rmin = std::min(rmin, (pts.row(i) - pts.row(j)).norm());
    return rmin;
}

inline bool has_collision(const MatrixXd& pts) {
    if (pts.rows() < 2) return false;
    return min_pair_distance(pts) <= COLLISION_REL_TOL * config_scale(pts);
}

inline bool has_collision(const Configuration& x) { return has_collision(x.points); }

/// Newtonian potential U(x) = sum_{i<j} m_i m_j / r_ij.  Throws CollisionError on
/// coincident bodies (the potential is +infinity there, Omega is open).
inline double potential(const MatrixXd& pts, const Masses& masses) {
    check_mass_shape(pts, masses, "potential");
    const Eigen::Index n = pts.rows();
    const double collision_threshold = COLLISION_REL_TOL * config_scale(pts);
    double u = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double r = (pts.row(i) - pts.row(j)).norm();
            if (r <= collision_threshold)
                throw CollisionError("potential: bodies " + std::to_string(i) + " and " +
                                     std::to_string(j) + " collide (infinite potential)");
            u += masses[i] * masses[j] / r;
        }
    return u;
}

inline double potential(const Configuration& x) { return potential(x.points, x.masses); }

/// Euclidean gradient dU/dr_i = sum_{j != i} m_i m_j (r_j - r_i) / r_ij^3.
/// Satisfies the Euler identity <grad U(x), x> = -U(x) (homogeneity -1).
inline MatrixXd potential_gradient(const MatrixXd& pts, const Masses& masses) {
    check_mass_shape(pts, masses, "potential_gradient");
    const Eigen::Index n = pts.rows();
    const double collision_threshold = COLLISION_REL_TOL * config_scale(pts);
    MatrixXd g = MatrixXd::Zero(n, pts.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Eigen::RowVectorXd diff = pts.row(j) - pts.row(i);
            const double r = diff.norm();
            if (r <= collision_threshold)
                throw CollisionError("potential_gradient: collision between bodies " +
                                     std::to_string(i) + " and " + std::to_string(j));
            const Eigen::RowVectorXd f = (masses[i] * masses[j] / (r * r * r)) * diff;
            g.row(i) += f;
            g.row(j) -= f;
        }
    return g;
}

inline MatrixXd potential_gradient(const Configuration& x) {
    return potential_gradient(x.points, x.masses);
}

/// Center of mass G(x) = (1/M) sum_i m_i r_i.
inline Eigen::RowVectorXd center_of_mass(const MatrixXd& pts, const Masses& masses) {
    check_mass_shape(pts, masses, "center_of_mass");
    return (masses.values().transpose() * pts) / masses.total();
}

inline Eigen::RowVectorXd center_of_mass(const Configuration& x) {
    return center_of_mass(x.points, x.masses);
}

/// Translate so that the center of mass sits at the origin; returns the removed drift.
inline Eigen::RowVectorXd recenter(MatrixXd& pts, const Masses& masses) {
    const Eigen::RowVectorXd g = center_of_mass(pts, masses);
    pts.rowwise() -= g;
    return g;
}

/// Total angular momentum C(x,v) = sum_j m_j r_j /\ v_j, stored as the full
/// antisymmetric d x d matrix of bivector components for every dimension.
struct AngularMomentum {
    MatrixXd bivector;   // d x d, antisymmetric by construction

    /// Planar convention r /\ v = Im(v rbar); defined for d = 2.
    double scalar() const {
        if (bivector.rows() != 2)
            throw ShapeError("AngularMomentum::scalar: only defined for d = 2");
        return bivector(0, 1);
    }

    /// Usual cross-product vector; defined for d = 3.
    Eigen::Vector3d vector() const {
        if (bivector.rows() != 3)
            throw ShapeError("AngularMomentum::vector: only defined for d = 3");
        return {bivector(1, 2), bivector(2, 0), bivector(0, 1)};
    }

    /// Frobenius norm over independent entries; equals |scalar| for d=2 and the
    /// Euclidean norm of vector() for d=3.
    double norm() const { return bivector.norm() / std::sqrt(2.0); }
};

inline AngularMomentum angular_momentum(const Configuration& x, const Velocity& v) {
    check_same_shape(x.points, v.v, "angular_momentum");
    const MatrixXd a = x.points.transpose() * (x.masses.values().asDiagonal() * v.v);
    return AngularMomentum{a - a.transpose()};
}

/// Skew-symmetric generators xi_1..xi_k spanning the Lie algebra of a connected
/// subgroup of SO(d).  Validated antisymmetric and linearly independent.
class GroupGenerators {
public:
    GroupGenerators(Eigen::Index d, std::vector<MatrixXd> generators)
        : d_(d), xi_(std::move(generators)) {
        if (d_ < 2) throw GroupError("GroupGenerators: dimension must be >= 2");
        if (xi_.empty()) throw GroupError("GroupGenerators: need at least one generator");
        for (const MatrixXd& g : xi_) {
            if (g.rows() != d_ || g.cols() != d_)
                throw GroupError("GroupGenerators: generator is not d x d");
            if ((g + g.transpose()).lpNorm<Eigen::Infinity>() >
                1e-12 * std::max(1.0, g.lpNorm<Eigen::Infinity>()))
                throw GroupError("GroupGenerators: generator is not antisymmetric");
        }
        // independence via the Gram matrix of the flattened generators
        const Eigen::Index k = static_cast<Eigen::Index>(xi_.size());
        MatrixXd gram(k, k);
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < k; ++b)
                gram(a, b) = (xi_[a].array() * xi_[b].array()).sum();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
        if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
            throw GroupError("GroupGenerators: generators are linearly dependent");
    }

    Eigen::Index dim() const { return d_; }
    Eigen::Index count() const { return static_cast<Eigen::Index>(xi_.size()); }
    const MatrixXd& operator[](Eigen::Index k) const { return xi_[static_cast<size_t>(k)]; }
    const std::vector<MatrixXd>& generators() const { return xi_; }

    /// Generator of rotations taking axis i toward axis j.
    static MatrixXd plane(Eigen::Index d, Eigen::Index i, Eigen::Index j) {
        MatrixXd g = MatrixXd::Zero(d, d);
        g(j, i) = 1.0;
        g(i, j) = -1.0;
        return g;
    }

    /// Full so(d): all coordinate-plane generators, lexicographic order.
    static GroupGenerators full(Eigen::Index d) {
        std::vector<MatrixXd> gens;
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = i + 1; j < d; ++j)
                gens.push_back(plane(d, i, j));
        return GroupGenerators(d, std::move(gens));
    }

    /// so(3) with the axis-ordered basis, so momentum components match angular_momentum::vector().
    static GroupGenerators so3() {
        return GroupGenerators(3, {plane(3, 1, 2), plane(3, 2, 0), plane(3, 0, 1)});
    }

    /// One-parameter subgroup rotating plane (i,j); e.g. axis_rotation(3,0,1) is the z-axis group.
    static GroupGenerators axis_rotation(Eigen::Index d, Eigen::Index i, Eigen::Index j) {
        return GroupGenerators(d, {plane(d, i, j)});
    }

private:
    Eigen::Index d_;
    std::vector<MatrixXd> xi_;
};

/// Apply a generator bodywise:  (xi x)_i = xi r_i.
inline MatrixXd apply_generator(const MatrixXd& xi, const MatrixXd& pts) {
    return pts * xi.transpose();
}

/// Infinitesimal-generator fields { xi_k x } spanning the tangent of the group orbit at x.
struct TangentBasis {
    std::vector<MatrixXd> fields;
    Eigen::Index rank;   // numerical rank of the span in the mass metric
};

namespace detail {

/// Gram matrix of the generator fields at x in the mass metric.
inline MatrixXd orbit_gram(const std::vector<MatrixXd>& fields, const Masses& masses) {
    const Eigen::Index k = static_cast<Eigen::Index>(fields.size());
    MatrixXd gram(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = a; b < k; ++b)
            gram(a, b) = gram(b, a) =
                mass_inner(fields[static_cast<size_t>(a)], fields[static_cast<size_t>(b)], masses);
    return gram;
}

inline Eigen::Index gram_rank(const Eigen::SelfAdjointEigenSolver<MatrixXd>& es) {
    const VectorXd& ev = es.eigenvalues();
    const double tol = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > tol) ++r;
    return r;
}

}   // namespace detail

inline TangentBasis rotation_tangent_basis(const Configuration& x, const GroupGenerators& gens) {
    if (gens.dim() != x.dim())
        throw ShapeError("rotation_tangent_basis: generator dimension != configuration dimension");
    TangentBasis basis;
    for (Eigen::Index k = 0; k < gens.count(); ++k)
        basis.fields.push_back(apply_generator(gens[k], x.points));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(detail::orbit_gram(basis.fields, x.masses));
    basis.rank = detail::gram_rank(es);
    return basis;
}

/// Components of the equivariant momentum map, [mu(x,v), xi_k] = v . (xi_k x).
inline VectorXd momentum_map(const Configuration& x, const Velocity& v,
                             const GroupGenerators& gens) {
    check_same_shape(x.points, v.v, "momentum_map");
    if (gens.dim() != x.dim())
        throw ShapeError("momentum_map: generator dimension != configuration dimension");
    VectorXd mu(gens.count());
    for (Eigen::Index k = 0; k < gens.count(); ++k)
        mu[k] = mass_inner(v.v, apply_generator(gens[k], x.points), x.masses);
    return mu;
}

/// Saari decomposition v = v_vert + v_hor: v_vert in the orbit tangent span{xi_k x},
/// v_hor mass-orthogonal to it with vanishing momentum map.
struct SaariSplit {
    Velocity vertical;
    Velocity horizontal;
    VectorXd coefficients;   // v_vert = sum_k coefficients[k] * (xi_k x)
    Eigen::Index rank;
};

inline SaariSplit saari_decompose(const Configuration& x, const Velocity& v,
                                  const GroupGenerators& gens) {
    check_same_shape(x.points, v.v, "saari_decompose");
    TangentBasis basis;
    for (Eigen::Index k = 0; k < gens.count(); ++k)
        basis.fields.push_back(apply_generator(gens[k], x.points));
    const MatrixXd gram = detail::orbit_gram(basis.fields, x.masses);
    VectorXd b(gens.count());
    for (Eigen::Index k = 0; k < gens.count(); ++k)
        b[k] = mass_inner(v.v, basis.fields[static_cast<size_t>(k)], x.masses);

    // least squares in the mass metric; pseudo-inverse handles degenerate orbits
    // (continuous isotropy, e.g. collinear configurations in d = 3)
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
    const VectorXd& ev = es.eigenvalues();
    const double tol = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    VectorXd alpha = VectorXd::Zero(gens.count());
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > tol) {
            const VectorXd q = es.eigenvectors().col(i);
            alpha += q * (q.dot(b) / ev[i]);
            ++rank;
        }
    }

    MatrixXd vert = MatrixXd::Zero(x.bodies(), x.dim());
    for (Eigen::Index k = 0; k < gens.count(); ++k)
        vert += alpha[k] * basis.fields[static_cast<size_t>(k)];
    return SaariSplit{Velocity{vert}, Velocity{v.v - vert}, std::move(alpha), rank};
}

/// Diagonal rotation R_theta x = (theta r_1, ..., theta r_N).
inline Configuration rotate(const Configuration& x, const MatrixXd& theta) {
    if (theta.rows() != x.dim() || theta.cols() != x.dim())
        throw ShapeError("rotate: rotation matrix dimension mismatch");
    if ((theta.transpose() * theta - MatrixXd::Identity(theta.rows(), theta.cols()))
            .lpNorm<Eigen::Infinity>() > 1e-12)
        throw GroupError("rotate: matrix is not orthogonal");
    return Configuration(x.masses, x.points * theta.transpose());
}

/// exp: so(d) -> SO(d).  Closed form for d = 2,3; scaling-and-squaring series otherwise.
inline MatrixXd exp_skew(const MatrixXd& omega) {
    const Eigen::Index d = omega.rows();
    if (omega.cols() != d)
        throw ShapeError("exp_skew: matrix must be square");
    if ((omega + omega.transpose()).lpNorm<Eigen::Infinity>() >
        1e-12 * std::max(1.0, omega.lpNorm<Eigen::Infinity>()))
        throw GroupError("exp_skew: matrix is not antisymmetric");

    if (d == 2) {
        const double t = omega(1, 0);
        MatrixXd r(2, 2);
        r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
        return r;
    }
    if (d == 3) {
        // Rodrigues formula with series fallbacks near zero angle
        const Eigen::Vector3d w(omega(2, 1), omega(0, 2), omega(1, 0));
        const double t = w.norm();
        double a, b;   // sin t / t, (1 - cos t) / t^2
        if (t < 1e-4) {
            a = 1.0 - t * t / 6.0;
            b = 0.5 - t * t / 24.0;
        } else {
            a = std::sin(t) / t;
            b = (1.0 - std::cos(t)) / (t * t);
        }
        return MatrixXd::Identity(3, 3) + a * omega + b * (omega * omega);
    }

    // scaling and squaring with a truncated exponential series
    int squarings = 0;
    double norm = omega.lpNorm<Eigen::Infinity>();
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    const MatrixXd small = omega / std::ldexp(1.0, squarings);
    MatrixXd term = MatrixXd::Identity(d, d);
    MatrixXd result = term;
    for (int k = 1; k <= 24; ++k) {
        term = (term * small) / static_cast<double>(k);
        result += term;
        if (term.lpNorm<Eigen::Infinity>() < 1e-18) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

}   // namespace wkam

#endif
