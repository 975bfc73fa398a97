#ifndef WKAM_OPTIM_HPP
#define WKAM_OPTIM_HPP

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace wkam {

/// Standard normal via Box-Muller on raw engine bits.  std::normal_distribution
/// (and uniform_real_distribution) are implementation-defined, which would break
/// byte-identical outputs across standard libraries.
inline double normal_sample(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53;   // (0, 1]
    const double u2 = static_cast<double>(rng() >> 11) * 0x1p-53;           // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Uniform draw in [0, 1) from raw engine bits, for the same reproducibility reason.
inline double uniform_sample(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1p-53;
}

/// Thrown when an iterative solver exhausts its budget without meeting tolerance.
/// The message carries the best value reached so callers can report it.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& msg, double best) : std::runtime_error(msg), best_value(best) {}
    double best_value;
};

struct LbfgsOptions {
    int max_iters = 500;
    double grad_tol = 1e-8;        // stop when ||grad||_inf-free Euclidean norm falls below
    int memory = 10;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int max_linesearch = 60;
    /// Optional seed inverse Hessian P applied in place (q <- P q).  The two-loop
    /// recursion uses gamma * P with the secant scaling gamma = s.y / y.(P y);
    /// a spectrally equivalent P collapses mesh-dependent conditioning.
    std::function<void(Eigen::VectorXd&)> precondition;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    double grad_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Limited-memory BFGS with Armijo backtracking.  The objective is
/// f(x, grad) -> value and may return +infinity on infeasible points
/// (the line search backtracks past them; grad is only read at finite points).
template <class F>
LbfgsResult lbfgs_minimize(F&& f, Eigen::VectorXd x0, const LbfgsOptions& opts = {}) {
    using Eigen::VectorXd;
    const Eigen::Index n = x0.size();

    LbfgsResult res;
    res.x = std::move(x0);
    VectorXd grad(n);
    res.value = f(res.x, grad);
    if (!std::isfinite(res.value))
        throw std::invalid_argument("lbfgs_minimize: objective infinite at the start point");
    res.grad_norm = grad.norm();

    std::deque<std::pair<VectorXd, VectorXd>> pairs;   // (s, y) history
    double h0 = 1.0;                                   // scaling of the seed Hessian inverse
    bool memory_was_reset = false;

    for (res.iterations = 0; res.iterations < opts.max_iters; ++res.iterations) {
        if (res.grad_norm <= opts.grad_tol) {
            res.converged = true;
            return res;
        }

        // two-loop recursion
        VectorXd q = grad;
        std::vector<double> alpha(pairs.size());
        for (size_t i = pairs.size(); i-- > 0;) {
            const auto& [s, y] = pairs[i];
            alpha[i] = s.dot(q) / y.dot(s);
            q -= alpha[i] * y;
        }
        if (opts.precondition) opts.precondition(q);
        q *= h0;
        for (size_t i = 0; i < pairs.size(); ++i) {
            const auto& [s, y] = pairs[i];
            q += s * (alpha[i] - y.dot(q) / y.dot(s));
        }
        VectorXd dir = -q;
        double slope = grad.dot(dir);
        if (!(slope < 0.0)) {   // fall back to steepest descent on a bad direction
            dir = -grad;
            slope = -res.grad_norm * res.grad_norm;
        }

        // Armijo backtracking
        double step = 1.0;
        double trial_value = std::numeric_limits<double>::infinity();
        VectorXd trial_x, trial_grad(n);
        bool accepted = false;
        for (int ls = 0; ls < opts.max_linesearch; ++ls) {
            trial_x = res.x + step * dir;
            trial_value = f(trial_x, trial_grad);
            if (std::isfinite(trial_value) &&
                trial_value <= res.value + opts.armijo_c * step * slope) {
                accepted = true;
                break;
            }
            step *= opts.backtrack;
        }
        if (!accepted) {
            if (memory_was_reset || pairs.empty()) return res;   // converged stays false
            pairs.clear();                                       // retry from steepest descent
            h0 = 1.0;
            memory_was_reset = true;
            continue;
        }
        memory_was_reset = false;

        VectorXd s = trial_x - res.x;
        VectorXd y = trial_grad - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (opts.precondition) {
                VectorXd py = y;
                opts.precondition(py);
                h0 = sy / y.dot(py);
            } else {
                h0 = sy / y.squaredNorm();
            }
            pairs.emplace_back(std::move(s), std::move(y));
            if (static_cast<int>(pairs.size()) > opts.memory) pairs.pop_front();
        }
        res.x = std::move(trial_x);
        res.value = trial_value;
        grad = trial_grad;
        res.grad_norm = grad.norm();
    }
    res.converged = res.grad_norm <= opts.grad_tol;
    return res;
}

struct ScalarMinResult {
    double x = 0.0;
    double value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
};

/// Golden-section search for a scalar minimum on [a, b].
template <class F>
ScalarMinResult golden_min(F&& f, double a, double b, double xtol = 1e-10, int max_iters = 200) {
    if (!(a < b)) throw std::invalid_argument("golden_min: need a < b");
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    ScalarMinResult res;
    res.evaluations = 2;
    for (int it = 0; it < max_iters && (b - a) > xtol; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
        ++res.evaluations;
    }
    if (f1 <= f2) {
        res.x = x1;
        res.value = f1;
    } else {
        res.x = x2;
        res.value = f2;
    }
    return res;
}

struct NelderMeadOptions {
    int max_iters = 500;
    double xtol = 1e-9;
    double ftol = 1e-13;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Derivative-free simplex descent (reflection/expansion/contraction/shrink).
/// The objective may return +infinity outside its domain.
template <class F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& x0, double scale,
                             const NelderMeadOptions& opts = {}) {
    using Eigen::VectorXd;
    const Eigen::Index n = x0.size();
    std::vector<VectorXd> pts(static_cast<size_t>(n) + 1, x0);
    std::vector<double> vals(static_cast<size_t>(n) + 1);
    for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<size_t>(i) + 1][i] += scale;
    for (size_t i = 0; i < pts.size(); ++i) vals[i] = f(pts[i]);

    auto order = [&] {
        for (size_t i = 1; i < pts.size(); ++i) {   // insertion sort, simplex is tiny
            VectorXd p = pts[i];
            double v = vals[i];
            size_t j = i;
            while (j > 0 && vals[j - 1] > v) {
                pts[j] = pts[j - 1];
                vals[j] = vals[j - 1];
                --j;
            }
            pts[j] = std::move(p);
            vals[j] = v;
        }
    };
    order();

    NelderMeadResult res;
    for (res.iterations = 0; res.iterations < opts.max_iters; ++res.iterations) {
        double spread = 0.0;
        for (size_t i = 1; i < pts.size(); ++i)
            spread = std::max(spread, (pts[i] - pts[0]).lpNorm<Eigen::Infinity>());
        if (spread < opts.xtol ||
            (std::isfinite(vals.back()) && vals.back() - vals.front() < opts.ftol)) {
            res.converged = true;
            break;
        }

        VectorXd centroid = VectorXd::Zero(n);
        for (size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
        centroid /= static_cast<double>(n);

        const VectorXd reflected = centroid + (centroid - pts.back());
        const double fr = f(reflected);
        if (fr < vals[0]) {
            const VectorXd expanded = centroid + 2.0 * (centroid - pts.back());
            const double fe = f(expanded);
            if (fe < fr) {
                pts.back() = expanded;
                vals.back() = fe;
            } else {
                pts.back() = reflected;
                vals.back() = fr;
            }
        } else if (fr < vals[vals.size() - 2]) {
            pts.back() = reflected;
            vals.back() = fr;
        } else {
            const VectorXd contracted = centroid + 0.5 * (pts.back() - centroid);
            const double fc = f(contracted);
            if (fc < vals.back()) {
                pts.back() = contracted;
                vals.back() = fc;
            } else {
                for (size_t i = 1; i < pts.size(); ++i) {
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
                    vals[i] = f(pts[i]);
                }
            }
        }
        order();
    }
    res.x = pts[0];
    res.value = vals[0];
    return res;
}

}   // namespace wkam

#endif
