#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graphon/errors.hpp"
#include "graphon/format.hpp"
#include "graphon/kernel.hpp"
#include "graphon/sampler.hpp"

namespace graphon {

enum class Model { repelling, opposing };

inline std::string to_string(Model m) {
    return m == Model::repelling ? "repelling" : "opposing";
}

struct TrajectorySource {
    enum class Kind { graph, graphon_grid } kind = Kind::graph;
    std::size_t size = 0;
    double eps = 1.0;  // meaningful for graph sources only
};

/// One dynamics run: opinion vectors recorded on a uniform time grid.
struct OpinionTrajectory {
    Model model = Model::repelling;
    double alpha = 1.0;
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    TrajectorySource source;

    const std::vector<double>& initial() const { return states.front(); }
    const std::vector<double>& final_state() const { return states.back(); }
};

/// Initial opinion distribution: a bounded evaluator on [0,1] or a vector.
class InitialCondition {
public:
    using Evaluator = std::function<double(double)>;

    static InitialCondition analytic(Evaluator f) {
        // Bounded-on-probe-grid check catches evaluators with poles early.
        for (std::size_t i = 0; i < 10'000; ++i) {
            const double x = (static_cast<double>(i) + 0.5) / 10'000.0;
            if (!std::isfinite(f(x)))
                throw std::invalid_argument(
                    "initial condition: evaluator not finite at x = " + std::to_string(x));
        }
        InitialCondition ic;
        ic.eval_ = std::move(f);
        return ic;
    }

    static InitialCondition vector(std::vector<double> v) {
        if (v.empty()) throw std::invalid_argument("initial condition: empty vector");
        for (double x : v)
            if (!std::isfinite(x))
                throw std::invalid_argument("initial condition: non-finite entry");
        InitialCondition ic;
        ic.values_ = std::move(v);
        return ic;
    }

    bool is_analytic() const noexcept { return static_cast<bool>(eval_); }
    double operator()(double x) const { return eval_(x); }
    const std::vector<double>& values() const { return values_; }

private:
    InitialCondition() = default;
    Evaluator eval_;
    std::vector<double> values_;
};

inline InitialCondition linear_initial() {
    return InitialCondition::analytic([](double x) { return x; });
}

inline InitialCondition sine_initial(double k) {
    return InitialCondition::analytic(
        [k](double x) { return std::sin(2.0 * std::numbers::pi * k * x); });
}

/// Two-level polarization: a on (0, 1/2], b on (1/2, 1].
inline InitialCondition step_initial(double a, double b) {
    return InitialCondition::analytic([a, b](double x) { return x <= 0.5 ? a : b; });
}

inline InitialCondition constant_initial(double c) {
    return InitialCondition::analytic([c](double) { return c; });
}

namespace detail {

/// Right-hand sides of the two models on a grid kernel's raw matrix
/// (kernel scale ignored; the rate enters through alpha only).
/// repelling: du_i = alpha sum_j M_ij (u_j - u_i)
/// opposing:  du_i = alpha (sum_j M_ij u_j - sum_j |M_ij| u_i)
class RhsOperator {
public:
    RhsOperator(const Kernel& k, Model model, double alpha)
        : M_(k.cells().data()), n_(k.resolution()), alpha_(alpha) {
        diag_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) {
                const double v = M_[i * n_ + j];
                s += model == Model::repelling ? v : std::abs(v);
            }
            diag_[i] = s;
        }
    }

    void operator()(std::span<const double> u, std::span<double> out) const {
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            const double* row = M_ + i * n_;
            for (std::size_t j = 0; j < n_; ++j) s += row[j] * u[j];
            out[i] = alpha_ * (s - diag_[i] * u[i]);
        }
    }

private:
    const double* M_;
    std::size_t n_;
    double alpha_;
    std::vector<double> diag_;
};

inline void check_dimension(const Kernel& k, std::size_t len, const char* who) {
    if (!k.is_grid())
        throw std::invalid_argument(std::string(who) + ": grid kernel required");
    if (k.resolution() != len)
        throw std::invalid_argument(std::string(who) +
                                    ": state length must equal kernel resolution");
}

}  // namespace detail

inline std::vector<double> rhs(Model model, const Kernel& k, double alpha,
                               std::span<const double> u) {
    detail::check_dimension(k, u.size(), "rhs");
    std::vector<double> out(u.size());
    detail::RhsOperator(k, model, alpha)(u, out);
    return out;
}

/// Classical fixed-step RK4 over [0,T] with states recorded at every step.
/// h must divide T within 1e-12 relative.
inline OpinionTrajectory integrate(Model model, const Kernel& k, double alpha,
                                   std::vector<double> g, double T, double h,
                                   TrajectorySource source = {}) {
    detail::check_dimension(k, g.size(), "integrate");
    if (!(h > 0.0)) throw std::invalid_argument("integrate: h must be > 0");
    if (!(T >= 0.0)) throw std::invalid_argument("integrate: T must be >= 0");
    const auto steps = static_cast<std::size_t>(std::llround(T / h));
    if (std::abs(static_cast<double>(steps) * h - T) > 1e-12 * std::max(1.0, T))
        throw std::invalid_argument("integrate: h must divide T");

    const std::size_t n = g.size();
    if (source.size == 0) source.size = n;
    OpinionTrajectory traj;
    traj.model = model;
    traj.alpha = alpha;
    traj.source = source;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.times.push_back(0.0);
    traj.states.push_back(g);

    const detail::RhsOperator f(k, model, alpha);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    std::vector<double> u = std::move(g);
    for (std::size_t s = 0; s < steps; ++s) {
        f(u, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k1[i];
        f(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k2[i];
        f(tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + h * k3[i];
        f(tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        const double t = static_cast<double>(s + 1) * h;
        for (double x : u)
            if (!std::isfinite(x))
                throw numeric_error("integrate: non-finite state at t = " +
                                        format_double(t), t);
        traj.times.push_back(t);
        traj.states.push_back(u);
    }
    return traj;
}

/// Nystrom solution of the graphon dynamics: discretize W at resolution M,
/// evaluate g at cell midpoints and integrate with alpha = scale/M.
inline OpinionTrajectory solve_graphon(Model model, const Kernel& k,
                                       const InitialCondition& g, double T,
                                       double h, std::size_t M) {
    if (M == 0) throw std::invalid_argument("solve_graphon: M must be >= 1");
    const Kernel disc = discretize(k, M);
    std::vector<double> g0(M);
    if (g.is_analytic()) {
        for (std::size_t i = 0; i < M; ++i) g0[i] = g(cell_midpoint(i, M));
    } else {
        if (g.values().size() != M)
            throw std::invalid_argument("solve_graphon: vector initial condition must have length M");
        g0 = g.values();
    }
    TrajectorySource src{TrajectorySource::Kind::graphon_grid, M, 1.0};
    return integrate(model, disc, k.scale() / static_cast<double>(M), std::move(g0),
                     T, h, src);
}

/// Piece-wise constant sampling of an analytic initial condition:
/// (g(X_1), ..., g(X_n)).
inline std::vector<double> sample_initial(const InitialCondition& g,
                                          const LatentVariables& lat) {
    if (!g.is_analytic())
        throw std::invalid_argument("sample_initial: analytic initial condition required");
    std::vector<double> out(lat.n);
    for (std::size_t i = 0; i < lat.n; ++i) out[i] = g(lat.points[i]);
    return out;
}

/// Per-window iteration deltas of the Picard solve, for contraction checks.
struct PicardStats {
    std::vector<std::vector<double>> window_deltas;
};

/// Fixed-point oracle: iterates u <- g + int_0^t rhs(u(s)) ds on successive
/// windows of length min(T, 1/(8 sup |alpha n W|)), each iterate evaluated on
/// a uniform grid with trapezoidal time quadrature. Independent of the RK4
/// path; used to cross-validate integrate().
inline OpinionTrajectory picard_solve(Model model, const Kernel& k, double alpha,
                                      std::vector<double> g, double T,
                                      std::size_t n_steps = 64,
                                      std::size_t iters = 200,
                                      PicardStats* stats = nullptr) {
    detail::check_dimension(k, g.size(), "picard_solve");
    if (!(T >= 0.0)) throw std::invalid_argument("picard_solve: T must be >= 0");
    if (n_steps == 0 || iters == 0)
        throw std::invalid_argument("picard_solve: n_steps and iters must be >= 1");

    const std::size_t n = g.size();
    OpinionTrajectory traj;
    traj.model = model;
    traj.alpha = alpha;
    traj.source = TrajectorySource{TrajectorySource::Kind::graph, n, 1.0};
    traj.times.push_back(0.0);
    traj.states.push_back(g);
    if (T == 0.0) return traj;

    double sup_w = 0.0;
    for (double v : k.cells()) sup_w = std::max(sup_w, std::abs(v));
    sup_w *= std::abs(alpha) * static_cast<double>(n);
    // Contraction constant 4 ||W||_inf tau <= 1/2 per window.
    const double tau_max = sup_w > 0.0 ? 1.0 / (8.0 * sup_w) : T;
    const auto n_windows =
        static_cast<std::size_t>(std::max(1.0, std::ceil(T / tau_max - 1e-12)));
    const double tau = T / static_cast<double>(n_windows);
    const double delta = tau / static_cast<double>(n_steps);

    const detail::RhsOperator f(k, model, alpha);
    std::vector<std::vector<double>> u(n_steps + 1, g), nu(n_steps + 1),
        F(n_steps + 1, std::vector<double>(n));
    std::vector<double> start = std::move(g);

    for (std::size_t w = 0; w < n_windows; ++w) {
        for (auto& uk : u) uk = start;
        if (stats) stats->window_deltas.emplace_back();
        bool converged = false;
        double diff = 0.0;
        for (std::size_t it = 0; it < iters; ++it) {
            for (std::size_t s = 0; s <= n_steps; ++s) f(u[s], F[s]);
            nu[0] = start;
            std::vector<double> acc(n, 0.0);
            for (std::size_t s = 1; s <= n_steps; ++s) {
                for (std::size_t i = 0; i < n; ++i)
                    acc[i] += 0.5 * delta * (F[s - 1][i] + F[s][i]);
                nu[s].resize(n);
                for (std::size_t i = 0; i < n; ++i) nu[s][i] = start[i] + acc[i];
            }
            diff = 0.0;
            for (std::size_t s = 0; s <= n_steps; ++s)
                for (std::size_t i = 0; i < n; ++i)
                    diff = std::max(diff, std::abs(nu[s][i] - u[s][i]));
            u.swap(nu);
            if (stats) stats->window_deltas.back().push_back(diff);
            if (diff < 1e-10) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw numeric_error("picard_solve: window " + std::to_string(w) +
                                    " did not converge, residual " + format_double(diff),
                                diff);
        const double t0 = static_cast<double>(w) * tau;
        for (std::size_t s = 1; s <= n_steps; ++s) {
            traj.times.push_back(t0 + static_cast<double>(s) * delta);
            traj.states.push_back(u[s]);
        }
        start = u[n_steps];
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Trajectory CSV export
// ---------------------------------------------------------------------------

enum class TrajectoryLayout { long_format, wide };

inline void write_trajectory_csv(std::ostream& os, const OpinionTrajectory& traj,
                                 TrajectoryLayout layout = TrajectoryLayout::long_format) {
    if (layout == TrajectoryLayout::long_format) {
        os << "t,i,u\n";
        for (std::size_t s = 0; s < traj.times.size(); ++s)
            for (std::size_t i = 0; i < traj.states[s].size(); ++i)
                os << format_double(traj.times[s]) << ',' << (i + 1) << ','
                   << format_double(traj.states[s][i]) << "\n";
    } else {
        os << "t";
        for (std::size_t i = 0; i < traj.states.front().size(); ++i)
            os << ",u_" << (i + 1);
        os << "\n";
        for (std::size_t s = 0; s < traj.times.size(); ++s) {
            os << format_double(traj.times[s]);
            for (double v : traj.states[s]) os << ',' << format_double(v);
            os << "\n";
        }
    }
}

}  // namespace graphon
