#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "graphon/dynamics.hpp"
#include "graphon/kernel.hpp"
#include "graphon/sampler.hpp"

namespace graphon {

/// Exact L2 distance between two step functions on nested uniform
/// partitions: u_n over n cells, u_ref over M cells, n | M.
inline double l2_step_error(std::span<const double> u_n,
                            std::span<const double> u_ref) {
    const std::size_t n = u_n.size(), M = u_ref.size();
    if (n == 0 || M == 0 || M % n != 0)
        throw std::invalid_argument("l2_step_error: coarse size must divide fine size");
    const std::size_t q = M / n;
    double acc = 0.0;
    for (std::size_t c = 0; c < M; ++c) {
        const double d = u_ref[c] - u_n[c / q];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(M));
}

/// Per-run error metrics and the evaluated theoretical bound.
struct ErrorReport {
    std::vector<double> times;
    std::vector<double> l2_errors;     // ||(u - u_n)(.,t)||_2
    std::vector<double> bound_values;  // theoretical bound at each time
    double sup_error = 0.0;            // max over times
    double c_u_T = 0.0;                // esssup proxy: max |u_ref| over grid
    double op_norm_diff = 0.0;         // |||T_{W - n alpha_n W_n}|||
    double op_norm_diff_pos = 0.0;     // positive-part version (opposing)
    double op_norm_diff_neg = 0.0;     // negative-part version (opposing)
    double deg_sup = 0.0;              // ||d_{|W_n|}||_inf
    double g_error = 0.0;              // ||g - g_n||_2
};

/// L2 errors of a graph trajectory against a finer reference on the same
/// time grid; also records C_{u,T} from the reference.
inline ErrorReport trajectory_error(const OpinionTrajectory& traj_n,
                                    const OpinionTrajectory& traj_ref) {
    if (traj_n.times.size() != traj_ref.times.size())
        throw std::invalid_argument("trajectory_error: time grids differ in length");
    for (std::size_t s = 0; s < traj_n.times.size(); ++s)
        if (std::abs(traj_n.times[s] - traj_ref.times[s]) >
            1e-12 * std::max(1.0, traj_ref.times.back()))
            throw std::invalid_argument("trajectory_error: time grids differ");
    const std::size_t n = traj_n.states.front().size();
    const std::size_t M = traj_ref.states.front().size();
    if (M % n != 0)
        throw std::invalid_argument("trajectory_error: n must divide M");

    ErrorReport rep;
    rep.times = traj_n.times;
    rep.l2_errors.resize(rep.times.size());
    for (std::size_t s = 0; s < rep.times.size(); ++s) {
        rep.l2_errors[s] = l2_step_error(traj_n.states[s], traj_ref.states[s]);
        for (double v : traj_ref.states[s]) rep.c_u_T = std::max(rep.c_u_T, std::abs(v));
    }
    rep.sup_error = *std::max_element(rep.l2_errors.begin(), rep.l2_errors.end());
    return rep;
}

/// Evaluates the approximation-error bound at each time, substituting t for
/// the horizon (the Gronwall argument holds on every sub-interval):
///   repelling: (g_err + C/(n alpha deg) |||T_diff|||) exp(2 n alpha deg t)
///   opposing:  same with the sum of the +/- part norms and exponent 4.
inline std::vector<double> approximation_error_bound(Model model, double g_error, double c_u_T,
                                          std::span<const double> op_norms,
                                          double deg_sup, double n_alpha,
                                          std::span<const double> times) {
    if (op_norms.empty() || op_norms.size() > 2)
        throw std::invalid_argument("approximation_error_bound: one or two operator norms expected");
    for (double v : op_norms)
        if (!(v >= 0.0)) throw std::invalid_argument("approximation_error_bound: negative operator norm");
    if (!(g_error >= 0.0) || !(c_u_T >= 0.0) || !(deg_sup >= 0.0) || !(n_alpha >= 0.0))
        throw std::invalid_argument("approximation_error_bound: inputs must be nonnegative");

    double opn = op_norms[0];
    if (model == Model::opposing && op_norms.size() == 2) opn += op_norms[1];
    const double rate = n_alpha * deg_sup;
    double amplitude = g_error;
    if (opn > 0.0) {
        if (rate == 0.0)
            throw numeric_error(
                "approximation_error_bound: zero degree with nonzero operator norm (empty graph)");
        amplitude += c_u_T / rate * opn;
    }
    const double coeff = model == Model::repelling ? 2.0 : 4.0;
    std::vector<double> bound(times.size());
    for (std::size_t s = 0; s < times.size(); ++s)
        bound[s] = amplitude * std::exp(coeff * rate * times[s]);
    return bound;
}

/// Degree statistics of a sampled graph against its expectation.
struct DegreeReport {
    std::size_t n = 0;
    double eps = 1.0;
    double max_norm_deg = 0.0;   // delta_(n) = max_i d_i / n
    double avg_norm_deg = 0.0;   // ||W_n||_1, the mean normalized degree
    double scaled_max = 0.0;     // eps^-1 delta_(n)
    double scaled_avg = 0.0;     // eps^-1 ||W_n||_1
    double expected_max = 0.0;   // bar delta_(n) from bar W_n of |W|
    double bound_gamma = 0.0;    // sqrt(log(2n/nu) / (n eps))
};

/// Degrees count incident edges regardless of sign (d_i from |A|), matching
/// the reduction of signed degree analysis to |W|.
inline DegreeReport degree_report(const SignedAdjacency& adj, const Kernel& k,
                                  double nu) {
    if (!(nu > 0.0 && nu < 1.0))
        throw std::invalid_argument("degree_report: nu must be in (0,1)");
    DegreeReport rep;
    rep.n = adj.n;
    rep.eps = adj.eps;
    const auto deg = adj.degrees();
    double sum = 0.0;
    std::uint32_t dmax = 0;
    for (auto d : deg) {
        sum += d;
        dmax = std::max(dmax, d);
    }
    const auto nn = static_cast<double>(adj.n);
    rep.max_norm_deg = dmax / nn;
    rep.avg_norm_deg = sum / (nn * nn);
    rep.scaled_max = rep.max_norm_deg / adj.eps;
    rep.scaled_avg = rep.avg_norm_deg / adj.eps;

    const Kernel expected = expected_matrix(split_parts(k).abs, adj.latents);
    const DegreeProfile prof = degree_profile(expected, adj.n);
    rep.expected_max = prof.sup;
    rep.bound_gamma = std::sqrt(std::log(2.0 * nn / nu) / (nn * adj.eps));
    return rep;
}

/// Max gap between the sorted eps^-1-scaled sampled normalized degrees and
/// the sorted expected normalized degrees.
inline double sorted_degree_gap(const SignedAdjacency& adj, const Kernel& k) {
    const auto deg = adj.degrees();
    const auto nn = static_cast<double>(adj.n);
    std::vector<double> sampled(adj.n);
    for (std::size_t i = 0; i < adj.n; ++i) sampled[i] = deg[i] / nn / adj.eps;
    const Kernel expected = expected_matrix(split_parts(k).abs, adj.latents);
    std::vector<double> exp_deg = degree_profile(expected, adj.n).values;
    std::sort(sampled.begin(), sampled.end());
    std::sort(exp_deg.begin(), exp_deg.end());
    double gap = 0.0;
    for (std::size_t i = 0; i < adj.n; ++i)
        gap = std::max(gap, std::abs(sampled[i] - exp_deg[i]));
    return gap;
}

}  // namespace graphon
