#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graphon/errors.hpp"

namespace graphon {

/// Index of the half-open cell I_i = ((i-1)/m, i/m] containing x, 0-based.
/// x = 0 is assigned to the first cell so lookup is total on [0,1].
inline std::size_t cell_index(double x, std::size_t m) {
    auto idx = static_cast<long long>(std::ceil(x * static_cast<double>(m)));
    if (idx < 1) idx = 1;
    if (idx > static_cast<long long>(m)) idx = static_cast<long long>(m);
    return static_cast<std::size_t>(idx - 1);
}

/// Midpoint of cell i (0-based) of the uniform m-partition of [0,1].
inline double cell_midpoint(std::size_t i, std::size_t m) {
    return (static_cast<double>(i) + 0.5) / static_cast<double>(m);
}

/// A signed kernel W on [0,1]^2: either an analytic symmetric evaluator or a
/// symmetric matrix of cell values over the uniform m-partition. A separate
/// nonnegative `scale` multiplier is applied on evaluation, which lets the
/// same storage represent eps^-1 * W_n or n*alpha_n * W_n without copying.
///
/// Unscaled values of ordinary kernels live in [-1,1]; difference kernels
/// waive that bound and are flagged unbounded.
class Kernel {
public:
    using Evaluator = std::function<double(double, double)>;

    static Kernel analytic(Evaluator f, double scale = 1.0) {
        Kernel k;
        k.eval_ = std::move(f);
        k.scale_ = check_scale(scale);
        return k;
    }

    /// Builds a grid kernel from row-major values. The matrix is symmetrized
    /// by averaging with its transpose, which makes it bitwise symmetric.
    static Kernel grid(std::vector<double> values, std::size_t resolution,
                       double scale = 1.0, bool allow_unbounded = false) {
        if (resolution == 0)
            throw std::invalid_argument("kernel: grid resolution must be >= 1");
        if (values.size() != resolution * resolution)
            throw std::invalid_argument("kernel: grid values must be m*m");
        Kernel k;
        k.res_ = resolution;
        k.scale_ = check_scale(scale);
        k.bounded_ = !allow_unbounded;
        k.cells_.resize(values.size());
        for (std::size_t i = 0; i < resolution; ++i)
            for (std::size_t j = 0; j < resolution; ++j)
                k.cells_[i * resolution + j] =
                    0.5 * (values[i * resolution + j] + values[j * resolution + i]);
        if (k.bounded_) {
            for (double v : k.cells_)
                if (!(std::abs(v) <= 1.0 + 1e-12))
                    throw std::invalid_argument(
                        "kernel: grid value outside [-1,1]: " + std::to_string(v));
        }
        return k;
    }

    bool is_grid() const noexcept { return res_ != 0; }
    std::size_t resolution() const noexcept { return res_; }
    double scale() const noexcept { return scale_; }
    bool bounded() const noexcept { return bounded_; }
    const std::vector<double>& cells() const { return cells_; }

    double cell(std::size_t i, std::size_t j) const { return cells_[i * res_ + j]; }

    /// Copy with a different scale multiplier.
    Kernel with_scale(double s) const {
        Kernel k = *this;
        k.scale_ = check_scale(s);
        return k;
    }

    /// Kernel value before the scale multiplier.
    double unscaled(double x, double y) const {
        check_point(x);
        check_point(y);
        if (is_grid())
            return cells_[cell_index(x, res_) * res_ + cell_index(y, res_)];
        return eval_(x, y);
    }

    /// scale * W(x,y). Throws std::domain_error outside [0,1]^2.
    double evaluate(double x, double y) const { return scale_ * unscaled(x, y); }

    double operator()(double x, double y) const { return evaluate(x, y); }

private:
    Kernel() = default;

    static double check_scale(double s) {
        if (!(s >= 0.0) || !std::isfinite(s))
            throw std::invalid_argument("kernel: scale must be finite and >= 0");
        return s;
    }

    static void check_point(double x) {
        if (!(x >= 0.0 && x <= 1.0))
            throw std::domain_error("kernel: point outside [0,1]");
    }

    Evaluator eval_;
    std::vector<double> cells_;
    std::size_t res_ = 0;
    double scale_ = 1.0;
    bool bounded_ = true;
};

/// Positive part, negative part and absolute value of a kernel,
/// W = pos - neg and |W| = pos + neg pointwise. Scale is preserved.
struct KernelParts {
    Kernel pos;
    Kernel neg;
    Kernel abs;
};

inline KernelParts split_parts(const Kernel& k) {
    if (k.is_grid()) {
        const std::size_t m = k.resolution();
        std::vector<double> p(m * m), q(m * m), a(m * m);
        for (std::size_t i = 0; i < m * m; ++i) {
            const double v = k.cells()[i];
            p[i] = std::max(v, 0.0);
            q[i] = std::max(-v, 0.0);
            a[i] = p[i] + q[i];
        }
        const bool unb = !k.bounded();
        return {Kernel::grid(std::move(p), m, k.scale(), unb),
                Kernel::grid(std::move(q), m, k.scale(), unb),
                Kernel::grid(std::move(a), m, k.scale(), unb)};
    }
    // The copies share the underlying evaluator.
    const Kernel base = k;
    auto pos = [base](double x, double y) { return std::max(base.unscaled(x, y), 0.0); };
    auto neg = [base](double x, double y) { return std::max(-base.unscaled(x, y), 0.0); };
    auto abs = [base](double x, double y) { return std::abs(base.unscaled(x, y)); };
    return {Kernel::analytic(pos, k.scale()), Kernel::analytic(neg, k.scale()),
            Kernel::analytic(abs, k.scale())};
}

/// Degree function d_W(x) = int W(x,y) dy sampled at the m cell midpoints.
/// Computed from |W| this gives the sup-degree and the L1 norm of W, since
/// the mean normalized degree of a step kernel equals its L1 norm.
struct DegreeProfile {
    std::vector<double> values;
    double sup = 0.0;
    double l1 = 0.0;
};

inline DegreeProfile degree_profile(const Kernel& k, std::size_t m) {
    if (m == 0) throw std::invalid_argument("degree_profile: m must be >= 1");
    DegreeProfile d;
    d.values.resize(m);
    if (k.is_grid() && m % k.resolution() == 0) {
        // Exact: row means of the matrix times scale, replicated per fine cell.
        const std::size_t r = k.resolution();
        const std::size_t q = m / r;
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < r; ++j) s += k.cell(i, j);
            const double v = k.scale() * s / static_cast<double>(r);
            for (std::size_t c = 0; c < q; ++c) d.values[i * q + c] = v;
        }
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            const double x = cell_midpoint(i, m);
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += k.evaluate(x, cell_midpoint(j, m));
            d.values[i] = s / static_cast<double>(m);
        }
    }
    d.sup = *std::max_element(d.values.begin(), d.values.end());
    d.l1 = std::accumulate(d.values.begin(), d.values.end(), 0.0) /
           static_cast<double>(m);
    return d;
}

enum class DiscretizeMode { midpoint, cell_average };

/// Grid kernel of resolution m sampling W at cell midpoints (default) or
/// averaging an s x s sub-grid per cell for kernels with jumps.
inline Kernel discretize(const Kernel& k, std::size_t m,
                         DiscretizeMode mode = DiscretizeMode::midpoint,
                         std::size_t subsamples = 4) {
    if (m == 0) throw std::invalid_argument("discretize: m must be >= 1");
    if (mode == DiscretizeMode::cell_average && subsamples == 0)
        throw std::invalid_argument("discretize: subsamples must be >= 1");
    std::vector<double> v(m * m);
    if (mode == DiscretizeMode::midpoint) {
        for (std::size_t i = 0; i < m; ++i) {
            const double x = cell_midpoint(i, m);
            for (std::size_t j = i; j < m; ++j)
                v[i * m + j] = v[j * m + i] = k.unscaled(x, cell_midpoint(j, m));
        }
    } else {
        const std::size_t s = subsamples;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i; j < m; ++j) {
                double acc = 0.0;
                for (std::size_t a = 0; a < s; ++a)
                    for (std::size_t b = 0; b < s; ++b) {
                        const double x = (static_cast<double>(i) +
                                          (static_cast<double>(a) + 0.5) / s) / m;
                        const double y = (static_cast<double>(j) +
                                          (static_cast<double>(b) + 0.5) / s) / m;
                        acc += k.unscaled(x, y);
                    }
                v[i * m + j] = v[j * m + i] = acc / static_cast<double>(s * s);
            }
    }
    return Kernel::grid(std::move(v), m, k.scale(), !k.bounded());
}

/// Nystrom quadrature of the integral operator: (T_W f)_i = (scale/m) sum_j M_ij f_j.
inline std::vector<double> apply_operator(const Kernel& k,
                                          std::span<const double> f) {
    if (!k.is_grid())
        throw std::invalid_argument("apply_operator: grid kernel required");
    const std::size_t m = k.resolution();
    if (f.size() != m)
        throw std::invalid_argument("apply_operator: vector length must equal resolution");
    std::vector<double> out(m);
    const double w = k.scale() / static_cast<double>(m);
    const double* M = k.cells().data();
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        const double* row = M + i * m;
        for (std::size_t j = 0; j < m; ++j) s += row[j] * f[j];
        out[i] = w * s;
    }
    return out;
}

/// Largest-in-modulus eigenvalue of (scale/m) M via power iteration on the
/// symmetric matrix. Start vector is all-ones plus a small alternating
/// perturbation; converged when successive Rayleigh quotients differ by less
/// than tol_rel times the current estimate.
inline double operator_norm(const Kernel& k, double tol_rel = 1e-10,
                            std::size_t max_iters = 10'000) {
    if (!k.is_grid())
        throw std::invalid_argument("operator_norm: grid kernel required");
    const std::size_t m = k.resolution();
    const double w = k.scale() / static_cast<double>(m);
    const double* M = k.cells().data();

    std::vector<double> v(m), av(m);
    for (std::size_t i = 0; i < m; ++i)
        v[i] = 1.0 + 1e-3 * (i % 2 == 0 ? 1.0 : -1.0);
    double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= nv;

    double rho_prev = std::numeric_limits<double>::infinity();
    double rho = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            const double* row = M + i * m;
            for (std::size_t j = 0; j < m; ++j) s += row[j] * v[j];
            av[i] = w * s;
        }
        rho = std::inner_product(v.begin(), v.end(), av.begin(), 0.0);
        const double nav =
            std::sqrt(std::inner_product(av.begin(), av.end(), av.begin(), 0.0));
        if (nav == 0.0) return 0.0;
        for (std::size_t i = 0; i < m; ++i) v[i] = av[i] / nav;
        if (it > 0 && std::abs(rho - rho_prev) <= tol_rel * std::abs(rho))
            return std::abs(rho);
        rho_prev = rho;
    }
    throw numeric_error("operator_norm: power iteration did not converge",
                        std::abs(rho));
}

/// operator_norm, falling back to the carried last estimate when the
/// Rayleigh stopping rule does not trigger (near-tied +-lambda pairs of
/// noise-like matrices; the estimate is then accurate to the order of the
/// spectral gap and errs low).
inline double operator_norm_estimate(const Kernel& k, double tol_rel = 1e-10,
                                     std::size_t max_iters = 10'000) {
    try {
        return operator_norm(k, tol_rel, max_iters);
    } catch (const numeric_error& e) {
        return e.payload();
    }
}

/// Grid kernel of resolution m holding a - b cellwise, scales folded in.
/// Differences may leave [-1,1], so the result is flagged unbounded.
/// Grid operands must have resolutions dividing m (common-refinement rule).
inline Kernel kernel_difference(const Kernel& a, const Kernel& b, std::size_t m) {
    if (m == 0) throw std::invalid_argument("kernel_difference: m must be >= 1");
    for (const Kernel* k : {&a, &b})
        if (k->is_grid() && m % k->resolution() != 0)
            throw std::invalid_argument(
                "kernel_difference: m must be a multiple of each grid resolution");
    std::vector<double> v(m * m);
    for (std::size_t i = 0; i < m; ++i) {
        const double x = cell_midpoint(i, m);
        for (std::size_t j = i; j < m; ++j) {
            const double y = cell_midpoint(j, m);
            v[i * m + j] = v[j * m + i] = a.evaluate(x, y) - b.evaluate(x, y);
        }
    }
    return Kernel::grid(std::move(v), m, 1.0, /*allow_unbounded=*/true);
}

// ---------------------------------------------------------------------------
// Built-in kernels
// ---------------------------------------------------------------------------

inline Kernel constant_kernel(double p) {
    return Kernel::grid({p}, 1);
}

/// Signed community-block kernel: values[r][c] on the uniform k-partition.
inline Kernel block_kernel(const std::vector<std::vector<double>>& values) {
    const std::size_t k = values.size();
    if (k == 0) throw std::invalid_argument("block_kernel: empty value matrix");
    std::vector<double> v(k * k);
    for (std::size_t i = 0; i < k; ++i) {
        if (values[i].size() != k)
            throw std::invalid_argument("block_kernel: value matrix must be square");
        for (std::size_t j = 0; j < k; ++j) v[i * k + j] = values[i][j];
    }
    return Kernel::grid(std::move(v), k);
}

inline Kernel product_kernel() {
    return Kernel::analytic([](double x, double y) { return x * y; });
}

/// W(x,y) = a cos(pi (x+y)), values in [-a, a].
inline Kernel polarized_kernel(double a) {
    if (!(std::abs(a) <= 1.0))
        throw std::invalid_argument("polarized_kernel: |a| must be <= 1");
    return Kernel::analytic(
        [a](double x, double y) { return a * std::cos(std::numbers::pi * (x + y)); });
}

/// Reads an m x m matrix from CSV, validates symmetry within 1e-12 and
/// boundedness, then symmetrizes.
inline Kernel grid_file_kernel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("grid_file_kernel: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        rows.push_back(std::move(row));
    }
    const std::size_t m = rows.size();
    if (m == 0) throw std::invalid_argument("grid_file_kernel: empty matrix in " + path);
    std::vector<double> v(m * m);
    for (std::size_t i = 0; i < m; ++i) {
        if (rows[i].size() != m)
            throw std::invalid_argument("grid_file_kernel: matrix must be square");
        for (std::size_t j = 0; j < m; ++j) v[i * m + j] = rows[i][j];
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(v[i * m + j] - v[j * m + i]) > 1e-12)
                throw std::invalid_argument("grid_file_kernel: matrix not symmetric");
    return Kernel::grid(std::move(v), m);
}

}  // namespace graphon
