#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphon/format.hpp"
#include "graphon/kernel.hpp"

namespace graphon {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based per-edge uniform in [0,1): depends only on (seed, i, j),
/// so sampling is order-independent and parallelizable over row blocks.
inline double edge_uniform(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(i + 1 + splitmix64(j + 1)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

enum class LatentScheme { deterministic, stochastic };

inline std::string to_string(LatentScheme s) {
    return s == LatentScheme::deterministic ? "deterministic" : "stochastic";
}

/// Latent positions X_1 <= ... <= X_n in (0,1]: either X_i = i/n exactly or
/// the order statistics of n i.i.d. uniforms.
struct LatentVariables {
    std::size_t n = 0;
    LatentScheme scheme = LatentScheme::deterministic;
    std::vector<double> points;
};

inline LatentVariables make_latents(std::size_t n, LatentScheme scheme,
                                    std::uint64_t seed = 0) {
    if (n == 0) throw std::invalid_argument("make_latents: n must be >= 1");
    LatentVariables lat;
    lat.n = n;
    lat.scheme = scheme;
    lat.points.resize(n);
    if (scheme == LatentScheme::deterministic) {
        for (std::size_t i = 0; i < n; ++i)
            lat.points[i] = static_cast<double>(i + 1) / static_cast<double>(n);
    } else {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < n; ++i) {
            // 1 - [0,1) keeps the draw inside (0,1].
            lat.points[i] = 1.0 - static_cast<double>(rng() >> 11) * 0x1.0p-53;
        }
        std::sort(lat.points.begin(), lat.points.end());
    }
    return lat;
}

struct SignedEdge {
    std::uint32_t i;  // 0-based, i < j
    std::uint32_t j;
    std::int8_t sign;
};

inline bool operator==(const SignedEdge& a, const SignedEdge& b) {
    return a.i == b.i && a.j == b.j && a.sign == b.sign;
}

/// Sampled signed graph: sparse symmetric +-1 entries with zero diagonal,
/// together with the sparsity eps and latent variables used at sampling.
struct SignedAdjacency {
    std::size_t n = 0;
    double eps = 1.0;
    std::uint64_t seed = 0;
    LatentVariables latents;
    std::vector<SignedEdge> edges;

    /// Unsigned degrees d_i = sum_j |A_ij|.
    std::vector<std::uint32_t> degrees() const {
        std::vector<std::uint32_t> d(n, 0);
        for (const auto& e : edges) {
            ++d[e.i];
            ++d[e.j];
        }
        return d;
    }
};

/// Draws A_ij = sign(W(X_i,X_j)) * Ber(eps |W(X_i,X_j)|) independently for
/// i < j. Same (kernel, latents, eps, seed) gives an identical graph.
inline SignedAdjacency sample_adjacency(const Kernel& k, const LatentVariables& lat,
                                        double eps, std::uint64_t seed) {
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("sample_adjacency: eps must be in (0,1]");
    SignedAdjacency adj;
    adj.n = lat.n;
    adj.eps = eps;
    adj.seed = seed;
    adj.latents = lat;
    for (std::size_t i = 0; i < lat.n; ++i) {
        const double xi = lat.points[i];
        for (std::size_t j = i + 1; j < lat.n; ++j) {
            const double w = k.evaluate(xi, lat.points[j]);
            if (w == 0.0) continue;
            const double p = eps * std::abs(w);
            if (detail::edge_uniform(seed, i, j) < p)
                adj.edges.push_back({static_cast<std::uint32_t>(i),
                                     static_cast<std::uint32_t>(j),
                                     static_cast<std::int8_t>(w > 0.0 ? 1 : -1)});
        }
    }
    return adj;
}

/// Expected-weight step graphon \bar W_n with matrix W(X_i, X_j),
/// diagonal included.
inline Kernel expected_matrix(const Kernel& k, const LatentVariables& lat) {
    const std::size_t n = lat.n;
    std::vector<double> v(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            v[i * n + j] = v[j * n + i] = k.evaluate(lat.points[i], lat.points[j]);
    return Kernel::grid(std::move(v), n, 1.0, !k.bounded());
}

/// Dense step-graphon kernel of the sampled graph, carrying the given scale
/// (typically eps^-1 or n*alpha_n).
inline Kernel step_graphon(const SignedAdjacency& adj, double scale) {
    const std::size_t n = adj.n;
    std::vector<double> v(n * n, 0.0);
    for (const auto& e : adj.edges) {
        v[static_cast<std::size_t>(e.i) * n + e.j] = e.sign;
        v[static_cast<std::size_t>(e.j) * n + e.i] = e.sign;
    }
    return Kernel::grid(std::move(v), n, scale);
}

/// Edge-probability schedules eps_n. Evaluation outside (0,1] is an error,
/// never a silent clamp.
class SparsitySchedule {
public:
    static SparsitySchedule constant(double c) {
        SparsitySchedule s;
        s.family_ = Family::constant;
        s.a_ = c;
        return s;
    }
    /// eps_n = n^-tau
    static SparsitySchedule power(double tau) {
        SparsitySchedule s;
        s.family_ = Family::power;
        s.a_ = tau;
        return s;
    }
    /// eps_n = c (log n)^q / n
    static SparsitySchedule polylog(double c, double q) {
        SparsitySchedule s;
        s.family_ = Family::polylog;
        s.a_ = c;
        s.b_ = q;
        return s;
    }

    double operator()(std::size_t n) const {
        double eps = 0.0;
        const double nn = static_cast<double>(n);
        switch (family_) {
            case Family::constant: eps = a_; break;
            case Family::power: eps = std::pow(nn, -a_); break;
            case Family::polylog: eps = a_ * std::pow(std::log(nn), b_) / nn; break;
        }
        if (!(eps > 0.0 && eps <= 1.0))
            throw std::invalid_argument("sparsity schedule: eps_n = " +
                                        std::to_string(eps) + " outside (0,1] at n = " +
                                        std::to_string(n));
        return eps;
    }

    std::string describe() const {
        std::ostringstream os;
        switch (family_) {
            case Family::constant: os << "constant(" << a_ << ")"; break;
            case Family::power: os << "power(" << a_ << ")"; break;
            case Family::polylog: os << "polylog(" << a_ << "," << b_ << ")"; break;
        }
        return os.str();
    }

private:
    enum class Family { constant, power, polylog };
    Family family_ = Family::constant;
    double a_ = 1.0;
    double b_ = 0.0;
};

// ---------------------------------------------------------------------------
// CSV export / import
// ---------------------------------------------------------------------------

/// Edge list `i,j,sign` (1-based, i < j) preceded by the sampling header.
inline void write_adjacency_csv(std::ostream& os, const SignedAdjacency& adj) {
    os << "# n=" << adj.n << " eps=" << format_double(adj.eps)
       << " seed=" << adj.seed
       << " scheme=" << (adj.latents.scheme == LatentScheme::deterministic ? "det" : "stoch")
       << "\n";
    os << "i,j,sign\n";
    for (const auto& e : adj.edges)
        os << (e.i + 1) << ',' << (e.j + 1) << ',' << static_cast<int>(e.sign) << "\n";
}

inline void write_latents_csv(std::ostream& os, const LatentVariables& lat) {
    os << "x\n";
    for (double x : lat.points) os << format_double(x) << "\n";
}

/// Rebuilds an adjacency from the CSV edge list. Deterministic latents are
/// reconstructed from n; stochastic runs need the exported latent points.
inline SignedAdjacency read_adjacency_csv(std::istream& is,
                                          const std::vector<double>* latent_points = nullptr) {
    SignedAdjacency adj;
    std::string line;
    bool have_meta = false;
    std::string scheme = "det";
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::stringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                const auto pos = tok.find('=');
                if (pos == std::string::npos) continue;
                const std::string key = tok.substr(0, pos), val = tok.substr(pos + 1);
                if (key == "n") adj.n = std::stoull(val);
                else if (key == "eps") adj.eps = std::stod(val);
                else if (key == "seed") adj.seed = std::stoull(val);
                else if (key == "scheme") scheme = val;
            }
            have_meta = have_meta || adj.n > 0;
            continue;
        }
        if (line.rfind("i,j,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw std::invalid_argument("adjacency csv: malformed row: " + line);
        const auto i = static_cast<std::uint32_t>(std::stoul(a) - 1);
        const auto j = static_cast<std::uint32_t>(std::stoul(b) - 1);
        adj.edges.push_back({i, j, static_cast<std::int8_t>(std::stoi(c))});
    }
    if (!have_meta)
        throw std::invalid_argument("adjacency csv: missing '# n=... eps=...' header");
    if (scheme == "det") {
        adj.latents = make_latents(adj.n, LatentScheme::deterministic);
    } else {
        if (latent_points == nullptr || latent_points->size() != adj.n)
            throw std::invalid_argument(
                "adjacency csv: stochastic scheme requires exported latent points");
        adj.latents.n = adj.n;
        adj.latents.scheme = LatentScheme::stochastic;
        adj.latents.points = *latent_points;
    }
    return adj;
}

}  // namespace graphon
