#pragma once

/**
 * @file intersection.hpp
 * @brief Mutual intersection measure of p independent Brownian motions.
 *
 * Each process i contributes a mollified occupation density
 *
 *     A_i(x) = h Σ_{jh < t_i} p_ε(x, X^{(i)}_{jh})
 *
 * on a regular grid, and the field is the product of the A_i. Pairings with a
 * compactly supported f are midpoint sums over the grid. The first two moments
 * of the ε → 0 limit are available by quadrature for comparison.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <gsl/gsl_sf_expint.h>

#include "kkl/diagnostics.hpp"
#include "kkl/errors.hpp"
#include "kkl/kernels.hpp"
#include "kkl/measures.hpp"
#include "kkl/parallel.hpp"
#include "kkl/quadrature.hpp"

namespace kkl {

struct SimConfig {
    int d = 1;
    int p = 2;
    std::vector<Point> starts;
    double h = 0.01;
    double T = 1.0;
    double epsilon = 0.05;
    Lattice grid;
    std::uint64_t seed = 0;
    int replicas = 1;

    /// Number of time steps of length h up to T.
    std::size_t steps() const { return static_cast<std::size_t>(std::llround(T / h)); }
    double cell_diameter() const {
        double s = 0.0;
        for (int k = 0; k < grid.dimension(); ++k) s += grid.spacing(k) * grid.spacing(k);
        return std::sqrt(s);
    }
    double cell_volume() const {
        double v = 1.0;
        for (int k = 0; k < grid.dimension(); ++k) v *= grid.spacing(k);
        return v;
    }
};

/// The exponent (d − p(d−2)) / (2p) that bounds the Hölder order of the pairing.
inline double intersection_delta(int d, int p) {
    return static_cast<double>(d - p * (d - 2)) / (2.0 * p);
}

namespace detail {

inline void check_grid_resolution(const SimConfig& cfg, double epsilon) {
    require(cfg.cell_diameter() <= epsilon / 2 * (1 + 1e-12),
            "grid cell diameter must be at most epsilon/2");
}

}  // namespace detail

inline void validate(const SimConfig& cfg) {
    require(cfg.d == 1 || cfg.d == 2, "d must be 1 or 2");
    require(cfg.p >= 2, "p must be an integer >= 2");
    require(cfg.d - cfg.p * (cfg.d - 2) > 0, "d - p(d-2) must be positive");
    require(cfg.starts.size() == static_cast<std::size_t>(cfg.p), "starts must list p points");
    for (const auto& s : cfg.starts)
        require(s.size() == static_cast<std::size_t>(cfg.d), "each start must have d coordinates");
    require(std::isfinite(cfg.h) && cfg.h > 0, "h must be positive");
    require(std::isfinite(cfg.T) && cfg.T > 0, "T must be positive");
    require(std::isfinite(cfg.epsilon) && cfg.epsilon > 0, "epsilon must be positive");
    require(cfg.h <= cfg.epsilon * (1 + 1e-12), "h must not exceed epsilon");
    const double n = cfg.T / cfg.h;
    require(n >= 1 && std::fabs(n - std::round(n)) <= 1e-9 * n, "T must be a multiple of h");
    require(cfg.replicas >= 1, "replicas must be positive");
    const Lattice& g = cfg.grid;
    require(g.dimension() == cfg.d && g.lower.size() == g.shape.size() &&
                g.upper.size() == g.shape.size(),
            "grid must have d axes");
    for (int k = 0; k < cfg.d; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        require(g.shape[ku] >= 1 && g.upper[ku] > g.lower[ku], "grid axes must be non-empty");
    }
    const double margin = 3.0 * std::sqrt(cfg.T);
    for (const auto& s : cfg.starts)
        for (std::size_t k = 0; k < s.size(); ++k)
            require(s[k] - margin >= g.lower[k] - 1e-12 && s[k] + margin <= g.upper[k] + 1e-12,
                    "grid box must contain every start with margin 3*sqrt(T)");
    detail::check_grid_resolution(cfg, cfg.epsilon);
}

// -- paths -------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the sub-stream driving process i in replica r. Every (r, i) pair
/// owns its own generator, so any path can be regenerated on its own.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replica, std::uint64_t process,
                                 std::uint64_t p) {
    return splitmix64(master ^ splitmix64(replica * p + process));
}

/// Positions at times 0, h, ..., T, stored flat with d coordinates per sample.
struct Path {
    int d = 1;
    std::vector<double> coords;

    std::size_t samples() const { return coords.size() / static_cast<std::size_t>(d); }
    const double* at(std::size_t j) const { return coords.data() + j * static_cast<std::size_t>(d); }
};

inline Path simulate_path(const SimConfig& cfg, std::size_t replica, std::size_t process) {
    Path path;
    path.d = cfg.d;
    const std::size_t n = cfg.steps();
    const auto d = static_cast<std::size_t>(cfg.d);
    path.coords.resize((n + 1) * d);
    std::mt19937_64 gen(stream_seed(cfg.seed, replica, process, static_cast<std::uint64_t>(cfg.p)));
    std::normal_distribution<double> normal(0.0, std::sqrt(cfg.h));
    const Point& x0 = cfg.starts[process];
    for (std::size_t k = 0; k < d; ++k) path.coords[k] = x0[k];
    for (std::size_t j = 1; j <= n; ++j)
        for (std::size_t k = 0; k < d; ++k)
            path.coords[j * d + k] = path.coords[(j - 1) * d + k] + normal(gen);
    return path;
}

/// The p paths of one replica.
inline std::vector<Path> simulate_replica(const SimConfig& cfg, std::size_t replica) {
    std::vector<Path> paths;
    paths.reserve(static_cast<std::size_t>(cfg.p));
    for (int i = 0; i < cfg.p; ++i) paths.push_back(simulate_path(cfg, replica, static_cast<std::size_t>(i)));
    return paths;
}

struct PathEnsemble {
    int d = 1;
    int p = 2;
    double h = 0.0;
    std::uint64_t seed = 0;
    /// Replica-major: paths[r][i] is process i of replica r.
    std::vector<std::vector<Path>> paths;

    std::size_t replicas() const { return paths.size(); }
};

inline PathEnsemble simulate_paths(const SimConfig& cfg) {
    validate(cfg);
    PathEnsemble ens{cfg.d, cfg.p, cfg.h, cfg.seed, {}};
    ens.paths.resize(static_cast<std::size_t>(cfg.replicas));
    parallel_for(ens.paths.size(), [&](std::size_t r) { ens.paths[r] = simulate_replica(cfg, r); });
    return ens;
}

// -- test functions for pairings ---------------------------------------------

/// A bounded function with compact support, the only kind the moment formula admits.
struct PairingFunction {
    std::function<double(const Point&)> value;
    Box support;
    double sup_norm = 1.0;
    std::string name;

    static PairingFunction indicator(Box box, double level = 1.0) {
        require(box.lower.size() == box.upper.size() && !box.lower.empty(),
                "indicator box needs matching non-empty corners");
        for (std::size_t k = 0; k < box.lower.size(); ++k)
            require(std::isfinite(box.lower[k]) && std::isfinite(box.upper[k]) &&
                        box.upper[k] > box.lower[k],
                    "f must have compact support");
        PairingFunction f;
        f.support = box;
        f.sup_norm = std::fabs(level);
        f.name = "indicator";
        f.value = [box, level](const Point& x) {
            for (std::size_t k = 0; k < x.size(); ++k)
                if (x[k] < box.lower[k] || x[k] > box.upper[k]) return 0.0;
            return level;
        };
        return f;
    }

    double operator()(const Point& x) const { return value(x); }
    int dimension() const { return static_cast<int>(support.lower.size()); }
};

// -- approximated intersection field -----------------------------------------

struct IntersectionField {
    Lattice grid;
    double cell_volume = 0.0;
    std::vector<double> values;

    /// Midpoint quadrature of f against the field.
    double pairing(const PairingFunction& f) const {
        double s = 0.0;
        for (std::size_t c = 0; c < values.size(); ++c)
            if (values[c] != 0.0) s += f(grid.center(c)) * values[c];
        return s * cell_volume;
    }
};

namespace detail {

/// Number of left endpoints jh with jh < t.
inline std::size_t left_endpoints(double t, double h, std::size_t steps) {
    if (t <= 0.0) return 0;
    const double n = std::ceil(t / h - 1e-9);
    return std::min(steps, static_cast<std::size_t>(std::max(0.0, n)));
}

// Beyond this many standard deviations the mollifier is below 1e-31 of its peak.
inline constexpr double kMollifierReach = 12.0;

/// A_i on the grid after each requested number of left endpoints (sorted).
inline std::vector<std::vector<double>> occupation_profiles(const Path& path, const Lattice& grid,
                                                            double epsilon, double h,
                                                            const std::vector<std::size_t>& counts) {
    const std::size_t cells = grid.cell_count();
    const int d = path.d;
    std::vector<std::vector<double>> out(counts.size());
    std::vector<double> acc(cells, 0.0);
    const double norm = h / std::pow(2.0 * std::numbers::pi * epsilon, d / 2.0);
    const double reach = kMollifierReach * std::sqrt(epsilon);
    std::size_t next = 0;
    auto flush = [&](std::size_t done) {
        while (next < counts.size() && counts[next] == done) out[next++] = acc;
    };
    flush(0);
    const std::size_t last = counts.empty() ? 0 : counts.back();
    std::vector<double> axis_weight;
    for (std::size_t j = 0; j < last; ++j) {
        const double* x = path.at(j);
        // Index ranges of cells within reach along each axis.
        std::vector<std::size_t> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
        bool empty = false;
        for (int k = 0; k < d; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const double sp = grid.spacing(k);
            const double a = std::floor((x[ku] - reach - grid.lower[ku]) / sp);
            const double b = std::ceil((x[ku] + reach - grid.lower[ku]) / sp);
            const double n = grid.shape[ku];
            lo[ku] = static_cast<std::size_t>(std::clamp(a, 0.0, n));
            hi[ku] = static_cast<std::size_t>(std::clamp(b, 0.0, n));
            if (lo[ku] >= hi[ku]) empty = true;
        }
        if (!empty) {
            if (d == 1) {
                const double sp = grid.spacing(0);
                for (std::size_t c = lo[0]; c < hi[0]; ++c) {
                    const double z = grid.lower[0] + (static_cast<double>(c) + 0.5) * sp - x[0];
                    acc[c] += norm * std::exp(-z * z / (2 * epsilon));
                }
            } else {
                const double s0 = grid.spacing(0), s1 = grid.spacing(1);
                const auto n1 = static_cast<std::size_t>(grid.shape[1]);
                axis_weight.assign(hi[1] - lo[1], 0.0);
                for (std::size_t c = lo[1]; c < hi[1]; ++c) {
                    const double z = grid.lower[1] + (static_cast<double>(c) + 0.5) * s1 - x[1];
                    axis_weight[c - lo[1]] = std::exp(-z * z / (2 * epsilon));
                }
                for (std::size_t r = lo[0]; r < hi[0]; ++r) {
                    const double z = grid.lower[0] + (static_cast<double>(r) + 0.5) * s0 - x[0];
                    const double w = norm * std::exp(-z * z / (2 * epsilon));
                    for (std::size_t c = lo[1]; c < hi[1]; ++c) acc[r * n1 + c] += w * axis_weight[c - lo[1]];
                }
            }
        }
        flush(j + 1);
    }
    return out;
}

inline void check_times(const SimConfig& cfg, const std::vector<double>& t_vec) {
    require(t_vec.size() == static_cast<std::size_t>(cfg.p), "t_vec must have p entries");
    for (double t : t_vec)
        require(t >= 0 && t <= cfg.T * (1 + 1e-12), "t_vec entries must lie in [0, T]");
}

}  // namespace detail

/// Field for the given replica's paths at times t_vec with mollifier width epsilon.
inline IntersectionField approx_intersection(const std::vector<Path>& paths,
                                             const std::vector<double>& t_vec,
                                             const SimConfig& cfg, double epsilon) {
    detail::check_times(cfg, t_vec);
    require(paths.size() == static_cast<std::size_t>(cfg.p), "need one path per process");
    detail::check_grid_resolution(cfg, epsilon);
    IntersectionField field{cfg.grid, cfg.cell_volume(), std::vector<double>(cfg.grid.cell_count(), 1.0)};
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const std::size_t n = detail::left_endpoints(t_vec[i], cfg.h, paths[i].samples() - 1);
        const auto a = detail::occupation_profiles(paths[i], cfg.grid, epsilon, cfg.h, {n});
        for (std::size_t c = 0; c < field.values.size(); ++c) field.values[c] *= a[0][c];
    }
    return field;
}

inline IntersectionField approx_intersection(const std::vector<Path>& paths,
                                             const std::vector<double>& t_vec, const SimConfig& cfg) {
    return approx_intersection(paths, t_vec, cfg, cfg.epsilon);
}

inline IntersectionField approx_intersection(const PathEnsemble& ensemble, std::size_t replica,
                                             const std::vector<double>& t_vec, const SimConfig& cfg) {
    require(replica < ensemble.replicas(), "replica index out of range");
    return approx_intersection(ensemble.paths[replica], t_vec, cfg, cfg.epsilon);
}

/// ⟨f, ℓ⟩ along the diagonal t·(1, ..., 1) for every t in times, one replica.
inline std::vector<double> diagonal_pairings(const std::vector<Path>& paths,
                                             const std::vector<double>& times,
                                             const PairingFunction& f, const SimConfig& cfg,
                                             double epsilon) {
    std::vector<std::size_t> counts;
    for (double t : times) {
        require(t >= 0 && t <= cfg.T * (1 + 1e-12), "times must lie in [0, T]");
        counts.push_back(detail::left_endpoints(t, cfg.h, cfg.steps()));
    }
    require(std::is_sorted(times.begin(), times.end()), "times must be increasing");
    detail::check_grid_resolution(cfg, epsilon);
    const std::size_t cells = cfg.grid.cell_count();
    std::vector<double> weight(cells);
    for (std::size_t c = 0; c < cells; ++c) weight[c] = f(cfg.grid.center(c)) * cfg.cell_volume();
    std::vector<std::vector<double>> field(times.size(), std::vector<double>(cells, 1.0));
    for (const auto& path : paths) {
        const auto a = detail::occupation_profiles(path, cfg.grid, epsilon, cfg.h, counts);
        for (std::size_t k = 0; k < times.size(); ++k)
            for (std::size_t c = 0; c < cells; ++c) field[k][c] *= a[k][c];
    }
    std::vector<double> out(times.size(), 0.0);
    for (std::size_t k = 0; k < times.size(); ++k)
        for (std::size_t c = 0; c < cells; ++c) out[k] += weight[c] * field[k][c];
    return out;
}

// -- moment oracles ----------------------------------------------------------

/// Transition density and its time integral along a chain of visits.
/// Swappable so the permutation bookkeeping can be checked on a constant kernel.
struct ChainKernel {
    std::function<double(double s, double x, double y)> density;
    std::function<double(double tau, double x, double y)> window;
    /// Whether density(s, x, y) blows up as s → 0 at x = y.
    bool singular = true;

    static ChainKernel brownian_line() {
        return {[](double s, double x, double y) {
                    const double z = y - x;
                    return std::exp(-z * z / (2 * s)) / std::sqrt(2 * std::numbers::pi * s);
                },
                [](double tau, double x, double y) { return gaussian_line_window(tau, y - x); },
                true};
    }
    static ChainKernel constant(double c) {
        return {[c](double, double, double) { return c; },
                [c](double tau, double, double) { return c * tau; }, false};
    }
};

namespace detail {

inline void check_moment_inputs(const PairingFunction& f, const std::vector<double>& t_vec,
                                const std::vector<Point>& starts, int d) {
    require(!t_vec.empty() && t_vec.size() == starts.size(), "t_vec and starts must both have p entries");
    require(f.dimension() == d, "f must live in the kernel's dimension");
    for (double t : t_vec) require(std::isfinite(t) && t >= 0, "t_vec entries must be nonnegative");
    for (const auto& s : starts) require(s.size() == static_cast<std::size_t>(d), "starts must have d coordinates");
    for (std::size_t k = 0; k < f.support.lower.size(); ++k)
        require(std::isfinite(f.support.lower[k]) && std::isfinite(f.support.upper[k]),
                "f must have compact support");
}

/// ∫_0^t p_s(0, z) ds for planar Brownian motion.
inline double planar_window(double t, double r) {
    if (t <= 0.0) return 0.0;
    if (r == 0.0) return kInf;
    return gsl_sf_expint_E1(r * r / (2 * t)) / (2 * std::numbers::pi);
}

// Contribution of one process to the second moment: both visit orders.
inline double chain_pair(const ChainKernel& kernel, double t, double x0, double a, double b,
                         const QuadratureConfig& q) {
    if (t <= 0.0) return 0.0;
    // u = v² removes the u^{-1/2} blow-up of the density; its peak sits near
    // v = |first − x₀|, which becomes a breakpoint.
    const double top = std::sqrt(t);
    auto leg = [&](double first, double second) {
        auto g = [&](double v) {
            const double u = v * v;
            if (v <= 0.0 || u >= t) return 0.0;
            return 2 * v * kernel.density(u, x0, first) * kernel.window(t - u, first, second);
        };
        const double peak = std::fabs(first - x0);
        std::vector<double> breaks;
        if (kernel.singular && peak > 0.0 && peak < top) breaks.push_back(peak);
        return integrate_breaks(g, 0.0, top, breaks, q).value;
    };
    return leg(a, b) + leg(b, a);
}

}  // namespace detail

/// Tightest relative target the nested second-moment quadrature accepts.
inline constexpr double kSecondMomentRelTol = 1e-7;

/// E⟨f, ℓ_t⟩^2 for d = 1 through the S_2 permutation sum of each process.
inline double second_moment(const PairingFunction& f, const std::vector<double>& t_vec,
                            const std::vector<double>& starts, const ChainKernel& kernel,
                            const QuadratureConfig& q) {
    std::vector<Point> pts;
    for (double s : starts) pts.push_back({s});
    detail::check_moment_inputs(f, t_vec, pts, 1);
    for (double t : t_vec)
        if (t == 0.0) return 0.0;
    const double lo = f.support.lower[0], hi = f.support.upper[0];
    // Three nested levels: the innermost must resolve well below the outer
    // target, which caps how tight the outer target can usefully be.
    QuadratureConfig q1 = q;
    q1.rel_tol = std::max(q.rel_tol, kSecondMomentRelTol);
    QuadratureConfig q2 = q1, q3 = q1;
    q2.rel_tol = q1.rel_tol * 0.1;
    q3.rel_tol = q1.rel_tol * 1e-3;
    auto outer = [&](double a) {
        const double fa = f({a});
        if (fa == 0.0) return 0.0;
        auto inner = [&](double b) {
            const double fb = f({b});
            if (fb == 0.0) return 0.0;
            double prod = fa * fb;
            // Processes sharing a start share the factor.
            std::vector<std::pair<std::pair<double, double>, double>> seen;
            for (std::size_t i = 0; i < t_vec.size() && prod != 0.0; ++i) {
                const auto key = std::make_pair(starts[i], t_vec[i]);
                double g = -1.0;
                for (const auto& [k, v] : seen)
                    if (k == key) g = v;
                if (g < 0.0) {
                    g = detail::chain_pair(kernel, t_vec[i], starts[i], a, b, q3);
                    seen.emplace_back(key, g);
                }
                prod *= g;
            }
            return prod;
        };
        std::vector<double> breaks = starts;
        breaks.push_back(a);
        return integrate_breaks(inner, lo, hi, breaks, q2).value;
    };
    return integrate_breaks(outer, lo, hi, starts, q1).value;
}

/// E⟨f, ℓ_t⟩^k for k ∈ {1, 2} under Brownian motion (k = 2 only on the line).
inline double moment_oracle(int k, const PairingFunction& f, const std::vector<double>& t_vec,
                            const std::vector<Point>& starts, const HeatKernelModel& model,
                            const QuadratureConfig& q) {
    require(k == 1 || k == 2, "k must be 1 or 2");
    require(std::holds_alternative<GaussianRd>(model.kind()), "moment oracle needs a Gaussian kernel");
    const int d = model.dimension();
    require(d == 1 || d == 2, "moment oracle supports d = 1 or 2");
    detail::check_moment_inputs(f, t_vec, starts, d);
    if (k == 2) {
        require(d == 1, "second moment oracle is limited to d = 1");
        std::vector<double> s;
        for (const auto& x : starts) s.push_back(x[0]);
        return second_moment(f, t_vec, s, ChainKernel::brownian_line(), q);
    }
    for (double t : t_vec)
        if (t == 0.0) return 0.0;
    auto product = [&](const Point& x) {
        double v = f(x);
        for (std::size_t i = 0; i < t_vec.size() && v != 0.0; ++i) {
            const double r = detail::distance(x, starts[i]);
            v *= d == 1 ? gaussian_line_window(t_vec[i], r) : detail::planar_window(t_vec[i], r);
        }
        return v;
    };
    auto breaks_on = [&](std::size_t axis) {
        std::vector<double> b;
        for (const auto& s : starts) b.push_back(s[axis]);
        return b;
    };
    const Box& box = f.support;
    if (d == 1)
        return integrate_breaks([&](double x) { return product({x}); }, box.lower[0], box.upper[0],
                                breaks_on(0), q)
            .value;
    const QuadratureConfig qi = q.inner();
    auto outer = [&](double x) {
        return integrate_breaks([&](double y) { return product({x, y}); }, box.lower[1],
                                box.upper[1], breaks_on(1), qi)
            .value;
    };
    return integrate_breaks(outer, box.lower[0], box.upper[0], breaks_on(0), q).value;
}

// -- Monte Carlo moment comparison -------------------------------------------

struct MomentRow {
    double epsilon = 0.0;
    double mean = 0.0;
    double standard_error = 0.0;
    /// mean − oracle.
    double bias = 0.0;
    /// Exact expectation of the discretized k = 1 estimator (NaN for k = 2).
    double discretized_mean = std::numeric_limits<double>::quiet_NaN();
    bool within_3se = false;
    bool all_nonnegative = true;
};

struct MomentReport {
    int k = 1;
    double oracle = 0.0;
    std::vector<double> t_vec;
    std::size_t replicas = 0;
    std::vector<MomentRow> rows;
    /// |bias| shrinks along the decreasing ε ladder.
    bool bias_monotone = false;
    /// The smallest ε agrees with the oracle within 3 standard errors.
    bool agrees = false;
    /// samples[r][e] = ⟨f, ℓ_{t,ε_e}⟩ of replica r (before raising to the k-th power).
    std::vector<std::vector<double>> samples;
};

namespace detail {

// E of the discretized k = 1 pairing: independence factorizes the product and
// E p_ε(x, X_s) = p_{ε+s}(x, x₀).
inline double discretized_first_moment(const SimConfig& cfg, const PairingFunction& f,
                                       const std::vector<double>& t_vec, double epsilon) {
    const std::size_t cells = cfg.grid.cell_count();
    double total = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        const Point x = cfg.grid.center(c);
        double v = f(x);
        for (std::size_t i = 0; i < t_vec.size() && v != 0.0; ++i) {
            const std::size_t n = left_endpoints(t_vec[i], cfg.h, cfg.steps());
            const double r = distance(x, cfg.starts[i]);
            double a = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double s = epsilon + static_cast<double>(j) * cfg.h;
                a += cfg.h * std::exp(-r * r / (2 * s)) / std::pow(2 * std::numbers::pi * s, cfg.d / 2.0);
            }
            v *= a;
        }
        total += v;
    }
    return total * cfg.cell_volume();
}

inline double sample_stderr(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return kInf;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline double ordered_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Monte Carlo k-th moments on a decreasing ε ladder, one path set shared by
/// every ε, compared with the quadrature oracle.
inline MomentReport moment_check(const SimConfig& cfg, const PairingFunction& f,
                                 const std::vector<double>& t_vec, int k,
                                 const std::vector<double>& epsilons, int replicas,
                                 const QuadratureConfig& q = {}) {
    require(k == 1 || k == 2, "k must be 1 or 2");
    require(!epsilons.empty(), "epsilons must be non-empty");
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        require(epsilons[e] > 0, "epsilons must be positive");
        if (e > 0) require(epsilons[e] < epsilons[e - 1], "epsilons must be decreasing");
    }
    require(replicas >= 2, "replicas must be at least 2");
    SimConfig run = cfg;
    run.replicas = replicas;
    run.epsilon = epsilons.back();
    validate(run);
    detail::check_times(run, t_vec);
    require(f.dimension() == run.d, "f must live in the simulation dimension");

    MomentReport rep;
    rep.k = k;
    rep.t_vec = t_vec;
    rep.replicas = static_cast<std::size_t>(replicas);
    rep.oracle = moment_oracle(k, f, t_vec, run.starts, HeatKernelModel::gaussian(run.d), q);
    rep.samples.assign(rep.replicas, std::vector<double>(epsilons.size()));
    parallel_for(rep.replicas, [&](std::size_t r) {
        const auto paths = simulate_replica(run, r);
        for (std::size_t e = 0; e < epsilons.size(); ++e)
            rep.samples[r][e] = approx_intersection(paths, t_vec, run, epsilons[e]).pairing(f);
    });
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        std::vector<double> powered(rep.replicas);
        MomentRow row;
        row.epsilon = epsilons[e];
        for (std::size_t r = 0; r < rep.replicas; ++r) {
            const double v = rep.samples[r][e];
            if (v < 0.0) row.all_nonnegative = false;
            powered[r] = k == 1 ? v : v * v;
        }
        row.mean = detail::ordered_mean(powered);
        row.standard_error = detail::sample_stderr(powered, row.mean);
        row.bias = row.mean - rep.oracle;
        row.within_3se = std::fabs(row.bias) <= 3.0 * row.standard_error;
        if (k == 1) row.discretized_mean = detail::discretized_first_moment(run, f, t_vec, epsilons[e]);
        rep.rows.push_back(row);
    }
    rep.bias_monotone = true;
    for (std::size_t e = 1; e < rep.rows.size(); ++e)
        if (std::fabs(rep.rows[e].bias) > std::fabs(rep.rows[e - 1].bias)) rep.bias_monotone = false;
    rep.agrees = rep.rows.back().within_3se;
    return rep;
}

// -- Hölder exponent ---------------------------------------------------------

struct HolderGap {
    double t_from = 0.0;
    double t_to = 0.0;
    double gap = 0.0;
    /// Pooled mean of the squared increment over replicas.
    double second_moment = 0.0;
    /// Second-moment bound from the moment-difference estimate at this gap.
    double bound = 0.0;
    bool bound_holds = false;
};

struct HolderReport {
    int d = 1;
    int p = 2;
    double epsilon = 0.0;
    std::size_t replicas = 0;
    std::vector<double> times;
    std::vector<HolderGap> gaps;
    /// Half the slope of log E|increment|² against log gap; empty when withheld.
    std::optional<double> exponent;
    double ci_low = std::numeric_limits<double>::quiet_NaN();
    double ci_high = std::numeric_limits<double>::quiet_NaN();
    double r_squared = 0.0;
    /// The exponent (d − p(d−2))/(2p) the estimate is compared against.
    double delta = 0.0;
    double tolerance = 0.15;
    bool within_tolerance = false;
    /// Constant multiplying |Δt|^{2δ} in the bound, and its ingredients.
    double bound_constant = 0.0;
    double eta_T = 0.0;
    double eta_ratio_sup = 0.0;
    bool bound_holds = false;
    bool degenerate = false;
    std::size_t bootstrap_resamples = 0;
    std::vector<std::string> notes;
    /// pairings[r][j] = ⟨f, ℓ_{t_j}⟩ of replica r.
    std::vector<std::vector<double>> pairings;
};

struct HolderOptions {
    std::size_t bootstrap_resamples = 400;
    double confidence = 0.95;
    double tolerance = 0.15;
    /// Points of the log grid on (0, pT] used for sup_t t^{−δ} η(t).
    int eta_grid_points = 25;
    double eta_grid_floor = 1e-4;
};

namespace detail {

inline std::pair<double, double> slope_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    const double r2 = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
    return {slope, r2};
}

// log E|Δ|² per gap from the replicas selected by idx; false if any gap is all zero.
inline bool pooled_logs(const std::vector<std::vector<double>>& pairings,
                        const std::vector<std::size_t>& idx, std::size_t gaps,
                        std::vector<double>& out) {
    out.assign(gaps, 0.0);
    for (std::size_t j = 0; j < gaps; ++j) {
        double s = 0.0;
        for (std::size_t r : idx) {
            const double inc = pairings[r][j + 1] - pairings[r][j];
            s += inc * inc;
        }
        if (!(s > 0.0)) return false;
        out[j] = std::log(s / static_cast<double>(idx.size()));
    }
    return true;
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Fits and bound checks for a table of diagonal pairings, pairings[r][j] at
/// times[j]. Separated from the simulation so fixed tables can drive it.
inline HolderReport holder_from_pairings(std::vector<std::vector<double>> pairings,
                                         const std::vector<double>& times, const SimConfig& run,
                                         const PairingFunction& f, const HolderOptions& opt = {},
                                         const QuadratureConfig& q = {}) {
    require(pairings.size() >= 2, "replicas must be at least 2");
    require(times.size() >= 3, "holder grid needs at least 3 times");
    for (std::size_t j = 1; j < times.size(); ++j) require(times[j] > times[j - 1], "times must be increasing");
    for (const auto& row : pairings) require(row.size() == times.size(), "one pairing per time and replica");
    require(opt.bootstrap_resamples >= 10, "bootstrap needs at least 10 resamples");
    require(opt.confidence > 0 && opt.confidence < 1, "confidence must lie in (0, 1)");

    HolderReport rep;
    rep.d = run.d;
    rep.p = run.p;
    rep.epsilon = run.epsilon;
    rep.replicas = pairings.size();
    rep.times = times;
    rep.delta = intersection_delta(run.d, run.p);
    rep.tolerance = opt.tolerance;
    rep.bootstrap_resamples = opt.bootstrap_resamples;
    rep.pairings = std::move(pairings);

    const std::size_t ngaps = times.size() - 1;
    std::vector<std::size_t> all(rep.replicas);
    for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
    std::vector<double> logm;
    rep.degenerate = !detail::pooled_logs(rep.pairings, all, ngaps, logm);

    // Bound constant: (2!)^p (2^p ‖f‖∞ (η(T)+1)^p sup_{t≤pT} t^{−δ} η(t))² with
    // η the L^p window functional of Lebesgue measure.
    const auto model = HeatKernelModel::gaussian(run.d);
    const auto leb = MeasureModel::lebesgue(run.d);
    ProbeSet probes;
    probes.points = {Point(static_cast<std::size_t>(run.d), 0.0)};
    probes.translation_invariant = true;
    const double pd = run.p;
    rep.eta_T = eta(model, leb, pd, run.T, probes, q);
    for (double t : log_grid(opt.eta_grid_floor * pd * run.T, pd * run.T, opt.eta_grid_points))
        rep.eta_ratio_sup = std::max(rep.eta_ratio_sup, std::pow(t, -rep.delta) * eta(model, leb, pd, t, probes, q));
    const double inner = std::pow(2.0, pd) * f.sup_norm * std::pow(rep.eta_T + 1.0, pd) * rep.eta_ratio_sup;
    rep.bound_constant = std::pow(2.0, pd) * inner * inner;

    rep.bound_holds = true;
    std::vector<double> loggap(ngaps);
    for (std::size_t j = 0; j < ngaps; ++j) {
        HolderGap g;
        g.t_from = times[j];
        g.t_to = times[j + 1];
        g.gap = times[j + 1] - times[j];
        double s = 0.0;
        for (std::size_t r = 0; r < rep.replicas; ++r) {
            const double inc = rep.pairings[r][j + 1] - rep.pairings[r][j];
            s += inc * inc;
        }
        g.second_moment = s / static_cast<double>(rep.replicas);
        // Distance between diagonal points is √p times the gap.
        g.bound = rep.bound_constant * std::pow(std::sqrt(pd) * g.gap, 2 * rep.delta);
        g.bound_holds = g.second_moment <= g.bound;
        rep.bound_holds = rep.bound_holds && g.bound_holds;
        loggap[j] = std::log(g.gap);
        rep.gaps.push_back(g);
    }

    if (rep.degenerate) {
        rep.notes.push_back("some diagonal increment vanished in every replica; exponent withheld");
        return rep;
    }
    const auto [slope, r2] = detail::slope_fit(loggap, logm);
    rep.exponent = slope / 2;
    rep.r_squared = r2;
    rep.within_tolerance = std::fabs(*rep.exponent - rep.delta) <= rep.tolerance;

    std::mt19937_64 gen(splitmix64(run.seed ^ 0x486f6c646572ULL));
    std::uniform_int_distribution<std::size_t> pick(0, rep.replicas - 1);
    std::vector<double> boot;
    std::vector<std::size_t> idx(rep.replicas);
    std::vector<double> lm;
    for (std::size_t b = 0; b < opt.bootstrap_resamples; ++b) {
        for (auto& i : idx) i = pick(gen);
        if (detail::pooled_logs(rep.pairings, idx, ngaps, lm)) boot.push_back(detail::slope_fit(loggap, lm).first / 2);
    }
    if (boot.size() >= 2) {
        const double tail = (1 - opt.confidence) / 2;
        rep.ci_low = detail::quantile(boot, tail);
        rep.ci_high = detail::quantile(boot, 1 - tail);
    } else {
        rep.notes.push_back("bootstrap resamples were degenerate; interval withheld");
    }
    return rep;
}

/// Hölder exponent of t ↦ ⟨f, ℓ_{t(1,...,1)}⟩ from second moments of
/// diagonal increments, with a replica bootstrap interval and the
/// moment-difference bound checked at every gap.
inline HolderReport holder_estimate(const SimConfig& cfg, const PairingFunction& f,
                                    const std::vector<double>& times, int replicas,
                                    const HolderOptions& opt = {}, const QuadratureConfig& q = {}) {
    SimConfig run = cfg;
    run.replicas = replicas;
    validate(run);
    require(replicas >= 2, "replicas must be at least 2");
    require(times.size() >= 3, "holder grid needs at least 3 times");
    for (std::size_t j = 0; j < times.size(); ++j) {
        require(times[j] >= 0 && times[j] <= run.T * (1 + 1e-12), "times must lie in [0, T]");
        if (j > 0) require(times[j] > times[j - 1], "times must be increasing");
    }
    require(f.dimension() == run.d, "f must live in the simulation dimension");
    std::vector<std::vector<double>> pairings(static_cast<std::size_t>(replicas));
    parallel_for(pairings.size(), [&](std::size_t r) {
        pairings[r] = diagonal_pairings(simulate_replica(run, r), times, f, run, run.epsilon);
    });
    return holder_from_pairings(std::move(pairings), times, run, f, opt, q);
}

}  // namespace kkl
