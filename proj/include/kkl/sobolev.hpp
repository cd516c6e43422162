#pragma once

/**
 * @file sobolev.hpp
 * @brief Numerical checks of the embedding ‖u‖²_{2p,μ} ≤ γ(α) E_α(u, u) and its
 * interpolation form on closed-form test functions.
 *
 * The form is the Brownian one, E(u, u) = ½∫|∇u|², matching the generator ½Δ
 * of the Gaussian kernel; E_α(u, u) = E(u, u) + α∫u².
 */

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kkl/diagnostics.hpp"
#include "kkl/errors.hpp"
#include "kkl/measures.hpp"
#include "kkl/parallel.hpp"
#include "kkl/quadrature.hpp"

namespace kkl {

/// exp(-|x - c|² / (2σ²)).
struct GaussianBump {
    double sigma = 1.0;
    Point center{0.0};
};

/// (1 + cos(π|x - c| / R)) / 2 on the ball of radius R, zero outside.
struct CosineBump {
    double radius = 1.0;
    Point center{0.0};
};

/// Values at the cell centres of a lattice, zero outside; multilinear in between.
struct SampledFunction {
    Lattice grid;
    std::vector<double> values;
};

class TestFunction {
public:
    using Kind = std::variant<GaussianBump, CosineBump, SampledFunction>;

    TestFunction(Kind kind, double amplitude = 1.0) : kind_(std::move(kind)), amplitude_(amplitude) {
        validate();
    }

    static TestFunction gaussian(double sigma, Point center) {
        return {GaussianBump{sigma, std::move(center)}};
    }
    static TestFunction cosine(double radius, Point center) {
        return {CosineBump{radius, std::move(center)}};
    }
    static TestFunction sampled(Lattice grid, std::vector<double> values) {
        return {SampledFunction{std::move(grid), std::move(values)}};
    }

    const Kind& kind() const { return kind_; }
    double amplitude() const { return amplitude_; }
    TestFunction scaled(double c) const { return {kind_, amplitude_ * c}; }

    int dimension() const {
        if (const auto* s = std::get_if<SampledFunction>(&kind_)) return s->grid.dimension();
        return static_cast<int>(center().size());
    }

    bool radial() const { return !std::holds_alternative<SampledFunction>(kind_); }

    const Point& center() const {
        if (const auto* g = std::get_if<GaussianBump>(&kind_)) return g->center;
        if (const auto* c = std::get_if<CosineBump>(&kind_)) return c->center;
        throw InputError("sampled functions have no centre");
    }

    /// Radial profile u(ρ) and its derivative, for the bump kinds.
    double profile(double rho) const {
        if (const auto* g = std::get_if<GaussianBump>(&kind_))
            return amplitude_ * std::exp(-rho * rho / (2.0 * g->sigma * g->sigma));
        const auto& c = std::get<CosineBump>(kind_);
        if (rho >= c.radius) return 0.0;
        return amplitude_ * 0.5 * (1.0 + std::cos(std::numbers::pi * rho / c.radius));
    }
    double profile_slope(double rho) const {
        if (const auto* g = std::get_if<GaussianBump>(&kind_))
            return -rho / (g->sigma * g->sigma) * profile(rho);
        const auto& c = std::get<CosineBump>(kind_);
        if (rho >= c.radius) return 0.0;
        const double k = std::numbers::pi / c.radius;
        return -amplitude_ * 0.5 * k * std::sin(k * rho);
    }
    /// Distance beyond which u vanishes (or is negligible for Gaussians).
    double reach() const {
        if (const auto* c = std::get_if<CosineBump>(&kind_)) return c->radius;
        return kInf;
    }

    double value(const Point& x) const {
        require(static_cast<int>(x.size()) == dimension(), "point dimension does not match u");
        if (radial()) return profile(detail::distance(x, center()));
        return sampled_value(std::get<SampledFunction>(kind_), x) * amplitude_;
    }

    Point gradient(const Point& x) const {
        require(static_cast<int>(x.size()) == dimension(), "point dimension does not match u");
        Point g(x.size(), 0.0);
        if (radial()) {
            const double rho = detail::distance(x, center());
            if (rho == 0.0) return g;
            const double s = profile_slope(rho) / rho;
            for (std::size_t i = 0; i < x.size(); ++i) g[i] = s * (x[i] - center()[i]);
            return g;
        }
        const auto& f = std::get<SampledFunction>(kind_);
        for (int k = 0; k < dimension(); ++k) {
            const double h = f.grid.spacing(k);
            Point a = x, b = x;
            a[static_cast<std::size_t>(k)] -= h;
            b[static_cast<std::size_t>(k)] += h;
            g[static_cast<std::size_t>(k)] = (value(b) - value(a)) / (2.0 * h);
        }
        return g;
    }

    // -- closed-form oracles (Lebesgue measure) ------------------------------

    /// ∫ |u|^r dx when a closed form is known.
    std::optional<double> power_integral_oracle(double r) const {
        const int d = dimension();
        const double a = std::pow(std::fabs(amplitude_), r);
        if (const auto* g = std::get_if<GaussianBump>(&kind_))
            return a * std::pow(2.0 * std::numbers::pi * g->sigma * g->sigma / r, d / 2.0);
        if (const auto* c = std::get_if<CosineBump>(&kind_); c && d == 1) {
            // u = cos²(πx / 2R), and ∫_{-π/2}^{π/2} cos^{2r} = √π Γ(r + ½) / Γ(r + 1).
            return a * 2.0 * c->radius / std::sqrt(std::numbers::pi) *
                   std::exp(std::lgamma(r + 0.5) - std::lgamma(r + 1.0));
        }
        return std::nullopt;
    }

    /// ∫ |∇u|² dx when a closed form is known.
    std::optional<double> gradient_oracle() const {
        const int d = dimension();
        const double a = amplitude_ * amplitude_;
        if (const auto* g = std::get_if<GaussianBump>(&kind_)) {
            const double s2 = g->sigma * g->sigma;
            return a * d / (2.0 * s2) * std::pow(std::numbers::pi * s2, d / 2.0);
        }
        if (const auto* c = std::get_if<CosineBump>(&kind_); c && d == 1)
            return a * std::numbers::pi * std::numbers::pi / (4.0 * c->radius);
        return std::nullopt;
    }

    std::string name() const {
        std::ostringstream os;
        if (const auto* g = std::get_if<GaussianBump>(&kind_))
            os << "gaussian(sigma=" << g->sigma << ")";
        else if (const auto* c = std::get_if<CosineBump>(&kind_))
            os << "cosine(radius=" << c->radius << ")";
        else
            os << "sampled(" << std::get<SampledFunction>(kind_).values.size() << " cells)";
        if (amplitude_ != 1.0) os << "*" << amplitude_;
        return os.str();
    }

private:
    void validate() const {
        require(std::isfinite(amplitude_), "amplitude must be finite");
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, GaussianBump>) {
                    require(k.sigma > 0, "sigma must be positive");
                    require(!k.center.empty(), "centre must have dimension >= 1");
                } else if constexpr (std::is_same_v<K, CosineBump>) {
                    require(k.radius > 0, "radius must be positive");
                    require(!k.center.empty(), "centre must have dimension >= 1");
                } else {
                    // Reuse the grid checks of GridDensity, without the sign constraint.
                    std::vector<double> mags(k.values.size());
                    for (std::size_t i = 0; i < mags.size(); ++i) {
                        require(std::isfinite(k.values[i]), "sampled values must be finite");
                        mags[i] = std::fabs(k.values[i]);
                    }
                    (void)MeasureModel::grid(k.grid, mags);
                }
            },
            kind_);
    }

    static double sampled_value(const SampledFunction& f, const Point& x) {
        const int d = f.grid.dimension();
        std::vector<long> base(static_cast<std::size_t>(d));
        std::vector<double> frac(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            // Position in cell-centre units; the exterior counts as zero.
            const double s = (x[ku] - f.grid.lower[ku]) / f.grid.spacing(k) - 0.5;
            if (s < -0.5 || s > f.grid.shape[ku] - 0.5) return 0.0;
            base[ku] = static_cast<long>(std::floor(s));
            frac[ku] = s - static_cast<double>(base[ku]);
        }
        double total = 0.0;
        for (unsigned corner = 0; corner < (1u << d); ++corner) {
            double w = 1.0;
            std::size_t idx = 0;
            bool outside = false;
            for (int k = 0; k < d; ++k) {
                const auto ku = static_cast<std::size_t>(k);
                const bool up = (corner >> k) & 1u;
                const long i = base[ku] + (up ? 1 : 0);
                w *= up ? frac[ku] : 1.0 - frac[ku];
                if (i < 0 || i >= f.grid.shape[ku]) outside = true;
                idx = idx * static_cast<std::size_t>(f.grid.shape[ku]) +
                      static_cast<std::size_t>(std::max(i, 0L));
            }
            if (!outside && w != 0.0) total += w * f.values[idx];
        }
        return total;
    }

    Kind kind_;
    double amplitude_ = 1.0;
};

enum class Evaluation {
    /// Closed-form oracles where available, quadrature otherwise.
    automatic,
    /// Always quadrature (or grid sums for sampled functions).
    numeric,
};

namespace detail {

// ∫ h(|x - c|) dx over R^d for a radial profile vanishing beyond reach.
inline double radial_lebesgue(int d, const std::function<double(double)>& h, double reach,
                              const QuadratureConfig& q) {
    RadialProfile prof{h, {}, reach};
    return integrate_radial(MeasureModel::lebesgue(d), Point(static_cast<std::size_t>(d), 0.0), prof, q);
}

// Grid sums for sampled functions: Σ u², and Σ |∇_h u|² with central
// differences of step `stride` cells (zero outside the lattice).
inline double sampled_sum_sq(const SampledFunction& f) {
    double s = 0.0;
    for (double v : f.values) s += v * v;
    double vol = 1.0;
    for (int k = 0; k < f.grid.dimension(); ++k) vol *= f.grid.spacing(k);
    return s * vol;
}

inline double sampled_gradient_sq(const SampledFunction& f, int stride) {
    const int d = f.grid.dimension();
    double vol = 1.0;
    for (int k = 0; k < d; ++k) vol *= f.grid.spacing(k);
    std::vector<std::size_t> strides(static_cast<std::size_t>(d), 1);
    for (int k = d - 2; k >= 0; --k) {
        const auto ku = static_cast<std::size_t>(k);
        strides[ku] = strides[ku + 1] * static_cast<std::size_t>(f.grid.shape[ku + 1]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        std::size_t rest = i;
        for (int k = 0; k < d; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const long pos = static_cast<long>(rest / strides[ku]);
            rest %= strides[ku];
            auto at = [&](long j) {
                if (j < 0 || j >= f.grid.shape[ku]) return 0.0;
                const long offset = (j - pos) * static_cast<long>(strides[ku]);
                return f.values[static_cast<std::size_t>(static_cast<long>(i) + offset)];
            };
            const double g = (at(pos + stride) - at(pos - stride)) / (2.0 * stride * f.grid.spacing(k));
            total += g * g;
        }
    }
    return total * vol;
}

}  // namespace detail

/// ∫ u² dx.
inline double l2_squared(const TestFunction& u, const QuadratureConfig& q,
                         Evaluation how = Evaluation::automatic) {
    if (const auto* f = std::get_if<SampledFunction>(&u.kind()))
        return detail::sampled_sum_sq(*f) * u.amplitude() * u.amplitude();
    if (how == Evaluation::automatic)
        if (auto o = u.power_integral_oracle(2.0)) return *o;
    return detail::radial_lebesgue(
        u.dimension(), [&](double r) { return u.profile(r) * u.profile(r); }, u.reach(), q);
}

/// ∫ |∇u|² dx.
inline double gradient_squared(const TestFunction& u, const QuadratureConfig& q,
                               Evaluation how = Evaluation::automatic) {
    if (const auto* f = std::get_if<SampledFunction>(&u.kind()))
        return detail::sampled_gradient_sq(*f, 1) * u.amplitude() * u.amplitude();
    if (how == Evaluation::automatic)
        if (auto o = u.gradient_oracle()) return *o;
    return detail::radial_lebesgue(
        u.dimension(), [&](double r) { return u.profile_slope(r) * u.profile_slope(r); }, u.reach(),
        q);
}

/// E_α(u, u) = ½∫|∇u|² + α∫u².
inline double energy(const TestFunction& u, double alpha, const QuadratureConfig& q,
                     Evaluation how = Evaluation::automatic) {
    require(alpha >= 0, "alpha must be >= 0");
    return 0.5 * gradient_squared(u, q, how) + alpha * l2_squared(u, q, how);
}

/// Warning text when the central-difference gradient of a sampled function
/// changes by more than 5% between steps h and 2h.
inline std::optional<std::string> gradient_stability_warning(const TestFunction& u) {
    const auto* f = std::get_if<SampledFunction>(&u.kind());
    if (!f) return std::nullopt;
    const double fine = detail::sampled_gradient_sq(*f, 1);
    const double coarse = detail::sampled_gradient_sq(*f, 2);
    if (fine == 0.0 && coarse == 0.0) return std::nullopt;
    const double change = std::fabs(fine - coarse) / std::max(fine, coarse);
    if (change > 0.05) {
        return "gradient estimate unstable: energy changes by " + std::to_string(100.0 * change) +
               "% between steps h and 2h; refine the grid";
    }
    return std::nullopt;
}

/// ‖u‖_{L^{2p}(μ)} = (∫|u|^{2p} dμ)^{1/(2p)}.
inline double lp_norm(const TestFunction& u, const MeasureModel& mu, double p,
                      const QuadratureConfig& q, Evaluation how = Evaluation::automatic) {
    require(p >= 1.0, "p must be >= 1");
    require(!std::holds_alternative<VolumeGrowth>(mu.kind()),
            "test functions live on R^d; VolumeGrowth measures are not supported");
    require(u.dimension() == static_cast<int>(mu.dimension()) ||
                std::holds_alternative<Atomic>(mu.kind()),
            "test function and measure dimensions differ");
    const double r = 2.0 * p;
    double integral = 0.0;
    if (const auto* f = std::get_if<SampledFunction>(&u.kind())) {
        if (std::holds_alternative<LebesgueRd>(mu.kind())) {
            double s = 0.0;
            for (double v : f->values) s += std::pow(std::fabs(v), r);
            double vol = 1.0;
            for (int k = 0; k < f->grid.dimension(); ++k) vol *= f->grid.spacing(k);
            integral = s * vol * std::pow(std::fabs(u.amplitude()), r);
        } else {
            integral = integrate(
                mu, [&](const Point& x) { return std::pow(std::fabs(u.value(x)), r); }, q,
                Box{f->grid.lower, f->grid.upper});
        }
    } else {
        std::optional<double> oracle;
        if (how == Evaluation::automatic && std::holds_alternative<LebesgueRd>(mu.kind()))
            oracle = u.power_integral_oracle(r);
        if (oracle) {
            integral = *oracle;
        } else {
            RadialProfile prof{[&](double rho) { return std::pow(std::fabs(u.profile(rho)), r); },
                               {},
                               u.reach()};
            integral = integrate_radial(mu, u.center(), prof, q);
        }
    }
    return std::isinf(integral) ? kInf : std::pow(integral, 1.0 / r);
}

// -- embedding ---------------------------------------------------------------

struct EmbeddingReport {
    std::string function;
    double p = 1.0;
    double alpha = 1.0;
    /// ‖u‖²_{2p,μ}.
    double lhs = 0.0;
    /// γ(α) E_α(u, u).
    double rhs = 0.0;
    double gamma = 0.0;
    double energy = 0.0;
    double ratio = 0.0;
    double tolerance = 1e-6;
    bool holds = true;
    std::vector<std::string> notes;
};

/// Checks ‖u‖²_{2p,μ} ≤ γ(α) E_α(u, u); γ must be finite.
inline EmbeddingReport verify_embedding(const TestFunction& u, const MeasureModel& mu, double p,
                                        double alpha, const HeatKernelModel& model,
                                        const ProbeSet& probes, const QuadratureConfig& q,
                                        double tolerance = 1e-6) {
    require(alpha > 0, "alpha must be positive");
    const double g = gamma(model, mu, p, alpha, probes, q);
    require(std::isfinite(g), "gamma(alpha) is infinite: the embedding inequality is vacuous");
    EmbeddingReport r;
    r.function = u.name();
    r.p = p;
    r.alpha = alpha;
    r.gamma = g;
    r.tolerance = tolerance;
    const double norm = lp_norm(u, mu, p, q);
    r.lhs = norm * norm;
    r.energy = energy(u, alpha, q);
    r.rhs = g * r.energy;
    r.ratio = r.lhs == 0.0 ? 0.0 : r.lhs / r.rhs;
    r.holds = r.ratio <= 1.0 + tolerance;
    if (auto w = gradient_stability_warning(u)) r.notes.push_back(*w);
    return r;
}

/// Twenty closed-form bumps in d = 1: twelve Gaussians and eight cosine
/// bumps with widths log-spaced over [0.1, 10] and translated centres.
inline std::vector<TestFunction> standard_battery() {
    std::vector<TestFunction> out;
    for (int i = 0; i < 12; ++i) {
        const double sigma = 0.1 * std::pow(100.0, i / 11.0);
        out.push_back(TestFunction::gaussian(sigma, {-3.0 + 0.5 * i}));
    }
    for (int i = 0; i < 8; ++i) {
        const double radius = 0.1 * std::pow(100.0, i / 7.0);
        out.push_back(TestFunction::cosine(radius, {2.0 - 0.7 * i}));
    }
    return out;
}

// -- interpolation -------------------------------------------------------------

struct InterpolationReport {
    std::string function;
    double p = 1.0;
    double theta = 1.0;
    double B = 1.0;
    /// ‖u‖_{2p,μ}.
    double lhs = 0.0;
    /// B E_1(u, u)^{(1-θ)/2} ‖u‖_2^θ.
    double rhs = 0.0;
    double ratio = 0.0;
    double tolerance = 1e-6;
    bool holds = true;
};

inline InterpolationReport verify_interpolation(const TestFunction& u, const MeasureModel& mu,
                                                double p, double theta, double B,
                                                const QuadratureConfig& q,
                                                double tolerance = 1e-6) {
    require(theta > 0 && theta <= 1, "theta must lie in (0, 1]");
    require(B > 0, "B must be positive");
    InterpolationReport r;
    r.function = u.name();
    r.p = p;
    r.theta = theta;
    r.B = B;
    r.tolerance = tolerance;
    r.lhs = lp_norm(u, mu, p, q);
    r.rhs = B * std::pow(energy(u, 1.0, q), (1.0 - theta) / 2.0) *
            std::pow(std::sqrt(l2_squared(u, q)), theta);
    r.ratio = r.lhs == 0.0 ? 0.0 : r.lhs / r.rhs;
    r.holds = r.ratio <= 1.0 + tolerance;
    return r;
}

struct InterpolationConstant {
    double theta = 1.0;
    /// sup over the α grid of γ(α + 1) α^θ.
    double C = 0.0;
    /// B with B² = C θ^{-θ} (1 - θ)^{θ - 1}.
    double B = 0.0;
    /// A in K(ε) = A ε^{-(1-θ)/θ}, equal to C^{1/θ}.
    double A = 0.0;
    /// True when the supremum sits at the end of the α grid.
    bool at_grid_edge = false;
};

/**
 * Admissible B for the interpolation inequality from a decay certificate
 * γ(α + 1) ≤ C α^{-θ}: inserting it in ‖u‖²_{2p,μ} ≤ γ(α + 1) E_{α+1}(u, u)
 * and optimizing over α gives B² = C θ^{-θ} (1 - θ)^{θ - 1}.
 */
inline InterpolationConstant derive_interpolation_constant(
    const std::function<double(double)>& gamma_of, double theta, const std::vector<double>& alphas) {
    require(theta > 0 && theta <= 1, "theta must lie in (0, 1]");
    require(!alphas.empty(), "alpha grid must not be empty");
    InterpolationConstant c;
    c.theta = theta;
    std::vector<double> vals(alphas.size());
    parallel_for(alphas.size(), [&](std::size_t i) {
        require(alphas[i] > 0, "alpha grid values must be positive");
        vals[i] = gamma_of(alphas[i] + 1.0) * std::pow(alphas[i], theta);
    });
    std::size_t arg = 0;
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i] > c.C) {
            c.C = vals[i];
            arg = i;
        }
    c.at_grid_edge = arg + 1 == vals.size();
    const double shape = theta == 1.0 ? 1.0 : std::pow(theta, -theta) * std::pow(1.0 - theta, theta - 1.0);
    c.B = std::sqrt(c.C * shape);
    c.A = std::pow(c.C, 1.0 / theta);
    return c;
}

inline InterpolationConstant derive_interpolation_constant(const HeatKernelModel& model,
                                                           const MeasureModel& mu, double p,
                                                           double theta, const ProbeSet& probes,
                                                           const std::vector<double>& alphas,
                                                           const QuadratureConfig& q) {
    return derive_interpolation_constant(
        [&](double a) { return gamma(model, mu, p, a, probes, q); }, theta, alphas);
}

// -- K(ε) ----------------------------------------------------------------------

struct KPoint {
    double epsilon = 0.0;
    /// γ^{-1}(ε), the smallest α on the bracket with γ(α) ≤ ε.
    double alpha = std::numeric_limits<double>::quiet_NaN();
    /// ε γ^{-1}(ε).
    double K = std::numeric_limits<double>::quiet_NaN();
    bool reachable = false;
};

struct KCurve {
    std::vector<KPoint> points;
    double alpha_min = 0.0;
    double alpha_max = 0.0;
    /// ε^{-1} K(ε) = γ^{-1}(ε) increases as ε decreases along the reachable points.
    bool monotone = true;
};

/// K(ε) = ε γ^{-1}(ε), with γ^{-1} by bisection in log α on [alpha_min, alpha_max].
inline KCurve k_epsilon_curve(const std::function<double(double)>& gamma_of,
                              const std::vector<double>& epsilons, double alpha_min,
                              double alpha_max, double rel_tol = 1e-10) {
    require(alpha_min > 0 && alpha_max > alpha_min, "alpha bracket must satisfy 0 < min < max");
    KCurve out;
    out.alpha_min = alpha_min;
    out.alpha_max = alpha_max;
    const double g_lo = gamma_of(alpha_min);
    const double g_hi = gamma_of(alpha_max);
    out.points.resize(epsilons.size());
    parallel_for(epsilons.size(), [&](std::size_t i) {
        const double eps = epsilons[i];
        require(eps > 0, "epsilon values must be positive");
        KPoint& kp = out.points[i];
        kp.epsilon = eps;
        if (eps > g_lo || eps < g_hi) return;
        double lo = std::log(alpha_min), hi = std::log(alpha_max);
        while (hi - lo > rel_tol) {
            const double mid = 0.5 * (lo + hi);
            (gamma_of(std::exp(mid)) <= eps ? hi : lo) = mid;
        }
        kp.alpha = std::exp(hi);
        kp.K = eps * kp.alpha;
        kp.reachable = true;
    });
    // Sort by decreasing ε and check that γ^{-1}(ε) grows.
    std::vector<const KPoint*> order;
    for (const auto& kp : out.points)
        if (kp.reachable) order.push_back(&kp);
    std::sort(order.begin(), order.end(), [](auto a, auto b) { return a->epsilon > b->epsilon; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (order[i]->alpha < order[i - 1]->alpha) out.monotone = false;
    return out;
}

inline KCurve k_epsilon_curve(const HeatKernelModel& model, const MeasureModel& mu, double p,
                              const std::vector<double>& epsilons, const ProbeSet& probes,
                              double alpha_min, double alpha_max, const QuadratureConfig& q) {
    return k_epsilon_curve([&](double a) { return gamma(model, mu, p, a, probes, q); }, epsilons,
                           alpha_min, alpha_max);
}

// -- exponents -------------------------------------------------------------------

/// Decay order 1 - (p'/(p'-1)) (p-1)/p obtained from ultracontractivity with
/// exponent p'/(p'-1).
inline double ultracontractive_decay_order(double p, double p_prime) {
    require(p >= 1 && p_prime > 1, "need p >= 1 and p' > 1");
    return 1.0 - (p_prime / (p_prime - 1.0)) * ((p - 1.0) / p);
}

/// Gagliardo–Nirenberg exponent θ = (d - p'(d - 2)) / (2p').
inline double gagliardo_nirenberg_theta(double d, double p_prime) {
    require(d >= 1 && p_prime >= 1, "need d >= 1 and p' >= 1");
    return (d - p_prime * (d - 2.0)) / (2.0 * p_prime);
}

}  // namespace kkl
