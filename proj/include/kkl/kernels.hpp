#pragma once

/**
 * @file kernels.hpp
 * @brief Heat kernels, resolvent kernels and time-window functionals.
 *
 * The catalog holds two exact kernels (Brownian motion on R^d and Brownian
 * motion killed on leaving the half-line) and two upper-bound envelopes
 * (sub-Gaussian and jump type) stated for t in (0, 1]. Envelopes live on an
 * abstract metric space, so they are evaluated on a distance rather than on
 * a pair of points.
 *
 * Time functionals are integrals of s -> w(s) p_s(x, y):
 *   resolvent       ∫_0^∞ e^{-αs} p_s ds
 *   window          ∫_0^t p_s ds
 *   weighted window ∫_0^t s^{-a/2} p_s ds
 *   shifted window  ∫_a^{a+t} p_s ds
 * The small-time part is integrated in the variable u = log s. On the
 * diagonal x = y the value is +inf whenever the small-time singularity is not
 * integrable.
 */

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "kkl/errors.hpp"
#include "kkl/quadrature.hpp"

namespace kkl {

using Point = std::vector<double>;

struct GaussianRd {
    int d = 1;
};
struct KilledHalfLine {};
struct SubGaussianEnvelope {
    double c3 = 1.0;
    double c4 = 1.0;
    double d_f = 1.0;
    double d_w = 2.0;
};
struct JumpEnvelope {
    double c3 = 1.0;
    double d_f = 1.0;
    double d_w = 2.0;
};

class HeatKernelModel {
public:
    using Kind = std::variant<GaussianRd, KilledHalfLine, SubGaussianEnvelope, JumpEnvelope>;

    HeatKernelModel(Kind kind) : kind_(std::move(kind)) { validate(); }

    static HeatKernelModel gaussian(int d) { return {GaussianRd{d}}; }
    static HeatKernelModel killed_half_line() { return {KilledHalfLine{}}; }
    static HeatKernelModel sub_gaussian(double c3, double c4, double d_f, double d_w) {
        return {SubGaussianEnvelope{c3, c4, d_f, d_w}};
    }
    static HeatKernelModel jump(double c3, double d_f, double d_w) {
        return {JumpEnvelope{c3, d_f, d_w}};
    }

    const Kind& kind() const { return kind_; }

    bool is_exact() const {
        return std::holds_alternative<GaussianRd>(kind_) ||
               std::holds_alternative<KilledHalfLine>(kind_);
    }
    bool is_envelope() const { return !is_exact(); }

    /// True when p_t(x, y) depends on x, y only through their distance.
    bool is_radial() const { return !std::holds_alternative<KilledHalfLine>(kind_); }

    /// Dimension of the state space for exact kernels; d_f for envelopes.
    double dimension() const {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, GaussianRd>)
                    return k.d;
                else if constexpr (std::is_same_v<K, KilledHalfLine>)
                    return 1.0;
                else
                    return k.d_f;
            },
            kind_);
    }

    /// Walk dimension: 2 for the Brownian kernels.
    double walk_dimension() const {
        if (const auto* s = std::get_if<SubGaussianEnvelope>(&kind_)) return s->d_w;
        if (const auto* j = std::get_if<JumpEnvelope>(&kind_)) return j->d_w;
        return 2.0;
    }

    /// Spectral dimension d_s = 2 d_f / d_w.
    double spectral_dimension() const { return 2.0 * dimension() / walk_dimension(); }

    /// Exponent κ with p_s(x, x) ≍ s^{-κ} as s -> 0.
    double diagonal_time_exponent() const { return dimension() / walk_dimension(); }

    std::string name() const {
        std::ostringstream os;
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, GaussianRd>)
                    os << "GaussianRd(d=" << k.d << ")";
                else if constexpr (std::is_same_v<K, KilledHalfLine>)
                    os << "KilledHalfLine";
                else if constexpr (std::is_same_v<K, SubGaussianEnvelope>)
                    os << "SubGaussianEnvelope(c3=" << k.c3 << ", c4=" << k.c4
                       << ", d_f=" << k.d_f << ", d_w=" << k.d_w << ")";
                else
                    os << "JumpEnvelope(c3=" << k.c3 << ", d_f=" << k.d_f << ", d_w=" << k.d_w
                       << ")";
            },
            kind_);
        return os.str();
    }

private:
    void validate() const {
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, GaussianRd>) {
                    require(k.d >= 1, "GaussianRd dimension must be >= 1");
                } else if constexpr (std::is_same_v<K, SubGaussianEnvelope>) {
                    require(k.c3 > 0 && k.c4 > 0, "envelope constants must be positive");
                    require(k.d_f >= 1, "d_f must be >= 1");
                    require(k.d_w >= 2, "d_w must be >= 2");
                } else if constexpr (std::is_same_v<K, JumpEnvelope>) {
                    require(k.c3 > 0, "envelope constants must be positive");
                    require(k.d_f >= 1, "d_f must be >= 1");
                    require(k.d_w >= 2, "d_w must be >= 2");
                }
            },
            kind_);
    }

    Kind kind_;
};

// -- functionals -------------------------------------------------------------

struct Resolvent {
    double alpha;
};
struct Window {
    double t;
};
struct WeightedWindow {
    double t;
    double a;
};
/// ∫_start^{start+t} p_s ds.
struct ShiftedWindow {
    double start;
    double t;
};
using Functional = std::variant<Resolvent, Window, WeightedWindow, ShiftedWindow>;

inline std::string functional_name(const Functional& f) {
    std::ostringstream os;
    std::visit(
        [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, Resolvent>)
                os << "resolvent(alpha=" << v.alpha << ")";
            else if constexpr (std::is_same_v<V, Window>)
                os << "window(t=" << v.t << ")";
            else if constexpr (std::is_same_v<V, WeightedWindow>)
                os << "weighted_window(t=" << v.t << ", a=" << v.a << ")";
            else
                os << "shifted_window(start=" << v.start << ", t=" << v.t << ")";
        },
        f);
    return os.str();
}

/// Behaviour of a radial functional F(ρ) as ρ -> 0: F ≍ ρ^{-power} when
/// power > 0, F ≍ -log ρ when log is set, bounded otherwise.
struct NearDiagonal {
    double power = 0.0;
    bool log = false;

    bool bounded() const { return power <= 0.0 && !log; }
};

namespace detail {

inline double small_time_weight_exponent(const Functional& f) {
    if (const auto* w = std::get_if<WeightedWindow>(&f)) return w->a / 2.0;
    return 0.0;
}

inline void check_functional(const HeatKernelModel& model, const Functional& f) {
    std::visit(
        [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, Resolvent>) {
                require(v.alpha > 0, "alpha must be positive");
                require(model.is_exact(),
                        "envelope models admit only window functionals with t <= 1");
            } else if constexpr (std::is_same_v<V, Window>) {
                require(v.t > 0, "t must be positive");
                require(model.is_exact() || v.t <= 1.0, "envelope windows require t <= 1");
            } else if constexpr (std::is_same_v<V, WeightedWindow>) {
                require(v.t > 0, "t must be positive");
                require(v.a >= 0 && v.a <= 1, "a must lie in [0, 1]");
                require(model.is_exact() || v.t <= 1.0, "envelope windows require t <= 1");
            } else {
                require(v.t > 0, "t must be positive");
                require(v.start >= 0, "window start must be nonnegative");
                require(model.is_exact() || v.start + v.t <= 1.0,
                        "envelope windows require t <= 1");
            }
        },
        f);
}

// Densities are formed in log space so that s -> 0 never produces inf * 0.
inline double gaussian_density(int d, double s, double rho) {
    return std::exp(-0.5 * d * std::log(2.0 * std::numbers::pi * s) - rho * rho / (2.0 * s));
}

inline double sub_gaussian_density(const SubGaussianEnvelope& k, double s, double rho) {
    const double tail = std::pow(std::pow(rho, k.d_w) / s, 1.0 / (k.d_w - 1.0));
    return k.c3 * std::exp(-(k.d_f / k.d_w) * std::log(s) - k.c4 * tail);
}

inline double jump_density(const JumpEnvelope& k, double s, double rho) {
    const double near = std::pow(s, -k.d_f / k.d_w);
    if (rho == 0.0) return k.c3 * near;
    return k.c3 * std::min(near, s / std::pow(rho, k.d_f + k.d_w));
}

inline double half_line_density(double s, double x, double y) {
    const double a = (x - y) * (x - y) / (2.0 * s);
    return std::exp(-0.5 * std::log(2.0 * std::numbers::pi * s) - a) *
           -std::expm1(-2.0 * x * y / s);
}

/// Everything the time integrator needs about s -> p_s(x, y).
struct TimeDensity {
    std::function<double(double)> at;
    /// Upper bound of p_s over all (x, y), used to truncate Laplace tails.
    std::function<double(double)> bound;
    bool on_diagonal = false;
    /// κ with p_s ≍ s^{-κ} on the diagonal.
    double diagonal_exponent = 0.0;
    /// Time where the density has a kink (jump envelopes).
    std::optional<double> kink;
};

// ∫_lo^hi w(s) p_s ds with the small-time regime in log-time.
inline double log_time_integral(const TimeDensity& dens, double weight_exponent, double discount,
                                double hi, const QuadratureConfig& q) {
    auto integrand = [&](double u) {
        const double s = std::exp(u);
        if (s == 0.0) return 0.0;
        const double v = std::exp((1.0 - weight_exponent) * u) * dens.at(s);
        return discount > 0.0 ? v * std::exp(-discount * s) : v;
    };
    const double top = std::log(hi);
    if (dens.kink && *dens.kink > 0.0 && *dens.kink < hi) {
        const double mid = std::log(*dens.kink);
        return integrate_lower(integrand, mid, q).value + integrate(integrand, mid, top, q).value;
    }
    return integrate_lower(integrand, top, q).value;
}

inline double plain_time_integral(const TimeDensity& dens, double weight_exponent, double discount,
                                  double lo, double hi, const QuadratureConfig& q) {
    auto integrand = [&](double s) {
        double v = dens.at(s);
        if (weight_exponent != 0.0) v *= std::pow(s, -weight_exponent);
        if (discount > 0.0) v *= std::exp(-discount * s);
        return v;
    };
    std::vector<double> breaks;
    if (dens.kink) breaks.push_back(*dens.kink);
    return integrate_breaks(integrand, lo, hi, breaks, q).value;
}

// ∫_0^hi (hi may be +inf) of s^{-weight} e^{-discount s} p_s ds.
inline double time_integral(const TimeDensity& dens, double weight_exponent, double discount,
                            double hi, const QuadratureConfig& q) {
    if (dens.on_diagonal && dens.diagonal_exponent + weight_exponent >= 1.0) return kInf;
    const double split = std::min(q.t_split, hi);
    double total = log_time_integral(dens, weight_exponent, discount, split, q);
    if (hi <= split) return total;
    double top = hi;
    if (std::isinf(hi)) {
        // Truncate where e^{-αT} sup p_T / α drops below abs_tol.
        top = split;
        for (int k = 0; k < 200; ++k) {
            top *= 2.0;
            if (std::exp(-discount * top) * dens.bound(top) / discount < 1e-3 * q.abs_tol) break;
        }
    }
    total += plain_time_integral(dens, weight_exponent, discount, split, top, q);
    return total;
}

inline double evaluate_functional(const Functional& f, const TimeDensity& dens,
                                  const QuadratureConfig& q) {
    return std::visit(
        [&](const auto& v) -> double {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, Resolvent>) {
                return time_integral(dens, 0.0, v.alpha, kInf, q);
            } else if constexpr (std::is_same_v<V, Window>) {
                return time_integral(dens, 0.0, 0.0, v.t, q);
            } else if constexpr (std::is_same_v<V, WeightedWindow>) {
                return time_integral(dens, v.a / 2.0, 0.0, v.t, q);
            } else {
                if (v.start == 0.0) return time_integral(dens, 0.0, 0.0, v.t, q);
                return plain_time_integral(dens, 0.0, 0.0, v.start, v.start + v.t, q);
            }
        },
        f);
}

inline TimeDensity radial_density(const HeatKernelModel& model, double rho) {
    TimeDensity dens;
    dens.on_diagonal = rho == 0.0;
    dens.diagonal_exponent = model.diagonal_time_exponent();
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, GaussianRd>) {
                const int d = k.d;
                dens.at = [d, rho](double s) { return gaussian_density(d, s, rho); };
                dens.bound = [d](double s) { return gaussian_density(d, s, 0.0); };
            } else if constexpr (std::is_same_v<K, SubGaussianEnvelope>) {
                dens.at = [k, rho](double s) { return sub_gaussian_density(k, s, rho); };
                dens.bound = [k](double s) { return k.c3 * std::pow(s, -k.d_f / k.d_w); };
            } else if constexpr (std::is_same_v<K, JumpEnvelope>) {
                dens.at = [k, rho](double s) { return jump_density(k, s, rho); };
                dens.bound = [k](double s) { return k.c3 * std::pow(s, -k.d_f / k.d_w); };
                if (rho > 0.0) dens.kink = std::pow(rho, k.d_w);
            } else {
                throw InputError("KilledHalfLine is not a radial kernel; pass points");
            }
        },
        model.kind());
    return dens;
}

inline TimeDensity half_line_time_density(double x, double y) {
    TimeDensity dens;
    dens.on_diagonal = x == y;
    dens.diagonal_exponent = 0.5;
    dens.at = [x, y](double s) { return half_line_density(s, x, y); };
    dens.bound = [](double s) { return gaussian_density(1, s, 0.0); };
    return dens;
}

inline void check_points(const HeatKernelModel& model, const Point& x, const Point& y) {
    require(model.is_exact(), "envelope models are evaluated on a distance, not on points");
    if (std::holds_alternative<KilledHalfLine>(model.kind())) {
        require(x.size() == 1 && y.size() == 1, "KilledHalfLine points are one-dimensional");
        require(x[0] > 0.0 && y[0] > 0.0, "KilledHalfLine points must be positive");
    } else {
        const auto d = static_cast<std::size_t>(std::get<GaussianRd>(model.kind()).d);
        require(x.size() == d && y.size() == d, "point dimension does not match the model");
    }
}

inline double distance(const Point& x, const Point& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
}

inline TimeDensity point_density(const HeatKernelModel& model, const Point& x, const Point& y) {
    check_points(model, x, y);
    if (std::holds_alternative<KilledHalfLine>(model.kind()))
        return half_line_time_density(x[0], y[0]);
    return radial_density(model, distance(x, y));
}

}  // namespace detail

// -- heat kernel -------------------------------------------------------------

/// p_t at distance rho (radial models: GaussianRd and the envelopes).
inline double heat_eval(const HeatKernelModel& model, double t, double rho) {
    require(t > 0, "t must be positive");
    require(rho >= 0, "distance must be nonnegative");
    require(model.is_exact() || t <= 1.0, "envelope kernels are stated for t <= 1");
    return detail::radial_density(model, rho).at(t);
}

inline double heat_eval(const HeatKernelModel& model, double t, const Point& x, const Point& y) {
    require(t > 0, "t must be positive");
    return detail::point_density(model, x, y).at(t);
}

// -- functionals -------------------------------------------------------------

inline double functional_eval(const HeatKernelModel& model, const Functional& f, double rho,
                              const QuadratureConfig& q) {
    detail::check_functional(model, f);
    require(rho >= 0, "distance must be nonnegative");
    return detail::evaluate_functional(f, detail::radial_density(model, rho), q);
}

inline double functional_eval(const HeatKernelModel& model, const Functional& f, const Point& x,
                              const Point& y, const QuadratureConfig& q) {
    detail::check_functional(model, f);
    return detail::evaluate_functional(f, detail::point_density(model, x, y), q);
}

/// r_α(x, y) = ∫_0^∞ e^{-αt} p_t(x, y) dt.
inline double resolvent_eval(const HeatKernelModel& model, double alpha, const Point& x,
                             const Point& y, const QuadratureConfig& q) {
    return functional_eval(model, Resolvent{alpha}, x, y, q);
}
inline double resolvent_eval(const HeatKernelModel& model, double alpha, double rho,
                             const QuadratureConfig& q) {
    return functional_eval(model, Resolvent{alpha}, rho, q);
}

/// ∫_0^t p_s(x, y) ds.
inline double occupation_window(const HeatKernelModel& model, double t, const Point& x,
                                const Point& y, const QuadratureConfig& q) {
    return functional_eval(model, Window{t}, x, y, q);
}
inline double occupation_window(const HeatKernelModel& model, double t, double rho,
                                const QuadratureConfig& q) {
    return functional_eval(model, Window{t}, rho, q);
}

/// ∫_0^t s^{-a/2} p_s(x, y) ds.
inline double weighted_window(const HeatKernelModel& model, double t, double a, const Point& x,
                              const Point& y, const QuadratureConfig& q) {
    return functional_eval(model, WeightedWindow{t, a}, x, y, q);
}
inline double weighted_window(const HeatKernelModel& model, double t, double a, double rho,
                              const QuadratureConfig& q) {
    return functional_eval(model, WeightedWindow{t, a}, rho, q);
}

/// Small-distance behaviour of a radial functional, from the scaling
/// s ~ ρ^{d_w} of the kernel.
inline NearDiagonal near_diagonal(const HeatKernelModel& model, const Functional& f) {
    if (std::holds_alternative<ShiftedWindow>(f) && std::get<ShiftedWindow>(f).start > 0.0)
        return {};
    const double kappa = model.diagonal_time_exponent() + detail::small_time_weight_exponent(f);
    if (kappa > 1.0) return {model.walk_dimension() * (kappa - 1.0), false};
    if (kappa == 1.0) return {0.0, true};
    return {};
}

/// Closed form of ∫_0^τ p_s(0, z) ds for Brownian motion on the line.
inline double gaussian_line_window(double tau, double z) {
    if (tau <= 0.0) return 0.0;
    const double az = std::fabs(z);
    return std::sqrt(2.0 * tau / std::numbers::pi) * std::exp(-z * z / (2.0 * tau)) -
           az * std::erfc(az / std::sqrt(2.0 * tau));
}

// -- validation --------------------------------------------------------------

struct KernelProbe {
    double t;
    double s;
    Point x;
    Point y;
};

struct ProbeViolation {
    double symmetry = 0.0;
    double chapman_kolmogorov = 0.0;
};

struct KernelValidationReport {
    std::string model;
    std::vector<ProbeViolation> probes;
    double max_symmetry_violation = 0.0;
    double max_chapman_kolmogorov_violation = 0.0;
};

namespace detail {

// ∫ p_s(x, z) p_t(z, y) m(dz) by nested quadrature.
inline double chapman_kolmogorov(const HeatKernelModel& model, double s, double t, const Point& x,
                                 const Point& y, const QuadratureConfig& q) {
    if (std::holds_alternative<KilledHalfLine>(model.kind())) {
        auto f = [&](double z) {
            return z <= 0.0 ? 0.0 : half_line_density(s, x[0], z) * half_line_density(t, z, y[0]);
        };
        const double reach = 12.0 * std::sqrt(std::max(s, t));
        const double hi = std::max(x[0], y[0]) + reach;
        return integrate_breaks(f, 0.0, hi, {x[0], y[0]}, q).value;
    }
    const int d = std::get<GaussianRd>(model.kind()).d;
    const double reach = 12.0 * std::sqrt(std::max(s, t));
    Point z(static_cast<std::size_t>(d));
    std::function<double(int, const QuadratureConfig&)> nest = [&](int k,
                                                                   const QuadratureConfig& qk) {
        const auto ku = static_cast<std::size_t>(k);
        const double lo = std::min(x[ku], y[ku]) - reach;
        const double hi = std::max(x[ku], y[ku]) + reach;
        auto f = [&](double zk) {
            z[ku] = zk;
            if (k + 1 == d) {
                return gaussian_density(d, s, distance(x, z)) *
                       gaussian_density(d, t, distance(z, y));
            }
            return nest(k + 1, qk.inner());
        };
        return integrate_breaks(f, lo, hi, {x[ku], y[ku]}, qk).value;
    };
    return nest(0, q);
}

inline double relative_gap(double a, double b) {
    const double scale = std::max(std::fabs(a), std::fabs(b));
    return scale == 0.0 ? 0.0 : std::fabs(a - b) / scale;
}

}  // namespace detail

/// Symmetry and Chapman–Kolmogorov defects of an exact kernel over probes
/// (t, s, x, y): |p_{t+s}(x,y) - ∫ p_s(x,z) p_t(z,y) m(dz)| relative.
inline KernelValidationReport validate_kernel(const HeatKernelModel& model,
                                              const QuadratureConfig& q,
                                              const std::vector<KernelProbe>& probes) {
    require(model.is_exact(), "envelopes are bounds, not kernels; validation needs an exact model");
    q.validate();
    KernelValidationReport report;
    report.model = model.name();
    for (const auto& probe : probes) {
        require(probe.t > 0 && probe.s > 0, "probe times must be positive");
        ProbeViolation v;
        v.symmetry = detail::relative_gap(heat_eval(model, probe.t, probe.x, probe.y),
                                          heat_eval(model, probe.t, probe.y, probe.x));
        const double direct = heat_eval(model, probe.t + probe.s, probe.x, probe.y);
        const double convolved =
            detail::chapman_kolmogorov(model, probe.s, probe.t, probe.x, probe.y, q);
        v.chapman_kolmogorov = detail::relative_gap(direct, convolved);
        report.max_symmetry_violation = std::max(report.max_symmetry_violation, v.symmetry);
        report.max_chapman_kolmogorov_violation =
            std::max(report.max_chapman_kolmogorov_violation, v.chapman_kolmogorov);
        report.probes.push_back(v);
    }
    return report;
}

}  // namespace kkl
