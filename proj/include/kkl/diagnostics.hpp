#pragma once

/**
 * @file diagnostics.hpp
 * @brief γ(α) and η(t) curves, decay-order fits and class verdicts.
 *
 *     γ(α) = sup_x (∫ r_α(x, y)^p μ(dy))^{1/p}
 *     η(t) = sup_x (∫ (∫_0^t p_s(x, y) ds)^p μ(dy))^{1/p}
 *
 * The supremum over x is taken over a finite probe set, optionally refined
 * by golden-section search along the coordinate axes. Verdicts are numerical
 * diagnostics with explicit thresholds, never proofs.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kkl/errors.hpp"
#include "kkl/kernels.hpp"
#include "kkl/measures.hpp"
#include "kkl/parallel.hpp"
#include "kkl/quadrature.hpp"

namespace kkl {

struct ProbeSet {
    std::vector<Point> points;
    /// Golden-section refinement around the best probe.
    bool refine = false;
    /// Kernel and measure are jointly translation invariant: one probe suffices.
    bool translation_invariant = false;
    /// Half-width of the refinement bracket along each axis.
    double refine_radius = 0.5;
};

/// A supremum over probes together with the point attaining it.
struct ProbeMax {
    double value = 0.0;
    Point argmax;
};

namespace detail {

// Envelope kernels with a volume-growth measure do not depend on x at all.
inline bool homogeneous(const HeatKernelModel& model, const MeasureModel& mu) {
    if (model.is_envelope()) return std::holds_alternative<VolumeGrowth>(mu.kind());
    return std::holds_alternative<GaussianRd>(model.kind()) && mu.translation_invariant();
}

/// The probe points actually evaluated: singular points of μ are always added.
inline std::vector<Point> effective_probes(const HeatKernelModel& model, const MeasureModel& mu,
                                           const ProbeSet& probes) {
    if (homogeneous(model, mu)) {
        if (model.is_envelope()) return {Point{}};
        if (!probes.points.empty()) return {probes.points.front()};
        return {Point(static_cast<std::size_t>(model.dimension()), 0.0)};
    }
    require(!probes.points.empty(), "probe set must not be empty");
    require(!probes.translation_invariant,
            "translation_invariant probes need a Gaussian kernel with Lebesgue measure");
    std::vector<Point> pts = probes.points;
    for (const auto& s : mu.singular_points()) {
        if (std::find(pts.begin(), pts.end(), s) == pts.end()) pts.push_back(s);
    }
    return pts;
}

inline double probe_value(const HeatKernelModel& model, const MeasureModel& mu,
                          const Functional& f, double p, const Point& x, const QuadratureConfig& q) {
    const double v = kernel_power_integral(mu, model, f, p, x, q);
    return std::isinf(v) ? kInf : std::pow(v, 1.0 / p);
}

}  // namespace detail

/// sup over the probes of (∫ F(x, y)^p μ(dy))^{1/p}.
inline ProbeMax probe_sup(const HeatKernelModel& model, const MeasureModel& mu, const Functional& f,
                          double p, const ProbeSet& probes, const QuadratureConfig& q) {
    require(p >= 1.0, "p must be >= 1");
    const auto pts = detail::effective_probes(model, mu, probes);
    ProbeMax best{-1.0, {}};
    for (const auto& x : pts) {
        const double v = detail::probe_value(model, mu, f, p, x, q);
        if (v > best.value) best = {v, x};
        if (std::isinf(v)) return best;
    }
    if (probes.refine && !detail::homogeneous(model, mu)) {
        Point x = best.argmax;
        for (std::size_t axis = 0; axis < x.size(); ++axis) {
            auto along = [&](double c) {
                Point y = x;
                y[axis] = c;
                return detail::probe_value(model, mu, f, p, y, q);
            };
            double c = x[axis];
            const double v = golden_maximize(along, x[axis] - probes.refine_radius,
                                             x[axis] + probes.refine_radius,
                                             1e-4 * probes.refine_radius, &c);
            if (v > best.value) {
                x[axis] = c;
                best = {v, x};
            }
        }
    }
    return best;
}

inline double gamma(const HeatKernelModel& model, const MeasureModel& mu, double p, double alpha,
                    const ProbeSet& probes, const QuadratureConfig& q) {
    require(model.is_exact(), "gamma requires an exact kernel");
    return probe_sup(model, mu, Resolvent{alpha}, p, probes, q).value;
}

inline double eta(const HeatKernelModel& model, const MeasureModel& mu, double p, double t,
                  const ProbeSet& probes, const QuadratureConfig& q) {
    return probe_sup(model, mu, Window{t}, p, probes, q).value;
}

// -- decay fits --------------------------------------------------------------

struct CurvePoint {
    double x = 0.0;
    double value = std::numeric_limits<double>::quiet_NaN();
    Point argmax;
    /// Empty when the point was computed; otherwise the failure message.
    std::string error;

    bool ok() const { return error.empty(); }
};
using Curve = std::vector<CurvePoint>;

struct DecayFit {
    double delta = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Least-squares slope of log η against log t over t ∈ [t_min, t_max].
inline DecayFit fit_decay_order(const std::vector<std::pair<double, double>>& curve, double t_min,
                                double t_max) {
    require(t_min > 0 && t_max > t_min, "fit window must satisfy 0 < t_min < t_max");
    std::vector<double> xs, ys;
    for (const auto& [t, v] : curve) {
        if (t < t_min * (1 - 1e-12) || t > t_max * (1 + 1e-12)) continue;
        require(std::isfinite(v) && v > 0, "fit values must be finite and positive");
        xs.push_back(std::log(t));
        ys.push_back(std::log(v));
    }
    require(xs.size() >= 5, "decay fit needs at least 5 points inside the window");
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    require(*hi - *lo >= 2.0 * std::log(10.0) * (1 - 1e-9), "decay fit window must span 2 decades");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    DecayFit fit;
    fit.delta = sxy / sxx;
    fit.intercept = my - fit.delta * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : std::min(1.0, sxy * sxy / (sxx * syy));
    fit.points = xs.size();
    return fit;
}

inline DecayFit fit_decay_order(const Curve& curve, double t_min, double t_max) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& c : curve)
        if (c.ok()) pts.emplace_back(c.x, c.value);
    return fit_decay_order(pts, t_min, t_max);
}

/// Log-spaced grid of n points from a to b inclusive.
inline std::vector<double> log_grid(double a, double b, int n) {
    require(a > 0 && b > a && n >= 2, "log grid needs 0 < a < b and n >= 2");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g[static_cast<std::size_t>(i)] = a * std::pow(b / a, static_cast<double>(i) / (n - 1));
    g.back() = b;
    return g;
}

// -- classification ----------------------------------------------------------

struct VerdictThresholds {
    /// η(t_min) must fall to this fraction of η(t_max).
    double decay_factor = 0.1;
    /// The fitted slope must exceed this.
    double min_slope = 0.0;
    /// R² needed to certify an order δ.
    double min_r_squared = 0.99;
    /// Verdicts are withheld above this fraction of failed grid points.
    double max_failure_fraction = 0.2;
};

struct ClassReport {
    double p = 1.0;
    Curve gamma_curve;
    Curve eta_curve;
    std::optional<DecayFit> delta_fit;
    bool verdict_Dp = false;
    bool verdict_Kp = false;
    std::optional<double> verdict_Kpdelta;
    bool withheld = false;
    VerdictThresholds thresholds;
    std::vector<Point> probes;
    std::vector<std::string> notes;
};

namespace detail {

inline Curve compute_curve(const HeatKernelModel& model, const MeasureModel& mu, double p,
                           const std::vector<double>& grid,
                           const std::function<Functional(double)>& functional,
                           const ProbeSet& probes, const QuadratureConfig& q) {
    Curve curve(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        curve[i].x = grid[i];
        try {
            const auto m = probe_sup(model, mu, functional(grid[i]), p, probes, q);
            curve[i].value = m.value;
            curve[i].argmax = m.argmax;
        } catch (const NumericError& e) {
            curve[i].error = e.what();
        }
    });
    return curve;
}

inline std::size_t failures(const Curve& c) {
    return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [](const auto& p) { return !p.ok(); }));
}

inline void check_grid(const std::vector<double>& grid, const char* name) {
    require(grid.size() >= 5, std::string(name) + " needs at least 5 points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        require(grid[i] > 0, std::string(name) + " values must be positive");
        require(i == 0 || grid[i] > grid[i - 1], std::string(name) + " must be increasing");
    }
}

// Decay verdict shared by classify and the weighted-window diagnostic.
struct DecayVerdict {
    bool decays = false;
    std::optional<DecayFit> fit;
    std::optional<double> order;
};

inline DecayVerdict decay_verdict(const Curve& curve, const VerdictThresholds& th,
                                  std::vector<std::string>& notes, const std::string& label) {
    DecayVerdict out;
    const auto& first = curve.front();
    const auto& last = curve.back();
    std::vector<std::pair<double, double>> finite;
    for (const auto& c : curve)
        if (c.ok() && std::isfinite(c.value) && c.value > 0) finite.emplace_back(c.x, c.value);
    if (finite.size() == curve.size()) {
        try {
            out.fit = fit_decay_order(finite, curve.front().x, curve.back().x);
        } catch (const InputError& e) {
            notes.push_back(label + " fit unavailable: " + e.what());
        }
    } else {
        notes.push_back(label + " curve has infinite, zero or failed points; no decay fit");
    }
    if (first.ok() && last.ok() && std::isfinite(first.value) && std::isfinite(last.value) &&
        out.fit) {
        out.decays = first.value <= th.decay_factor * last.value && out.fit->delta > th.min_slope;
    }
    if (out.fit && out.fit->r_squared >= th.min_r_squared && out.decays) out.order = out.fit->delta;
    return out;
}

}  // namespace detail

/// Computes the γ and η curves and the D^p / K^p / K^{p,δ} verdicts.
/// Envelope kernels have no resolvent: their γ curve stays empty and the
/// D^p verdict falls back to finiteness of η at the largest t.
inline ClassReport classify(const HeatKernelModel& model, const MeasureModel& mu, double p,
                            const ProbeSet& probes, const std::vector<double>& alpha_grid,
                            const std::vector<double>& t_grid, const QuadratureConfig& q,
                            const VerdictThresholds& th = {}) {
    require(p >= 1.0, "p must be >= 1");
    q.validate();
    detail::check_grid(t_grid, "t grid");
    if (model.is_exact()) detail::check_grid(alpha_grid, "alpha grid");
    if (model.is_envelope()) require(t_grid.back() <= 1.0, "envelope t grid must stay within (0, 1]");

    ClassReport r;
    r.p = p;
    r.thresholds = th;
    r.probes = detail::effective_probes(model, mu, probes);
    if (model.is_exact()) {
        r.gamma_curve = detail::compute_curve(
            model, mu, p, alpha_grid, [](double a) -> Functional { return Resolvent{a}; }, probes, q);
    }
    r.eta_curve = detail::compute_curve(
        model, mu, p, t_grid, [](double t) -> Functional { return Window{t}; }, probes, q);

    const std::size_t total = r.gamma_curve.size() + r.eta_curve.size();
    const std::size_t failed = detail::failures(r.gamma_curve) + detail::failures(r.eta_curve);
    r.notes.push_back("verdicts are numerical diagnostics over finite grids, not proofs");
    if (!detail::homogeneous(model, mu)) {
        r.notes.push_back("sup over x approximated by " + std::to_string(r.probes.size()) +
                          " probes" + (probes.refine ? " with axis refinement" : "") +
                          "; probe adequacy is the caller's responsibility");
    }
    if (failed > 0) {
        r.notes.push_back(std::to_string(failed) + " of " + std::to_string(total) +
                          " grid points failed");
    }
    if (static_cast<double>(failed) > th.max_failure_fraction * static_cast<double>(total)) {
        r.withheld = true;
        r.notes.push_back("verdicts withheld: failure fraction above threshold");
        return r;
    }

    // Monotonicity along the curves, asserted on the computed data.
    for (std::size_t i = 1; i < r.gamma_curve.size(); ++i) {
        const auto &a = r.gamma_curve[i - 1], &b = r.gamma_curve[i];
        if (a.ok() && b.ok() && b.value > a.value)
            r.notes.push_back("gamma curve not nonincreasing at alpha=" + std::to_string(b.x));
    }
    for (std::size_t i = 1; i < r.eta_curve.size(); ++i) {
        const auto &a = r.eta_curve[i - 1], &b = r.eta_curve[i];
        if (a.ok() && b.ok() && b.value < a.value)
            r.notes.push_back("eta curve not nondecreasing at t=" + std::to_string(b.x));
    }

    if (model.is_exact()) {
        const auto& top = r.gamma_curve.back();
        r.verdict_Dp = top.ok() && std::isfinite(top.value);
    } else {
        const auto& top = r.eta_curve.back();
        r.verdict_Dp = top.ok() && std::isfinite(top.value);
        r.notes.push_back("envelope kernel: D^p verdict read from eta at the largest t");
    }
    auto dv = detail::decay_verdict(r.eta_curve, th, r.notes, "eta");
    r.delta_fit = dv.fit;
    r.verdict_Kp = r.verdict_Dp && dv.decays;
    if (r.verdict_Kp) r.verdict_Kpdelta = dv.order;
    return r;
}

// -- equivalence inequalities -------------------------------------------------

struct EquivalenceSample {
    double alpha = 1.0;
    double beta = 2.0;
    double t = 1.0;
    /// Start of the shifted window in (d); defaults to t when absent.
    std::optional<double> shift;
};

struct InequalityCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    /// rhs·(1 + tolerance) − lhs: the slack left under the acceptance rule, so
    /// exact identities do not turn negative on rounding.
    double margin = 0.0;
    bool holds = true;
    bool vacuous = false;
};

struct EquivalenceResult {
    EquivalenceSample sample;
    std::vector<InequalityCheck> checks;
    std::vector<std::string> notes;
};

struct EquivalenceReport {
    double p = 1.0;
    double tolerance = 0.0;
    std::vector<EquivalenceResult> results;
    bool all_hold = true;
};

/**
 * Quantitative inequalities linking γ and η:
 *   (a) γ(α) ≤ (β/α) γ(β)
 *   (b) η(t) ≤ e^{αt} γ(α)
 *   (c) γ(α) ≤ η(t) / (1 - e^{-αt})
 *   (d) sup_x (∫ (∫_a^{a+t} p_s ds)^p dμ)^{1/p} ≤ η(t)
 * A check holds when lhs ≤ rhs·(1 + tolerance).
 */
inline EquivalenceReport equivalence_suite(const HeatKernelModel& model, const MeasureModel& mu,
                                           double p, const std::vector<EquivalenceSample>& samples,
                                           const ProbeSet& probes, const QuadratureConfig& q,
                                           double tolerance = 1e-9) {
    require(model.is_exact(), "equivalence suite requires an exact kernel");
    require(p >= 1.0, "p must be >= 1");
    for (const auto& s : samples) {
        require(s.alpha > 0 && s.beta >= s.alpha, "samples need 0 < alpha <= beta");
        require(s.t > 0, "sample t must be positive");
        require(!s.shift || *s.shift > 0, "shifted window start must be positive");
    }
    EquivalenceReport rep;
    rep.p = p;
    rep.tolerance = tolerance;
    rep.results.resize(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        auto sup = [&](const Functional& f) { return probe_sup(model, mu, f, p, probes, q).value; };
        const double ga = sup(Resolvent{s.alpha});
        const double gb = s.beta == s.alpha ? ga : sup(Resolvent{s.beta});
        const double et = sup(Window{s.t});
        const double a = s.shift.value_or(s.t);
        const double shifted = sup(ShiftedWindow{a, s.t});
        auto& out = rep.results[i];
        out.sample = s;
        out.sample.shift = a;
        auto add = [&](std::string name, double lhs, double rhs) {
            InequalityCheck c{std::move(name), lhs, rhs, rhs * (1.0 + tolerance) - lhs, true, false};
            if (std::isinf(lhs) || std::isinf(rhs)) {
                c.vacuous = true;
                c.margin = std::numeric_limits<double>::quiet_NaN();
                out.notes.push_back(c.name + ": infinite quantity, check is vacuous");
            } else {
                c.holds = c.margin >= 0.0;
            }
            out.checks.push_back(std::move(c));
        };
        add("(a) gamma(alpha) <= (beta/alpha) gamma(beta)", ga, s.beta / s.alpha * gb);
        add("(b) eta(t) <= exp(alpha t) gamma(alpha)", et, std::exp(s.alpha * s.t) * ga);
        add("(c) gamma(alpha) <= eta(t) / (1 - exp(-alpha t))", ga,
            et / -std::expm1(-s.alpha * s.t));
        add("(d) shifted window <= eta(t)", shifted, et);
    });
    for (const auto& r : rep.results)
        for (const auto& c : r.checks) rep.all_hold = rep.all_hold && c.holds;
    return rep;
}

// -- weighted windows ---------------------------------------------------------

struct GuneysuReport {
    double a = 0.0;
    Curve curve;
    std::optional<DecayFit> fit;
    bool verdict = false;
    bool withheld = false;
    VerdictThresholds thresholds;
    std::vector<std::string> notes;
};

/// t ↦ sup_x ∫ (∫_0^t s^{-a/2} p_s(x, y) ds) μ(dy), judged by the decay
/// thresholds of classify.
inline GuneysuReport guneysu_diagnostic(const HeatKernelModel& model, const MeasureModel& mu,
                                        double a, const std::vector<double>& t_grid,
                                        const ProbeSet& probes, const QuadratureConfig& q,
                                        const VerdictThresholds& th = {}) {
    require(a >= 0 && a <= 1, "a must lie in [0, 1]");
    q.validate();
    detail::check_grid(t_grid, "t grid");
    GuneysuReport r;
    r.a = a;
    r.thresholds = th;
    r.curve = detail::compute_curve(
        model, mu, 1.0, t_grid, [a](double t) -> Functional { return WeightedWindow{t, a}; }, probes,
        q);
    const std::size_t failed = detail::failures(r.curve);
    if (static_cast<double>(failed) > th.max_failure_fraction * static_cast<double>(r.curve.size())) {
        r.withheld = true;
        r.notes.push_back("verdict withheld: failure fraction above threshold");
        return r;
    }
    auto dv = detail::decay_verdict(r.curve, th, r.notes, "weighted window");
    r.fit = dv.fit;
    r.verdict = dv.decays;
    r.notes.push_back("verdict is a numerical diagnostic over a finite grid, not a proof");
    return r;
}

}  // namespace kkl
