#pragma once

/**
 * @file measures.hpp
 * @brief Radon measures on R^d and integration of kernel powers against them.
 *
 * Most integrals in this library have the form ∫ h(|y - x|) μ(dy) where h is
 * singular at 0 with a known exponent. integrate_radial() reduces such
 * integrals to one-dimensional radial quadrature centred at x, splitting at
 * ρ = 1, and reports +inf when the singularity is not integrable against the
 * local dimension of μ at x.
 */

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "kkl/errors.hpp"
#include "kkl/kernels.hpp"
#include "kkl/quadrature.hpp"

namespace kkl {

struct LebesgueRd {
    int d = 1;
};

/// Density |y|^{-beta} on the ball of the given radius around the origin.
struct RadialPowerLaw {
    double beta = 0.0;
    double radius = 1.0;
    int d = 1;
};

struct Atom {
    Point x;
    double weight;
};
struct Atomic {
    std::vector<Atom> atoms;
};

/// Regular lattice of cells over the box [lower, upper].
struct Lattice {
    Point lower;
    Point upper;
    std::vector<int> shape;

    int dimension() const { return static_cast<int>(shape.size()); }
    std::size_t cell_count() const {
        std::size_t n = 1;
        for (int s : shape) n *= static_cast<std::size_t>(s);
        return n;
    }
    double spacing(int k) const {
        const auto ku = static_cast<std::size_t>(k);
        return (upper[ku] - lower[ku]) / shape[ku];
    }
    /// Centre of the cell with row-major index i (last axis fastest).
    Point center(std::size_t i) const {
        Point c(shape.size());
        for (int k = dimension() - 1; k >= 0; --k) {
            const auto ku = static_cast<std::size_t>(k);
            const auto n = static_cast<std::size_t>(shape[ku]);
            c[ku] = lower[ku] + (static_cast<double>(i % n) + 0.5) * spacing(k);
            i /= n;
        }
        return c;
    }
    /// Index of the cell containing x, if any.
    std::optional<std::size_t> locate(const Point& x) const {
        std::size_t idx = 0;
        for (int k = 0; k < dimension(); ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const double f = (x[ku] - lower[ku]) / spacing(k);
            if (f < 0.0 || f >= shape[ku]) return std::nullopt;
            idx = idx * static_cast<std::size_t>(shape[ku]) + static_cast<std::size_t>(f);
        }
        return idx;
    }
};

struct GridDensity {
    Lattice grid;
    std::vector<double> values;
    double cell_volume = 0.0;
};

/// Reference measure of an abstract space with volume growth c r^{d_f}:
/// radially c r^{d_f - 1} dr on distances in (0, 1].
struct VolumeGrowth {
    double d_f = 1.0;
    double c = 1.0;
};

class MeasureModel {
public:
    using Kind = std::variant<LebesgueRd, RadialPowerLaw, Atomic, GridDensity, VolumeGrowth>;

    MeasureModel(Kind kind) : kind_(std::move(kind)) { validate(); }

    static MeasureModel lebesgue(int d) { return {LebesgueRd{d}}; }
    static MeasureModel power_law(double beta, double radius, int d) {
        return {RadialPowerLaw{beta, radius, d}};
    }
    static MeasureModel atomic(std::vector<Atom> atoms) { return {Atomic{std::move(atoms)}}; }
    static MeasureModel grid(Lattice lattice, std::vector<double> values) {
        double vol = 1.0;
        for (int k = 0; k < lattice.dimension(); ++k) vol *= lattice.spacing(k);
        return {GridDensity{std::move(lattice), std::move(values), vol}};
    }
    static MeasureModel volume_growth(double d_f, double c) { return {VolumeGrowth{d_f, c}}; }

    const Kind& kind() const { return kind_; }

    /// Ambient dimension (d_f for VolumeGrowth).
    double dimension() const {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Atomic>)
                    return k.atoms.empty() ? 0.0 : static_cast<double>(k.atoms.front().x.size());
                else if constexpr (std::is_same_v<K, GridDensity>)
                    return k.grid.dimension();
                else if constexpr (std::is_same_v<K, VolumeGrowth>)
                    return k.d_f;
                else
                    return k.d;
            },
            kind_);
    }

    double total_mass() const {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, LebesgueRd>) {
                    return kInf;
                } else if constexpr (std::is_same_v<K, RadialPowerLaw>) {
                    if (k.beta >= k.d) return kInf;
                    return sphere_area(k.d) * std::pow(k.radius, k.d - k.beta) / (k.d - k.beta);
                } else if constexpr (std::is_same_v<K, Atomic>) {
                    double m = 0.0;
                    for (const auto& a : k.atoms) m += a.weight;
                    return m;
                } else if constexpr (std::is_same_v<K, GridDensity>) {
                    double m = 0.0;
                    for (double v : k.values) m += v;
                    return m * k.cell_volume;
                } else {
                    return k.c / k.d_f;
                }
            },
            kind_);
    }

    /// True when μ(· + h) = μ for all shifts h.
    bool translation_invariant() const { return std::holds_alternative<LebesgueRd>(kind_); }

    /// Points where the measure concentrates or its density blows up.
    std::vector<Point> singular_points() const {
        if (const auto* r = std::get_if<RadialPowerLaw>(&kind_))
            return {Point(static_cast<std::size_t>(r->d), 0.0)};
        if (const auto* a = std::get_if<Atomic>(&kind_)) {
            std::vector<Point> pts;
            for (const auto& atom : a->atoms) pts.push_back(atom.x);
            return pts;
        }
        return {};
    }

    std::string name() const {
        std::ostringstream os;
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, LebesgueRd>)
                    os << "LebesgueRd(d=" << k.d << ")";
                else if constexpr (std::is_same_v<K, RadialPowerLaw>)
                    os << "RadialPowerLaw(beta=" << k.beta << ", radius=" << k.radius
                       << ", d=" << k.d << ")";
                else if constexpr (std::is_same_v<K, Atomic>)
                    os << "Atomic(" << k.atoms.size() << " atoms)";
                else if constexpr (std::is_same_v<K, GridDensity>)
                    os << "GridDensity(" << k.values.size() << " cells)";
                else
                    os << "VolumeGrowth(d_f=" << k.d_f << ", c=" << k.c << ")";
            },
            kind_);
        return os.str();
    }

    /// |S^{d-1}|, the surface area of the unit sphere in R^d.
    static double sphere_area(double d) {
        return 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
    }

private:
    void validate() const {
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, LebesgueRd>) {
                    require(k.d >= 1, "dimension must be >= 1");
                } else if constexpr (std::is_same_v<K, RadialPowerLaw>) {
                    require(k.d >= 1, "dimension must be >= 1");
                    require(k.beta >= 0, "beta must be >= 0");
                    require(k.radius > 0, "radius must be positive");
                } else if constexpr (std::is_same_v<K, Atomic>) {
                    for (const auto& a : k.atoms) {
                        require(a.weight > 0, "atom weights must be strictly positive");
                        require(a.x.size() == k.atoms.front().x.size(),
                                "atoms must share one dimension");
                    }
                } else if constexpr (std::is_same_v<K, GridDensity>) {
                    const auto& g = k.grid;
                    require(g.dimension() >= 1, "grid needs at least one axis");
                    require(g.lower.size() == g.shape.size() && g.upper.size() == g.shape.size(),
                            "grid box and shape disagree in dimension");
                    for (int i = 0; i < g.dimension(); ++i) {
                        const auto iu = static_cast<std::size_t>(i);
                        require(g.shape[iu] > 0, "grid shape entries must be positive");
                        require(g.upper[iu] > g.lower[iu], "grid box must have positive extent");
                    }
                    require(k.values.size() == g.cell_count(), "grid values do not fill the lattice");
                    for (double v : k.values) require(v >= 0, "grid density values must be >= 0");
                    require(k.cell_volume > 0, "cell volume must be positive");
                } else {
                    require(k.d_f >= 1, "d_f must be >= 1");
                    require(k.c > 0, "volume constant must be positive");
                }
            },
            kind_);
    }

    Kind kind_;
};

/// A function of the distance to a centre, with its behaviour at distance 0.
struct RadialProfile {
    std::function<double(double)> f;
    NearDiagonal near{};
    /// f vanishes beyond this distance.
    double reach = kInf;
};

/// Optional bounding box [lower, upper] of an integrand's support.
struct Box {
    Point lower;
    Point upper;
};

namespace detail {

// Is ∫_{|z|<1} h(|z|) dz finite against a measure of local dimension dim?
inline bool integrable_at_center(const NearDiagonal& near, double dim) {
    return near.power < dim;
}

// ∫_lo^hi h(ρ) ρ^{e} dρ, splitting at ρ = 1.
inline double radial_integral(const RadialProfile& h, double exponent, double lo, double hi,
                              std::vector<double> breaks, const QuadratureConfig& q) {
    hi = std::min(hi, h.reach);
    if (hi <= lo) return 0.0;
    auto g = [&](double rho) {
        if (rho <= 0.0) return 0.0;
        const double v = h.f(rho);
        return v == 0.0 ? 0.0 : v * std::pow(rho, exponent);
    };
    breaks.push_back(1.0);
    if (std::isinf(hi)) {
        double total = 0.0;
        const double mid = std::max(lo, 1.0);
        if (mid > lo) total += integrate_breaks(g, lo, mid, breaks, q).value;
        return total + integrate_upper(g, mid, q).value;
    }
    return integrate_breaks(g, lo, hi, breaks, q).value;
}

// ∫_{S^{d-1}} g(|c + ρω|) dω for g(s) = s^{-β} 1{s < R}, with |c| = r0 > 0.
inline double shell_average(int d, double beta, double radius, double r0, double rho,
                            const QuadratureConfig& q) {
    const double lo = std::fabs(rho - r0);
    const double hi = std::min(rho + r0, radius);
    if (hi <= lo) return 0.0;
    if (d == 3) {
        // s = |c + ρω| turns the polar integral into 2π/(r0 ρ) ∫ g(s) s ds.
        const double integral = beta == 2.0
                                    ? std::log(hi / lo)
                                    : (std::pow(hi, 2.0 - beta) - std::pow(lo, 2.0 - beta)) /
                                          (2.0 - beta);
        return 2.0 * std::numbers::pi / (r0 * rho) * integral;
    }
    auto g = [&](double theta) {
        const double s2 = r0 * r0 + rho * rho + 2.0 * r0 * rho * std::cos(theta);
        const double s = std::sqrt(std::max(s2, 0.0));
        if (s >= radius || s == 0.0) return 0.0;
        return std::pow(s, -beta) * std::pow(std::sin(theta), d - 2);
    };
    std::vector<double> breaks;
    const double c = (radius * radius - r0 * r0 - rho * rho) / (2.0 * r0 * rho);
    if (c > -1.0 && c < 1.0) breaks.push_back(std::acos(c));
    return MeasureModel::sphere_area(d - 1) * integrate_breaks(g, 0.0, std::numbers::pi, breaks, q).value;
}

inline double norm(const Point& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline void check_center(const MeasureModel& mu, const Point& c) {
    if (std::holds_alternative<VolumeGrowth>(mu.kind())) return;
    if (const auto* a = std::get_if<Atomic>(&mu.kind()); a && a->atoms.empty()) return;
    require(static_cast<double>(c.size()) == mu.dimension(),
            "point dimension does not match the measure");
}

}  // namespace detail

/// ∫ h(|y - center|) μ(dy). For VolumeGrowth the centre is irrelevant.
inline double integrate_radial(const MeasureModel& mu, const Point& center, const RadialProfile& h,
                               const QuadratureConfig& q) {
    detail::check_center(mu, center);
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, LebesgueRd>) {
                if (!detail::integrable_at_center(h.near, k.d)) return kInf;
                return MeasureModel::sphere_area(k.d) *
                       detail::radial_integral(h, k.d - 1.0, 0.0, kInf, {}, q);
            } else if constexpr (std::is_same_v<K, RadialPowerLaw>) {
                const double r0 = detail::norm(center);
                if (r0 == 0.0) {
                    if (!detail::integrable_at_center(h.near, k.d - k.beta)) return kInf;
                    return MeasureModel::sphere_area(k.d) *
                           detail::radial_integral(h, k.d - 1.0 - k.beta, 0.0, k.radius, {}, q);
                }
                if (!detail::integrable_at_center(h.near, k.d)) return kInf;
                if (k.d == 1) {
                    const double c = center[0];
                    auto g = [&](double y) {
                        const double rho = std::fabs(y - c);
                        if (y == 0.0 || rho == 0.0 || rho >= h.reach) return 0.0;
                        return h.f(rho) * std::pow(std::fabs(y), -k.beta);
                    };
                    return integrate_breaks(g, -k.radius, k.radius, {0.0, c, c - 1.0, c + 1.0}, q)
                        .value;
                }
                const auto qi = q.inner();
                RadialProfile weighted{
                    [&](double rho) {
                        const double v = h.f(rho);
                        if (v == 0.0) return 0.0;
                        return v * detail::shell_average(k.d, k.beta, k.radius, r0, rho, qi);
                    },
                    h.near, h.reach};
                return detail::radial_integral(weighted, k.d - 1.0, 0.0, k.radius + r0,
                                               {r0, std::fabs(k.radius - r0)}, q);
            } else if constexpr (std::is_same_v<K, Atomic>) {
                double sum = 0.0;
                for (const auto& a : k.atoms) {
                    const double rho = detail::distance(a.x, center);
                    if (rho >= h.reach) continue;
                    if (rho == 0.0 && !h.near.bounded()) return kInf;
                    sum += a.weight * h.f(rho);
                }
                return sum;
            } else if constexpr (std::is_same_v<K, GridDensity>) {
                const auto home = k.grid.locate(center);
                double sum = 0.0;
                for (std::size_t i = 0; i < k.values.size(); ++i) {
                    if (k.values[i] == 0.0) continue;
                    if (home && *home == i) {
                        // The cell holding the centre is replaced by the ball
                        // of equal volume around it.
                        const int d = k.grid.dimension();
                        if (!detail::integrable_at_center(h.near, d)) return kInf;
                        const double r = std::pow(k.cell_volume / (MeasureModel::sphere_area(d) / d),
                                                  1.0 / d);
                        sum += k.values[i] * MeasureModel::sphere_area(d) *
                               detail::radial_integral(h, d - 1.0, 0.0, r, {}, q);
                        continue;
                    }
                    const double rho = detail::distance(k.grid.center(i), center);
                    if (rho < h.reach) sum += k.values[i] * k.cell_volume * h.f(rho);
                }
                return sum;
            } else {
                if (!detail::integrable_at_center(h.near, k.d_f)) return kInf;
                return k.c * detail::radial_integral(h, k.d_f - 1.0, 0.0, 1.0, {}, q);
            }
        },
        mu.kind());
}

/// ∫ g dμ for a general nonnegative g. Lebesgue and power-law measures use
/// nested quadrature (over `support` when given); VolumeGrowth needs a radial
/// integrand and is rejected here.
inline double integrate(const MeasureModel& mu, const std::function<double(const Point&)>& g,
                        const QuadratureConfig& q, const std::optional<Box>& support = {}) {
    q.validate();
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Atomic>) {
                double sum = 0.0;
                for (const auto& a : k.atoms) sum += a.weight * g(a.x);
                return sum;
            } else if constexpr (std::is_same_v<K, GridDensity>) {
                double sum = 0.0;
                for (std::size_t i = 0; i < k.values.size(); ++i)
                    if (k.values[i] != 0.0) sum += k.values[i] * g(k.grid.center(i));
                return sum * k.cell_volume;
            } else if constexpr (std::is_same_v<K, VolumeGrowth>) {
                throw InputError("VolumeGrowth measures integrate radial profiles only");
            } else {
                const int d = k.d;
                double weight_beta = 0.0, ball = kInf;
                if constexpr (std::is_same_v<K, RadialPowerLaw>) {
                    weight_beta = k.beta;
                    ball = k.radius;
                }
                if (support) {
                    require(support->lower.size() == static_cast<std::size_t>(d) &&
                                support->upper.size() == static_cast<std::size_t>(d),
                            "support box dimension does not match the measure");
                }
                Point y(static_cast<std::size_t>(d));
                std::function<double(int, const QuadratureConfig&)> nest =
                    [&](int axis, const QuadratureConfig& qa) -> double {
                    const auto au = static_cast<std::size_t>(axis);
                    auto f = [&](double v) {
                        y[au] = v;
                        if (axis + 1 < d) return nest(axis + 1, qa.inner());
                        const double r = detail::norm(y);
                        if (r >= ball) return 0.0;
                        if (weight_beta != 0.0) {
                            if (r == 0.0) return 0.0;
                            return g(y) * std::pow(r, -weight_beta);
                        }
                        return g(y);
                    };
                    // Chord of the ball at the coordinates already fixed, so the
                    // inner integrands stay continuous at its edge.
                    double used = 0.0;
                    for (int k2 = 0; k2 < axis; ++k2)
                        used += y[static_cast<std::size_t>(k2)] * y[static_cast<std::size_t>(k2)];
                    const double chord =
                        std::isinf(ball) ? kInf : std::sqrt(std::max(ball * ball - used, 0.0));
                    double lo = -chord, hi = chord;
                    if (support) {
                        lo = std::max(lo, support->lower[au]);
                        hi = std::min(hi, support->upper[au]);
                    }
                    if (hi <= lo) return 0.0;
                    if (std::isinf(lo) && std::isinf(hi)) return integrate_line(f, qa).value;
                    if (std::isinf(hi)) return integrate_upper(f, lo, qa).value;
                    if (std::isinf(lo)) return integrate_lower(f, hi, qa).value;
                    return integrate_breaks(f, lo, hi, {0.0}, qa).value;
                };
                return nest(0, q);
            }
        },
        mu.kind());
}

namespace detail {

// Killed Brownian motion lives on (0, ∞); integrate y -> F(x, y)^p there.
inline double half_line_power_integral(const MeasureModel& mu, const HeatKernelModel& model,
                                       const Functional& functional, double p, double x,
                                       const QuadratureConfig& q) {
    require(mu.dimension() == 1.0 || std::holds_alternative<Atomic>(mu.kind()),
            "KilledHalfLine pairs with one-dimensional measures");
    const auto qi = q.inner();
    auto power = [&](double y) {
        if (y <= 0.0) return 0.0;
        const double v = functional_eval(model, functional, Point{x}, Point{y}, qi);
        return std::pow(v, p);
    };
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, LebesgueRd>) {
                return integrate_breaks(power, 0.0, x + 1.0, {x}, q).value +
                       integrate_upper(power, x + 1.0, q).value;
            } else if constexpr (std::is_same_v<K, RadialPowerLaw>) {
                auto g = [&](double y) { return power(y) * std::pow(y, -k.beta); };
                return integrate_breaks(g, 0.0, k.radius, {x}, q).value;
            } else if constexpr (std::is_same_v<K, Atomic>) {
                double sum = 0.0;
                for (const auto& a : k.atoms) {
                    if (a.x[0] == x && std::isinf(power(x))) return kInf;
                    sum += a.weight * power(a.x[0]);
                }
                return sum;
            } else if constexpr (std::is_same_v<K, GridDensity>) {
                const auto home = k.grid.locate(Point{x});
                const double h = k.grid.spacing(0);
                double sum = 0.0;
                for (std::size_t i = 0; i < k.values.size(); ++i) {
                    if (k.values[i] == 0.0) continue;
                    const double c = k.grid.center(i)[0];
                    if (home && *home == i) {
                        const double lo = std::max(c - h / 2, 0.0);
                        sum += k.values[i] * integrate_breaks(power, lo, c + h / 2, {x}, q).value;
                    } else {
                        sum += k.values[i] * k.cell_volume * power(c);
                    }
                }
                return sum;
            } else {
                throw InputError("VolumeGrowth pairs with envelope kernels only");
            }
        },
        mu.kind());
}

}  // namespace detail

/// ∫ F(x, y)^p μ(dy) for F one of the kernel's time functionals.
/// Envelope kernels pair with VolumeGrowth measures, where x is immaterial.
inline double kernel_power_integral(const MeasureModel& mu, const HeatKernelModel& model,
                                    const Functional& functional, double p, const Point& x,
                                    const QuadratureConfig& q) {
    require(p >= 1.0, "p must be >= 1");
    q.validate();
    detail::check_functional(model, functional);
    const bool reference = std::holds_alternative<VolumeGrowth>(mu.kind());
    require(model.is_envelope() == reference,
            "envelope kernels pair with VolumeGrowth measures and exact kernels with measures on "
            "R^d");
    if (std::holds_alternative<KilledHalfLine>(model.kind())) {
        require(x.size() == 1 && x[0] > 0.0, "KilledHalfLine evaluation point must be positive");
        return detail::half_line_power_integral(mu, model, functional, p, x[0], q);
    }
    if (!reference) {
        require(static_cast<double>(x.size()) == model.dimension(),
                "point dimension does not match the model");
    }
    const auto qi = q.inner();
    const NearDiagonal single = near_diagonal(model, functional);
    RadialProfile h{[&](double rho) { return std::pow(functional_eval(model, functional, rho, qi), p); },
                    {single.power * p, single.log}};
    return integrate_radial(mu, x, h, q);
}

// -- CSV ---------------------------------------------------------------------

/**
 * Reads a GridDensity from CSV. Layout:
 *
 *     # lattice d=2 lower=-1,-1 upper=1,1 shape=20,20
 *     x0,x1,value
 *     -0.95,-0.95,0.25
 *     ...
 *
 * One row per cell, coordinates at the cell centre, rows in any order.
 */
inline MeasureModel load_grid_density_csv(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open grid density file: " + path);
    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, sep)) out.push_back(item);
        return out;
    };
    auto numbers = [&](const std::string& s) {
        std::vector<double> out;
        for (const auto& item : split(s, ',')) out.push_back(std::stod(item));
        return out;
    };
    std::string line;
    std::getline(in, line);
    require(line.rfind("# lattice", 0) == 0, path + ": first line must declare '# lattice ...'");
    Lattice lattice;
    int d = 0;
    for (const auto& token : split(line.substr(9), ' ')) {
        if (token.empty()) continue;
        const auto eq = token.find('=');
        require(eq != std::string::npos, path + ": malformed lattice token '" + token + "'");
        const std::string key = token.substr(0, eq), val = token.substr(eq + 1);
        if (key == "d") {
            d = std::stoi(val);
        } else if (key == "lower") {
            lattice.lower = numbers(val);
        } else if (key == "upper") {
            lattice.upper = numbers(val);
        } else if (key == "shape") {
            for (double v : numbers(val)) lattice.shape.push_back(static_cast<int>(v));
        } else {
            throw InputError(path + ": unknown lattice key '" + key + "'");
        }
    }
    require(d >= 1 && lattice.dimension() == d, path + ": lattice shape does not match d");
    std::getline(in, line);  // column names
    std::vector<double> values(lattice.cell_count(), 0.0);
    std::vector<bool> seen(values.size(), false);
    int row = 2;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = numbers(line);
        require(fields.size() == static_cast<std::size_t>(d) + 1,
                path + ":" + std::to_string(row) + ": expected " + std::to_string(d + 1) +
                    " columns");
        const Point x(fields.begin(), fields.end() - 1);
        const auto idx = lattice.locate(x);
        require(idx.has_value(), path + ":" + std::to_string(row) + ": point outside the lattice");
        require(!seen[*idx], path + ":" + std::to_string(row) + ": duplicate cell");
        seen[*idx] = true;
        values[*idx] = fields.back();
    }
    require(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }),
            path + ": some lattice cells have no row");
    return MeasureModel::grid(std::move(lattice), std::move(values));
}

}  // namespace kkl
