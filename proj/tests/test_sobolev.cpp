#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kkl/sobolev.hpp"
#include "oracles.hpp"

using namespace kkl;
using kkl::testing::rel_close;
using kkl::testing::simpson_sum;

namespace {

const QuadratureConfig q{};
constexpr double pi = std::numbers::pi;
const ProbeSet at_origin{{{0.0}}, false, true};

// Samples u on n cells over [-L, L].
TestFunction sample_line(const std::function<double(double)>& u, double L, int n) {
    const Lattice grid{{-L}, {L}, {n}};
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = u(grid.center(static_cast<std::size_t>(i))[0]);
    return TestFunction::sampled(grid, v);
}

}  // namespace

TEST(Energy, GaussianBumpClosedForm) {
    const auto u = TestFunction::gaussian(1.0, {0.0});
    EXPECT_NEAR(energy(u, 0.0, q), std::sqrt(pi) / 4.0, 1e-12);
    EXPECT_NEAR(energy(u, 0.0, q), 0.443113, 1e-6);
    // Oracle: Simpson of ½ u'(x)² with u' = -x e^{-x²/2}.
    const double oracle =
        0.5 * simpson_sum([](double x) { return x * x * std::exp(-x * x); }, -12.0, 12.0, 20000);
    EXPECT_NEAR(energy(u, 0.0, q, Evaluation::numeric), oracle, 1e-10);
}

TEST(Energy, AlphaAddsMass) {
    for (const auto& u : {TestFunction::gaussian(0.4, {1.0}), TestFunction::cosine(2.0, {-1.0}),
                          TestFunction::gaussian(1.5, {0.0, 0.0, 1.0})}) {
        EXPECT_NEAR(energy(u, 1.0, q) - energy(u, 0.0, q), l2_squared(u, q), 1e-12) << u.name();
    }
}

TEST(Energy, CosineBumpAgainstRefinedGrid) {
    const double R = 1.3;
    const auto u = TestFunction::cosine(R, {0.2});
    auto grid_energy = [&](long n) {
        const double k = pi / R;
        return 0.5 * simpson_sum([&](double r) { return std::pow(0.5 * k * std::sin(k * r), 2); }, -R, R, n) +
               simpson_sum([&](double r) { return std::pow(0.5 * (1 + std::cos(k * r)), 2); }, -R, R, n);
    };
    const double refined = grid_energy(4000);
    EXPECT_NEAR(std::fabs(grid_energy(2000) - refined) / refined, 0.0, 1e-8);
    EXPECT_TRUE(rel_close(energy(u, 1.0, q, Evaluation::numeric), refined, 1e-4));
    // Closed forms 3R/4 and π²/(4R).
    EXPECT_TRUE(rel_close(energy(u, 1.0, q), 0.5 * pi * pi / (4 * R) + 3 * R / 4, 1e-12));
    EXPECT_TRUE(rel_close(energy(u, 1.0, q, Evaluation::numeric), energy(u, 1.0, q), 1e-8));
}

TEST(Energy, RadialQuadratureMatchesClosedFormsInHigherDimensions) {
    for (const Point& c : {Point{0.3, -0.2}, Point{0.0, 1.0, 2.0}}) {
        const auto u = TestFunction::gaussian(0.7, c);
        EXPECT_TRUE(rel_close(l2_squared(u, q, Evaluation::numeric), l2_squared(u, q), 1e-8));
        EXPECT_TRUE(rel_close(gradient_squared(u, q, Evaluation::numeric), gradient_squared(u, q), 1e-8));
        EXPECT_TRUE(rel_close(lp_norm(u, MeasureModel::lebesgue(static_cast<int>(c.size())), 2.0, q,
                                      Evaluation::numeric),
                              lp_norm(u, MeasureModel::lebesgue(static_cast<int>(c.size())), 2.0, q),
                              1e-8));
    }
}

TEST(LpNorm, GaussianOnTheLine) {
    const auto u = TestFunction::gaussian(1.0, {0.0});
    const auto leb = MeasureModel::lebesgue(1);
    EXPECT_NEAR(lp_norm(u, leb, 1.0, q), std::pow(pi, 0.25), 1e-12);
    EXPECT_NEAR(lp_norm(u, leb, 1.0, q), 1.331336, 1e-6);
    EXPECT_NEAR(lp_norm(u.scaled(-3.0), leb, 2.0, q), 3.0 * lp_norm(u, leb, 2.0, q), 1e-12);
    EXPECT_THROW(lp_norm(u, leb, 0.5, q), InputError);
}

TEST(LpNorm, CosineOracleMatchesQuadrature) {
    const auto u = TestFunction::cosine(0.8, {0.5});
    const auto leb = MeasureModel::lebesgue(1);
    for (double p : {1.0, 1.5, 2.0, 3.0})
        EXPECT_TRUE(rel_close(lp_norm(u, leb, p, q), lp_norm(u, leb, p, q, Evaluation::numeric), 1e-9)) << p;
}

TEST(LpNorm, AtomicAndPowerLawMeasures) {
    const auto u = TestFunction::gaussian(0.5, {0.2});
    const auto atoms = MeasureModel::atomic({{{0.0}, 2.0}, {{1.0}, 0.5}});
    const double expected =
        std::pow(2.0 * std::pow(u.value({0.0}), 4) + 0.5 * std::pow(u.value({1.0}), 4), 0.25);
    EXPECT_NEAR(lp_norm(u, atoms, 2.0, q), expected, 1e-14);
    // Oracle: Simpson of u^{2p} |y|^{-β} on (-R, R); y = ±v^k with
    // k = 1/(1 - β) turns |y|^{-β} dy into k dv.
    const double beta = 0.4, R = 1.5;
    const double k = 1.0 / (1.0 - beta);
    auto half = [&](double sgn) {
        return simpson_sum([&](double v) { return k * std::pow(u.value({sgn * std::pow(v, k)}), 4); },
                           0.0, std::pow(R, 1.0 / k), 20000);
    };
    const double oracle = std::pow(half(1.0) + half(-1.0), 0.25);
    EXPECT_TRUE(rel_close(lp_norm(u, MeasureModel::power_law(beta, R, 1), 2.0, q), oracle, 1e-7));
}

TEST(Embedding, GaussianBumpHolds) {
    const auto r = verify_embedding(TestFunction::gaussian(1.0, {0.0}), MeasureModel::lebesgue(1), 2.0,
                                    1.0, HeatKernelModel::gaussian(1), at_origin, q);
    EXPECT_TRUE(r.holds);
    EXPECT_LT(r.ratio, 1.0);
    EXPECT_NEAR(r.lhs, std::sqrt(std::sqrt(pi / 2.0)), 1e-12);
}

TEST(Embedding, ZeroFunction) {
    const auto zero = TestFunction::sampled(Lattice{{-1.0}, {1.0}, {10}}, std::vector<double>(10, 0.0));
    const auto r = verify_embedding(zero, MeasureModel::lebesgue(1), 1.0, 1.0,
                                    HeatKernelModel::gaussian(1), at_origin, q);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_EQ(r.rhs, 0.0);
    EXPECT_TRUE(r.holds);
}

TEST(Embedding, StandardBatteryHolds) {
    const auto battery = standard_battery();
    ASSERT_EQ(battery.size(), 20u);
    for (const auto& u : battery) {
        for (double p : {1.0, 2.0}) {
            for (double alpha : {0.5, 1.0, 2.0, 4.0}) {
                const auto r = verify_embedding(u, MeasureModel::lebesgue(1), p, alpha,
                                                HeatKernelModel::gaussian(1), at_origin, q);
                EXPECT_TRUE(r.holds) << u.name() << " p=" << p << " alpha=" << alpha << " ratio=" << r.ratio;
            }
        }
    }
}

TEST(Embedding, InfiniteGammaIsRejected) {
    EXPECT_THROW(verify_embedding(TestFunction::gaussian(1.0, {0.0, 0.0, 0.0}), MeasureModel::lebesgue(3),
                                  3.0, 1.0, HeatKernelModel::gaussian(3),
                                  ProbeSet{{{0.0, 0.0, 0.0}}, false, true}, q),
                 InputError);
}

TEST(Embedding, ScaleCovariance) {
    // u_σ(x) = u(x/σ): ‖u_σ‖²_{2p} ∝ σ^{1/p}, ∫|∇u_σ|² ∝ σ^{-1}, ∫u_σ² ∝ σ.
    const auto leb = MeasureModel::lebesgue(1);
    for (const bool gaussian : {true, false}) {
        auto make = [&](double s) {
            return gaussian ? TestFunction::gaussian(s, {0.0}) : TestFunction::cosine(s, {0.0});
        };
        for (double p : {1.0, 2.0}) {
            const double base = std::pow(lp_norm(make(1.0), leb, p, q, Evaluation::numeric), 2.0);
            for (double s : {0.1, 0.5, 3.0, 10.0}) {
                const auto u = make(s);
                const double lhs = std::pow(lp_norm(u, leb, p, q, Evaluation::numeric), 2.0);
                EXPECT_TRUE(rel_close(lhs / base, std::pow(s, 1.0 / p), 1e-3));
                EXPECT_TRUE(rel_close(gradient_squared(u, q, Evaluation::numeric) /
                                          gradient_squared(make(1.0), q, Evaluation::numeric),
                                      1.0 / s, 1e-3));
                EXPECT_TRUE(rel_close(l2_squared(u, q, Evaluation::numeric) /
                                          l2_squared(make(1.0), q, Evaluation::numeric),
                                      s, 1e-3));
            }
        }
    }
}

TEST(Embedding, FiniteMassDescendsInP) {
    // With μ of finite mass, the embedding at p' = 2 carries down to p = 1.
    const auto mu = MeasureModel::power_law(0.3, 2.0, 1);
    const ProbeSet probes{{{0.5}, {1.0}}};
    const auto model = HeatKernelModel::gaussian(1);
    for (const auto& u : standard_battery()) {
        for (double p : {2.0, 1.5, 1.0}) {
            const auto r = verify_embedding(u, mu, p, 1.0, model, probes, q);
            EXPECT_TRUE(r.holds) << u.name() << " p=" << p << " ratio=" << r.ratio;
        }
    }
}

TEST(Interpolation, DerivedConstantForTheLine) {
    const auto model = HeatKernelModel::gaussian(1);
    const auto leb = MeasureModel::lebesgue(1);
    const auto c = derive_interpolation_constant(model, leb, 2.0, 0.75, at_origin,
                                                 log_grid(1e-2, 1e6, 17), q);
    // γ(β) = 2^{-3/4} β^{-3/4}, so γ(α+1) α^{3/4} increases to 2^{-3/4}.
    EXPECT_NEAR(c.C, std::pow(2.0, -0.75), 1e-5);
    EXPECT_TRUE(c.at_grid_edge);
    EXPECT_NEAR(c.B, 1.0215, 1e-4);
    EXPECT_NEAR(c.A, std::pow(c.C, 1.0 / 0.75), 1e-14);
}

TEST(Interpolation, ScalingSweepDetectsWrongExponent) {
    const auto model = HeatKernelModel::gaussian(1);
    const auto leb = MeasureModel::lebesgue(1);
    const double theta = gagliardo_nirenberg_theta(1.0, 2.0);
    ASSERT_DOUBLE_EQ(theta, 0.75);
    const double B = derive_interpolation_constant(model, leb, 2.0, theta, at_origin,
                                                   log_grid(1e-2, 1e6, 17), q)
                         .B;
    double worst = 0.0, worst_wrong = 0.0;
    for (double s : log_grid(0.1, 10.0, 9)) {
        const auto u = TestFunction::gaussian(s, {0.0});
        const auto good = verify_interpolation(u, leb, 2.0, theta, B, q);
        EXPECT_TRUE(good.holds) << s << " " << good.ratio;
        worst = std::max(worst, good.ratio);
        worst_wrong = std::max(worst_wrong, verify_interpolation(u, leb, 2.0, theta + 0.2, B, q).ratio);
    }
    EXPECT_LT(worst, 1.0);
    EXPECT_GT(worst_wrong, 1.0);
}

TEST(Interpolation, ThetaOneOnBoundedDensity) {
    // μ with density ≤ 2 on [-1, 1]: ∫u² dμ ≤ 2 ∫u², so B = √2 at p = 1.
    const int n = 40;
    std::vector<double> dens(n);
    for (int i = 0; i < n; ++i) dens[static_cast<std::size_t>(i)] = 1.0 + std::sin(0.3 * i) * std::sin(0.3 * i);
    const auto mu = MeasureModel::grid(Lattice{{-1.0}, {1.0}, {n}}, dens);
    for (const auto& u : standard_battery()) {
        const auto r = verify_interpolation(u, mu, 1.0, 1.0, std::sqrt(2.0), q);
        EXPECT_TRUE(r.holds) << u.name() << " " << r.ratio;
    }
    EXPECT_THROW(verify_interpolation(standard_battery()[0], mu, 1.0, 0.0, 1.0, q), InputError);
}

TEST(KEpsilon, SyntheticInverse) {
    const auto curve = k_epsilon_curve([](double a) { return 1.0 / std::sqrt(a); },
                                       {2.0, 0.5, 0.1, 0.05, 1e-4}, 0.5, 1e4);
    ASSERT_EQ(curve.points.size(), 5u);
    EXPECT_FALSE(curve.points[0].reachable);  // ε above γ(α_min)
    EXPECT_FALSE(curve.points[4].reachable);  // ε below γ(α_max)
    for (std::size_t i = 1; i < 4; ++i) {
        const auto& kp = curve.points[i];
        EXPECT_TRUE(kp.reachable);
        EXPECT_TRUE(rel_close(kp.K, 1.0 / kp.epsilon, 1e-8)) << kp.epsilon;
    }
    EXPECT_TRUE(curve.monotone);
}

TEST(KEpsilon, GaussianLineSlope) {
    const auto model = HeatKernelModel::gaussian(1);
    const auto leb = MeasureModel::lebesgue(1);
    const double g1 = gamma(model, leb, 2.0, 1.0, at_origin, q);
    std::vector<double> eps;
    for (double f : log_grid(1e-3, 0.9, 8)) eps.push_back(f * g1);
    const auto curve = k_epsilon_curve(model, leb, 2.0, eps, at_origin, 1.0, 1e8, q);
    std::vector<std::pair<double, double>> pts;
    for (const auto& kp : curve.points) {
        ASSERT_TRUE(kp.reachable) << kp.epsilon;
        pts.emplace_back(kp.epsilon, kp.K);
    }
    EXPECT_TRUE(curve.monotone);
    const auto fit = fit_decay_order(pts, pts.front().first, pts.back().first);
    EXPECT_NEAR(fit.delta, -1.0 / 3.0, 0.05);
}

TEST(Exponents, UltracontractiveOrderMatchesFittedDelta) {
    // p' = 3 in d = 3: the ultracontractive order equals (3 - p)/(2p).
    for (double p : {1.0, 1.5, 2.0, 2.5})
        EXPECT_NEAR(ultracontractive_decay_order(p, 3.0), (3.0 - p) / (2.0 * p), 1e-14);
    const auto r = classify(HeatKernelModel::gaussian(3), MeasureModel::lebesgue(3), 2.0,
                            ProbeSet{{{0.0, 0.0, 0.0}}, false, true}, log_grid(1.0, 100.0, 5),
                            log_grid(1e-4, 1e-1, 6), q);
    ASSERT_TRUE(r.delta_fit.has_value());
    EXPECT_NEAR(r.delta_fit->delta, ultracontractive_decay_order(2.0, 3.0), 0.05);
    EXPECT_DOUBLE_EQ(gagliardo_nirenberg_theta(1.0, 2.0), 0.75);
    EXPECT_DOUBLE_EQ(gagliardo_nirenberg_theta(3.0, 2.0), 0.25);
}

TEST(Sampled, InterpolatesAndApproximatesOracles) {
    auto g = [](double x) { return std::exp(-x * x / 2.0); };
    const auto fine = sample_line(g, 10.0, 4000);
    const auto exact = TestFunction::gaussian(1.0, {0.0});
    EXPECT_TRUE(rel_close(l2_squared(fine, q), l2_squared(exact, q), 1e-6));
    EXPECT_TRUE(rel_close(gradient_squared(fine, q), gradient_squared(exact, q), 1e-4));
    EXPECT_TRUE(rel_close(lp_norm(fine, MeasureModel::lebesgue(1), 2.0, q),
                          lp_norm(exact, MeasureModel::lebesgue(1), 2.0, q), 1e-6));
    EXPECT_FALSE(gradient_stability_warning(fine).has_value());
    // Cell centres are interpolation nodes.
    const auto& f = std::get<SampledFunction>(fine.kind());
    EXPECT_DOUBLE_EQ(fine.value(f.grid.center(1234)), f.values[1234]);
    EXPECT_NEAR(fine.value({0.0}), 1.0, 1e-5);
    EXPECT_EQ(fine.value({11.0}), 0.0);
    // Three cells across the bump cannot resolve its gradient.
    const auto coarse = sample_line(g, 3.0, 5);
    EXPECT_TRUE(gradient_stability_warning(coarse).has_value());
    const auto r = verify_embedding(coarse, MeasureModel::lebesgue(1), 1.0, 1.0,
                                    HeatKernelModel::gaussian(1), at_origin, q);
    EXPECT_FALSE(r.notes.empty());
}
