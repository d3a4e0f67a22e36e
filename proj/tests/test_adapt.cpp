#include <gtest/gtest.h>

#include <cstring>
#include <limits>
#include <numbers>
#include <random>

#include "oracles.hpp"

using namespace lbpfc;
constexpr double pi = std::numbers::pi;

namespace {

Mesh<2> graded_mesh() {
    auto m = build_rectangle_mesh(0, 1, 0, 1, 6, 6);
    for (int r = 0; r < 3; ++r) {
        std::vector<Index> near;
        for (Index e = 0; e < m.num_elements(); ++e) {
            const auto c = detail::centroid(m, e);
            if (c[0] + c[1] < 0.6) near.push_back(e);
        }
        m = refine(m, near);
    }
    return m;
}

ModelParams params(Flow flow, double dt, double d0) {
    ModelParams p;
    p.flow = flow;
    p.dt = dt;
    p.d0 = d0;
    return p;
}

}  // namespace

TEST(Recovery, LinearExactIn1D) {
    const auto m = build_interval_mesh(3.0, 17);
    const auto g = recover_gradient(m, interpolate(m, [](const Point<1>& x) { return 2.5 * x[0] - 1.0; }));
    for (const auto& v : g) EXPECT_NEAR(v[0], 2.5, 1e-12);
}

TEST(Recovery, LinearExactIn2DOnUniformAndGradedMeshes) {
    for (const auto& m : {build_rectangle_mesh(0, 1, 0, 1, 8, 8), graded_mesh(),
                          build_polygon_mesh(regular_polygon(7, 2.0), 0.5)}) {
        const auto u = interpolate(m, [](const Point<2>& p) { return 0.7 - 1.3 * p[0] + 2.1 * p[1]; });
        for (const auto& v : recover_gradient(m, u)) {
            EXPECT_NEAR(v[0], -1.3, 1e-12);
            EXPECT_NEAR(v[1], 2.1, 1e-12);
        }
    }
}

TEST(Recovery, ConstantGivesZero) {
    const auto m = graded_mesh();
    for (const auto& v : recover_gradient(m, interpolate(m, [](const Point<2>&) { return 4.0; }))) {
        EXPECT_NEAR(v[0], 0.0, 1e-13);
        EXPECT_NEAR(v[1], 0.0, 1e-13);
    }
}

TEST(Recovery, QuadraticGradientAtInteriorNodes) {
    const auto m = build_interval_mesh(2.0, 20);
    const auto g = recover_gradient(m, interpolate(m, [](const Point<1>& x) { return x[0] * x[0]; }));
    for (Index i = 0; i < m.num_nodes(); ++i) {
        if (m.is_boundary_node(i)) continue;
        EXPECT_NEAR(g[i][0], 2.0 * m.node(i)[0], 1e-12);
    }
}

TEST(Recovery, RejectsForeignField) {
    const auto a = build_interval_mesh(1.0, 4), b = build_interval_mesh(1.0, 4);
    EXPECT_THROW(recover_gradient(b, zero_field(a)), std::invalid_argument);
}

TEST(Indicator, LinearFieldHasZeroRecoveryError) {
    const auto m = graded_mesh();
    const auto u = interpolate(m, [](const Point<2>& p) { return 3.0 * p[0] + p[1]; });
    const auto ind = indicator(m, u, Estimator::RecoveryH1);
    for (double z : ind.values) EXPECT_NEAR(z, 0.0, 1e-12);
}

TEST(Indicator, ConstantFieldHasZeroGradientNorm) {
    const auto m = build_rectangle_mesh(0, 1, 0, 1, 5, 5);
    const auto ind = indicator(m, interpolate(m, [](const Point<2>&) { return -2.0; }), Estimator::GradientNorm);
    for (double z : ind.values) EXPECT_NEAR(z, 0.0, 1e-13);
    EXPECT_NEAR(ind.sigma, 0.0, 1e-13);
}

TEST(Indicator, SingleTriangleGradientNorm) {
    const Mesh<2> m({Point<2>{0, 0}, Point<2>{2, 0}, Point<2>{0, 1}}, {{{0, 1, 2}}});
    const auto u = interpolate(m, [](const Point<2>& p) { return 3.0 * p[0] - 4.0 * p[1]; });
    const auto ind = indicator(m, u, Estimator::GradientNorm);
    ASSERT_EQ(ind.values.size(), 1u);
    EXPECT_NEAR(ind.values[0], 5.0 * std::sqrt(1.0), 1e-13);
}

TEST(Indicator, SigmaIsPopulationStandardDeviation) {
    const auto m = build_polygon_mesh(regular_polygon(6, 2 * pi), 1.0);
    const auto u = interpolate(m, [](const Point<2>& p) { return hexcos(p[0], p[1]); });
    for (Estimator k : {Estimator::GradientNorm, Estimator::RecoveryH1}) {
        const auto ind = indicator(m, u, k);
        double mean = 0.0;
        for (double z : ind.values) mean += z;
        mean /= static_cast<double>(ind.values.size());
        EXPECT_NEAR(ind.mean, mean, 1e-13 * mean);
        EXPECT_NEAR(ind.sigma, oracle::population_sigma(ind.values), 1e-12 * ind.sigma);
    }
}

TEST(Mark, EqualValues) {
    AdaptConfig cfg;
    const auto field = make_indicator_field(std::vector<double>(10, 0.3));
    auto m = mark(field, cfg);
    EXPECT_EQ(m.refine.size(), 10u);
    EXPECT_TRUE(m.coarsen.empty());
    cfg.theta_r = 1.0;
    m = mark(field, cfg);
    EXPECT_TRUE(m.refine.empty());
    EXPECT_TRUE(m.coarsen.empty());
}

TEST(Mark, TwoValues) {
    AdaptConfig cfg;
    const auto m = mark(make_indicator_field({0.0, 10.0}), cfg);
    EXPECT_EQ(m.refine, std::vector<Index>{1});
    EXPECT_EQ(m.coarsen, std::vector<Index>{0});
}

TEST(Mark, RandomFieldsGiveDisjointSetsAndSeparatedIndicators) {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AdaptConfig cfg;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + rng() % 200);
        for (auto& x : v) x = std::pow(u(rng), 3.0);
        const auto ind = make_indicator_field(v);
        const auto m = mark(ind, cfg);
        std::vector<int> seen(v.size(), 0);
        for (Index e : m.refine) ++seen[e];
        for (Index e : m.coarsen) ++seen[e];
        for (int c : seen) ASSERT_LE(c, 1);
        for (std::size_t e = 0; e < v.size(); ++e) {
            const bool r = std::count(m.refine.begin(), m.refine.end(), static_cast<Index>(e)) > 0;
            const bool c = std::count(m.coarsen.begin(), m.coarsen.end(), static_cast<Index>(e)) > 0;
            ASSERT_EQ(r, v[e] > cfg.theta_r * ind.mean);
            ASSERT_EQ(c, v[e] < cfg.theta_c * ind.mean);
        }
        if (!m.refine.empty() && !m.coarsen.empty()) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (Index e : m.refine) lo = std::min(lo, v[e]);
            for (Index e : m.coarsen) hi = std::max(hi, v[e]);
            ASSERT_GE(lo, hi);
        }
    }
}

TEST(Mark, RejectsEmptyField) {
    EXPECT_THROW(make_indicator_field({}), std::invalid_argument);
}

TEST(Transfer, SameMeshIsIdentity) {
    const auto m = graded_mesh();
    const auto u = interpolate(m, [](const Point<2>& p) { return std::sin(5 * p[0]) * p[1]; });
    const auto v = transfer_field(m, m, u);
    ASSERT_EQ(v.size(), u.size());
    EXPECT_EQ(std::memcmp(v.coeffs.data(), u.coeffs.data(), sizeof(double) * u.size()), 0);
}

TEST(Transfer, RefinementPreservesPiecewiseLinearFunction) {
    const auto m = build_polygon_mesh(regular_polygon(6, 2.0), 0.7);
    const auto u = interpolate(m, [](const Point<2>& p) { return std::cos(p[0]) + p[1] * p[1]; });
    std::vector<Index> some;
    for (Index e = 0; e < m.num_elements(); e += 3) some.push_back(e);
    const auto fine = refine(refine(m, some), std::vector<Index>{0, 1, 2});
    const auto v = transfer_field(m, fine, u);
    const PointLocator<2> loc(m);
    for (Index i = 0; i < fine.num_nodes(); ++i) EXPECT_NEAR(v[i], loc.evaluate(u.coeffs, fine.node(i)), 1e-13);
    const Vector ones_c = Vector::Ones(m.num_nodes()), ones_f = Vector::Ones(fine.num_nodes());
    const double before = ones_c.dot(assemble_mass(m).apply(u.coeffs));
    const double after = ones_f.dot(assemble_mass(fine).apply(v.coeffs));
    EXPECT_NEAR(after, before, 1e-12 * std::abs(before));
}

TEST(Transfer, CoarseningKeepsSurvivingValues) {
    const auto fine = refine(build_rectangle_mesh(0, 1, 0, 1, 3, 3), all_elements(build_rectangle_mesh(0, 1, 0, 1, 3, 3)));
    const auto u = interpolate(fine, [](const Point<2>& p) { return std::exp(p[0] - p[1]); });
    const auto coarse = coarsen(fine, all_elements(fine));
    ASSERT_LT(coarse.num_nodes(), fine.num_nodes());
    const auto v = transfer_field(fine, coarse, u);
    for (Index i = 0; i < coarse.num_nodes(); ++i) {
        EXPECT_EQ(v[i], u[fine.node_of_point(coarse.point_id(i))]);
    }
}

TEST(Transfer, UnrelatedMeshesRejected) {
    const auto a = build_rectangle_mesh(0, 1, 0, 1, 2, 2), b = build_rectangle_mesh(0, 2, 0, 1, 3, 2);
    EXPECT_THROW(transfer_field(a, refine(b, std::vector<Index>{0}), zero_field(a)), std::logic_error);
}

TEST(Transfer, StateKeepsScalarAndRecomputesSplitting) {
    const auto m = build_rectangle_mesh(0, 2 * pi, 0, 2 * pi, 6, 6);
    const SavSystem<2> sys(m, params(Flow::CahnHilliard, 0.01, 500.0));
    auto st = init_state(sys, [](const Point<2>& p) { return std::cos(p[0]) + 0.3 * std::sin(p[1]); });
    st = sys.step(st);
    const SavSystem<2> fine(refine(m, std::vector<Index>{0, 5, 9}), sys.params());
    const auto moved = transfer(st, m, fine);
    EXPECT_EQ(moved.s, st.s);
    EXPECT_EQ(moved.step_index, st.step_index);
    EXPECT_EQ(moved.time, st.time);
    ASSERT_TRUE(moved.varphi.has_value());
    const Vector r = fine.mass().apply(moved.psi.coeffs) -
                     (fine.mass().apply(moved.phi.coeffs) - fine.stiffness().apply(moved.phi.coeffs));
    EXPECT_LE(r.norm(), 1e-10 * std::max(1.0, moved.phi.coeffs.norm()));
}

TEST(AdaptRun, HugeEnergyToleranceTakesNoSteps) {
    AdaptConfig cfg;
    cfg.epsilon_e = 1e300;
    const auto r = adapt_run(build_rectangle_mesh(0, pi, 0, pi, 4, 4), [](const Point<2>& p) { return std::cos(p[0]); },
                             params(Flow::AllenCahn, 0.01, 500.0), cfg);
    EXPECT_EQ(r.final_state.step_index, 0);
    EXPECT_EQ(r.trace.size(), 1u);
    EXPECT_TRUE(r.events.empty());
    EXPECT_TRUE(r.converged);
}

TEST(AdaptRun, InfiniteSpreadThresholdMatchesFixedMeshRun) {
    const auto mesh = build_rectangle_mesh(0, pi, 0, pi, 8, 8);
    const auto u0 = [](const Point<2>& p) { return std::cos(p[0]); };
    const auto p = params(Flow::AllenCahn, 0.01, 500.0);
    AdaptConfig cfg;
    cfg.epsilon_e = 1e-6;
    cfg.epsilon_sigma = std::numeric_limits<double>::infinity();
    const auto a = adapt_run(mesh, u0, p, cfg);
    const SavSystem<2> sys(mesh, p);
    const auto f = run(sys, init_state(sys, u0), Schedule{std::nullopt, 1e-6});
    EXPECT_TRUE(a.events.empty());
    ASSERT_EQ(a.trace.size(), f.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        ASSERT_EQ(a.trace[i].modified_energy, f.trace[i].modified_energy);
        ASSERT_EQ(a.trace[i].s, f.trace[i].s);
    }
    const auto& x = a.final_state.phi.coeffs;
    const auto& y = f.final_state.phi.coeffs;
    ASSERT_EQ(x.size(), y.size());
    EXPECT_EQ(std::memcmp(x.data(), y.data(), sizeof(double) * x.size()), 0);
}

TEST(AdaptRun, EveryIntermediateMeshIsConforming) {
    AdaptConfig cfg;
    cfg.epsilon_e = 1e-6;
    cfg.max_steps = 60;
    long checked = 0;
    MeshTag last = 0;
    const auto r = adapt_run(
        build_rectangle_mesh(0, pi, 0, pi, 8, 8),
        [](const Point<2>& p) { return std::cos(p[0]) + 0.5 * std::cos(2 * p[1]); }, params(Flow::AllenCahn, 0.01, 500.0),
        cfg, {}, [&](const Mesh<2>& m, const SavState& st, const EnergyReport&) {
            EXPECT_EQ(st.phi.mesh_tag, m.tag());
            if (m.tag() == last) return;
            last = m.tag();
            const auto rep = m.check_conformity();
            EXPECT_TRUE(rep.ok) << rep.message;
            EXPECT_NEAR(m.total_measure(), pi * pi, 1e-12 * pi * pi);
            ++checked;
        });
    EXPECT_GE(checked, 2);
    EXPECT_FALSE(r.events.empty());
    for (const auto& ev : r.events) EXPECT_GT(ev.sigma, cfg.epsilon_sigma);
}

TEST(AdaptConfig, Validation) {
    AdaptConfig c;
    EXPECT_NO_THROW(c.validate());
    c.theta_c = c.theta_r;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.theta_r = 1.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.epsilon_e = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.epsilon_sigma = -1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
