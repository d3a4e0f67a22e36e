#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"

using namespace lbpfc;
constexpr double pi = std::numbers::pi;

namespace {

ModelParams params(Flow flow, double dt, double d0) {
    ModelParams p;
    p.flow = flow;
    p.dt = dt;
    p.d0 = d0;
    return p;
}

auto exp_initial() {
    return [](const Point<1>& x) { return std::exp(x[0] / (4 * pi)); };
}

auto wave2d() {
    return [](const Point<2>& x) { return 0.3 + std::cos(x[0]) * std::cos(0.5 * x[1]) + 0.2 * std::sin(x[1]); };
}

template <int Dim>
double constraint_residual(const SavSystem<Dim>& sys, const SavState& st) {
    const Vector lhs = sys.mass().apply(st.psi.coeffs);
    const Vector rhs = sys.mass().apply(st.phi.coeffs) - sys.stiffness().apply(st.phi.coeffs);
    return (lhs - rhs).norm() / std::max(1.0, rhs.norm());
}

}  // namespace

TEST(InitState, ZeroInitialCondition) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 64), params(Flow::AllenCahn, 0.1, 16.0));
    const auto st = init_state(sys, [](const Point<1>&) { return 0.0; });
    EXPECT_EQ(st.phi.coeffs.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(st.psi.coeffs.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(st.s, 4.0);
    EXPECT_EQ(st.step_index, 0);
    EXPECT_EQ(st.time, 0.0);
}

TEST(InitState, ExponentialSetup) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 256), params(Flow::AllenCahn, 1.0 / 16, 16.0));
    const auto st = init_state(sys, exp_initial());
    EXPECT_EQ(st.phi[0], 1.0);
    EXPECT_NEAR(st.phi[256], std::exp(1.0), 1e-15);
    EXPECT_LE(constraint_residual(sys, st), 1e-10);
    EXPECT_FALSE(st.varphi.has_value());
}

TEST(InitState, CahnHilliardCarriesChemicalPotential) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 64), params(Flow::CahnHilliard, 1.0 / 16, 25.0));
    const auto st = init_state(sys, exp_initial());
    ASSERT_TRUE(st.varphi.has_value());
    EXPECT_EQ(st.varphi->size(), 65);
}

TEST(InitState, RejectsNonPositiveRadicand) {
    const SavSystem<1> sys(build_interval_mesh(1.0, 8), params(Flow::AllenCahn, 0.1, -1.0));
    EXPECT_THROW(init_state(sys, [](const Point<1>&) { return 0.0; }), ModelViolation);
}

TEST(Step, ZeroIsFixedPointForBothFlows) {
    for (Flow f : {Flow::AllenCahn, Flow::CahnHilliard}) {
        const SavSystem<2> sys(build_rectangle_mesh(0, 1, 0, 1, 4, 4), params(f, 0.1, 9.0));
        auto st = init_state(sys, [](const Point<2>&) { return 0.0; });
        for (int k = 0; k < 5; ++k) st = sys.step(st);
        EXPECT_EQ(st.phi.coeffs.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(st.s, 3.0);
    }
}

TEST(Step, ModifiedEnergyNonIncreasing) {
    for (Flow f : {Flow::AllenCahn, Flow::CahnHilliard}) {
        const SavSystem<1> sys(build_interval_mesh(4 * pi, 128), params(f, 1.0 / 16, 25.0));
        auto st = init_state(sys, exp_initial());
        double prev = sys.report(st).modified_energy;
        for (int k = 0; k < 200; ++k) {
            st = sys.step(st);
            const double e = sys.report(st).modified_energy;
            ASSERT_LE(e, prev + 1e-10 * std::abs(prev)) << "flow " << to_string(f) << " step " << k + 1;
            prev = e;
        }
    }
}

TEST(Step, DissipationIdentityAllenCahn) {
    const SavSystem<2> sys(build_rectangle_mesh(0, 2 * pi, 0, 2 * pi, 12, 12), params(Flow::AllenCahn, 0.05, 400.0));
    auto st = init_state(sys, wave2d());
    const double x2 = sys.params().xi * sys.params().xi;
    for (int k = 0; k < 30; ++k) {
        const auto next = sys.step(st);
        const Vector dphi = next.phi.coeffs - st.phi.coeffs, dpsi = next.psi.coeffs - st.psi.coeffs;
        const double lhs = sys.report(next).modified_energy - sys.report(st).modified_energy;
        const double rhs = -(dphi.dot(sys.mass().apply(dphi)) / sys.params().dt +
                             0.5 * x2 * dpsi.dot(sys.mass().apply(dpsi)) + (next.s - st.s) * (next.s - st.s));
        ASSERT_NEAR(lhs, rhs, 1e-8 * std::abs(sys.report(st).modified_energy)) << "step " << k + 1;
        st = next;
    }
}

TEST(Step, DissipationIdentityCahnHilliard) {
    const SavSystem<2> sys(build_rectangle_mesh(0, 2 * pi, 0, 2 * pi, 12, 12), params(Flow::CahnHilliard, 0.05, 400.0));
    auto st = init_state(sys, wave2d());
    const double x2 = sys.params().xi * sys.params().xi;
    for (int k = 0; k < 30; ++k) {
        const auto next = sys.step(st);
        const Vector dpsi = next.psi.coeffs - st.psi.coeffs;
        const Vector& mu = next.varphi->coeffs;
        const double lhs = sys.report(next).modified_energy - sys.report(st).modified_energy;
        const double rhs = -(sys.params().dt * mu.dot(sys.stiffness().apply(mu)) +
                             0.5 * x2 * dpsi.dot(sys.mass().apply(dpsi)) + (next.s - st.s) * (next.s - st.s));
        ASSERT_NEAR(lhs, rhs, 1e-8 * std::abs(sys.report(st).modified_energy)) << "step " << k + 1;
        st = next;
    }
}

TEST(Step, CahnHilliardConservesMass) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 128), params(Flow::CahnHilliard, 1.0 / 16, 25.0));
    auto st = init_state(sys, exp_initial());
    const Vector ones = Vector::Ones(sys.mesh().num_nodes());
    const double m0 = ones.dot(sys.mass().apply(st.phi.coeffs));
    for (int k = 0; k < 100; ++k) {
        const double before = ones.dot(sys.mass().apply(st.phi.coeffs));
        st = sys.step(st);
        const double after = ones.dot(sys.mass().apply(st.phi.coeffs));
        ASSERT_NEAR(after, before, 1e-10 * std::abs(before));
    }
    EXPECT_NEAR(ones.dot(sys.mass().apply(st.phi.coeffs)), m0, 1e-9 * std::abs(m0));
}

TEST(Step, SplittingConstraintHoldsAfterEveryStep) {
    for (Flow f : {Flow::AllenCahn, Flow::CahnHilliard}) {
        const SavSystem<2> sys(build_polygon_mesh(regular_polygon(6, 2 * pi), 1.0), params(f, 0.02, 500.0));
        auto st = init_state(sys, wave2d());
        for (int k = 0; k < 20; ++k) {
            st = sys.step(st);
            ASSERT_LE(constraint_residual(sys, st), 1e-10);
        }
    }
}

TEST(Step, TimeIsStepCountTimesDt) {
    const double dt = 0.1;
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 32), params(Flow::AllenCahn, dt, 16.0));
    auto st = init_state(sys, exp_initial());
    for (int k = 1; k <= 97; ++k) {
        st = sys.step(st);
        ASSERT_EQ(st.step_index, k);
        ASSERT_EQ(st.time, static_cast<double>(k) * dt);
    }
}

TEST(Step, IterativeSolverMatchesDirect) {
    for (Flow f : {Flow::AllenCahn, Flow::CahnHilliard}) {
        const auto mesh = build_rectangle_mesh(0, 2 * pi, 0, 2 * pi, 8, 8);
        const auto p = params(f, 0.02, 500.0);
        StepperOptions it;
        it.solver = SolverKind::Iterative;
        it.solve.tol = 1e-12;
        const SavSystem<2> direct(mesh, p), iterative(mesh, p, it);
        auto a = init_state(direct, wave2d());
        auto b = init_state(iterative, wave2d());
        for (int k = 0; k < 10; ++k) {
            a = direct.step(a);
            b = iterative.step(b);
        }
        EXPECT_LE((a.phi.coeffs - b.phi.coeffs).norm(), 1e-8 * a.phi.coeffs.norm()) << to_string(f);
        EXPECT_NEAR(a.s, b.s, 1e-9 * a.s);
    }
}

TEST(Step, SolverFailureCarriesStepIndex) {
    StepperOptions it;
    it.solver = SolverKind::Iterative;
    it.solve = {1e-15, 1};
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 64), params(Flow::AllenCahn, 0.1, 16.0), it);
    auto st = init_state(sys, exp_initial());
    try {
        sys.step(st);
        FAIL() << "expected SolverFailure";
    } catch (const SolverFailure& f) {
        EXPECT_EQ(f.step(), 1);
    }
}

TEST(Run, ZeroHorizonTakesNoSteps) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 64), params(Flow::AllenCahn, 0.1, 16.0));
    const auto r = run(sys, init_state(sys, exp_initial()), Schedule{0.0, std::nullopt});
    EXPECT_EQ(r.trace.size(), 1u);
    EXPECT_EQ(r.final_state.step_index, 0);
}

TEST(Run, HorizonStopsAtEndTime) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 64), params(Flow::AllenCahn, 1.0 / 16, 16.0));
    const auto r = run(sys, init_state(sys, exp_initial()), Schedule{1.0, std::nullopt});
    EXPECT_EQ(r.final_state.step_index, 16);
    EXPECT_EQ(r.final_state.time, 1.0);
    EXPECT_EQ(r.trace.size(), 17u);
    EXPECT_FALSE(r.energy_converged);
}

TEST(Run, EnergyToleranceTerminatesMonotonically) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 256), params(Flow::AllenCahn, 1.0 / 16, 16.0));
    long observed = 0;
    const auto r = run(sys, init_state(sys, exp_initial()), Schedule{std::nullopt, 1e-6},
                       [&](const SavState&, const EnergyReport&) { ++observed; });
    EXPECT_TRUE(r.energy_converged);
    EXPECT_EQ(observed, static_cast<long>(r.trace.size()));
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        ASSERT_LE(r.trace[i].modified_energy, r.trace[i - 1].modified_energy + 1e-10 * std::abs(r.trace[i - 1].modified_energy));
    }
    const auto& last = r.trace.back();
    EXPECT_LE(std::abs(last.modified_energy - r.trace[r.trace.size() - 2].modified_energy), 1e-6);
}

TEST(Run, RejectsMalformedSchedules) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 16), params(Flow::AllenCahn, 0.1, 16.0));
    const auto st = init_state(sys, exp_initial());
    EXPECT_THROW(run(sys, st, Schedule{}), std::invalid_argument);
    EXPECT_THROW(run(sys, st, Schedule{-1.0, std::nullopt}), std::invalid_argument);
    EXPECT_THROW(run(sys, st, Schedule{std::nullopt, 0.0}), std::invalid_argument);
}

TEST(Run, MaxStepsCapsTheLoop) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 16), params(Flow::AllenCahn, 0.1, 16.0));
    Schedule s{std::nullopt, 1e-300};
    s.max_steps = 7;
    const auto r = run(sys, init_state(sys, exp_initial()), s);
    EXPECT_EQ(r.final_state.step_index, 7);
    EXPECT_FALSE(r.energy_converged);
}
