#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <variant>
#include <vector>

#include "lbpfc/assembly.hpp"
#include "lbpfc/model.hpp"
#include "lbpfc/solver.hpp"

namespace lbpfc {

enum class SolverKind { Direct, Iterative };

struct StepperOptions {
    SolverKind solver = SolverKind::Direct;
    SolveOptions solve{};
    MassKind mass = MassKind::Consistent;
};

/// Matrices and factorizations for one mesh and one parameter set.
template <int Dim>
class SavSystem {
public:
    SavSystem(Mesh<Dim> mesh, ModelParams params, StepperOptions options = {})
        : mesh_(std::make_shared<const Mesh<Dim>>(std::move(mesh))),
          params_((params.validate(), params)),
          options_(options),
          mass_(std::make_shared<const SparseMatrix>(assemble_mass(*mesh_, options_.mass))),
          stiff_(std::make_shared<const SparseMatrix>(assemble_stiffness(*mesh_))),
          mass_solver_(std::make_shared<const MassSolver>(*mass_)),
          csolve_(make_csolve()) {}

    const Mesh<Dim>& mesh() const { return *mesh_; }
    const ModelParams& params() const { return params_; }
    const StepperOptions& options() const { return options_; }
    const SparseMatrix& mass() const { return *mass_; }
    const SparseMatrix& stiffness() const { return *stiff_; }
    const MassSolver& mass_solver() const { return *mass_solver_; }

    OperatorC operator_c() const {
        return OperatorC(*mass_, *stiff_, mass_solver_, params_.dt, params_.xi, params_.flow);
    }

    Vector solve_c(const Vector& b) const {
        return std::visit([&](const auto& s) { return s.solve(b); }, csolve_);
    }

    /// Psi from the splitting constraint M Psi = (M - A) Phi.
    Vector psi_from_phi(const Vector& phi) const {
        return mass_solver_->solve(mass_->apply(phi) - stiff_->apply(phi));
    }

    /// Chemical potential from M mu = xi^2 (M - A) Psi + q s.
    Vector chemical_potential(const Vector& psi, const Vector& q, double s) const {
        const double x2 = params_.xi * params_.xi;
        return mass_solver_->solve(x2 * (mass_->apply(psi) - stiff_->apply(psi)) + q * s);
    }

    /// State for a given nodal Phi at (step_index, time); s is supplied by the caller.
    SavState make_state(Vector phi, double s, long step_index) const {
        SavState st;
        st.phi = FieldVector(std::move(phi), mesh_->tag());
        st.psi = FieldVector(psi_from_phi(st.phi.coeffs), mesh_->tag());
        st.s = s;
        st.step_index = step_index;
        st.time = static_cast<double>(step_index) * params_.dt;
        if (params_.flow == Flow::CahnHilliard) {
            const FieldVector q = assemble_sav_load(*mesh_, st.phi, params_);
            st.varphi = FieldVector(chemical_potential(st.psi.coeffs, q.coeffs, s), mesh_->tag());
        }
        return st;
    }

    EnergyReport report(const SavState& state) const { return energy_report(*mesh_, state, *mass_, params_); }

    SavState step(const SavState& state) const;

private:
    std::variant<DirectCSolver, IterativeCSolver> make_csolve() const {
        if (options_.solver == SolverKind::Direct) {
            return DirectCSolver(*mass_, *stiff_, params_.dt, params_.xi, params_.flow);
        }
        return IterativeCSolver(operator_c(), options_.solve);
    }

    std::shared_ptr<const Mesh<Dim>> mesh_;
    ModelParams params_;
    StepperOptions options_;
    std::shared_ptr<const SparseMatrix> mass_;
    std::shared_ptr<const SparseMatrix> stiff_;
    std::shared_ptr<const MassSolver> mass_solver_;
    std::variant<DirectCSolver, IterativeCSolver> csolve_;
};

/// Phi0 = interpolant of u0, Psi0 from the splitting constraint, s0 = sqrt(E1 + D0).
/// A nonpositive radicand throws ModelViolation.
template <int Dim, class F>
SavState init_state(const SavSystem<Dim>& sys, F&& u0) {
    FieldVector phi = interpolate(sys.mesh(), std::forward<F>(u0));
    const double s0 = sav_init(sys.mesh(), phi, sys.params());
    return sys.make_state(std::move(phi.coeffs), s0, 0);
}

template <int Dim>
SavState step_allen_cahn(const SavSystem<Dim>& sys, const SavState& state);
template <int Dim>
SavState step_cahn_hilliard(const SavSystem<Dim>& sys, const SavState& state);

template <int Dim>
SavState SavSystem<Dim>::step(const SavState& state) const {
    return params_.flow == Flow::AllenCahn ? step_allen_cahn(*this, state) : step_cahn_hilliard(*this, state);
}

namespace detail {

template <int Dim>
void check_state(const SavSystem<Dim>& sys, const SavState& state) {
    require_same_mesh(state.phi.mesh_tag, sys.mesh().tag(), "step");
    require_same_mesh(state.psi.mesh_tag, sys.mesh().tag(), "step");
}

template <int Dim, class Solve>
SavState guarded_step(const SavState& state, Solve&& solve) {
    try {
        return solve();
    } catch (const SolverFailure& f) {
        std::ostringstream os;
        os << f.what() << " (step " << state.step_index + 1 << ")";
        throw SolverFailure(os.str(), f.residual(), f.iterations(), state.step_index + 1);
    }
}

}  // namespace detail

/// One step of the L2 scheme:
///   c = M Phi^n - dt q (s^n - q^T Phi^n / 2),  (C + dt/2 q q^T) Phi^{n+1} = c,
///   M Psi^{n+1} = (M - A) Phi^{n+1},  s^{n+1} = s^n + q^T (Phi^{n+1} - Phi^n) / 2.
template <int Dim>
SavState step_allen_cahn(const SavSystem<Dim>& sys, const SavState& state) {
    detail::check_state(sys, state);
    return detail::guarded_step<Dim>(state, [&] {
        const auto& p = sys.params();
        const Vector q = assemble_sav_load(sys.mesh(), state.phi, p).coeffs;
        const Vector& phi = state.phi.coeffs;
        const Vector c = sys.mass().apply(phi) - p.dt * (state.s - 0.5 * q.dot(phi)) * q;
        struct {
            const SavSystem<Dim>* s;
            Vector solve(const Vector& b) const { return s->solve_c(b); }
        } csolve{&sys};
        Vector next = rank_one_solve(csolve, q, q, c, p.dt);
        const double s_next = state.s + 0.5 * q.dot(next - phi);
        SavState out;
        out.psi = FieldVector(sys.psi_from_phi(next), sys.mesh().tag());
        out.phi = FieldVector(std::move(next), sys.mesh().tag());
        out.s = s_next;
        out.step_index = state.step_index + 1;
        out.time = static_cast<double>(out.step_index) * p.dt;
        return out;
    });
}

/// One step of the H^-1 scheme. With q_l = A M^-1 q the elimination gives
///   (C + dt/2 q_l q^T) Phi^{n+1} = M Phi^n - dt q_l (s^n - q^T Phi^n / 2),
/// followed by the same psi and s updates and M mu = xi^2 (M-A) Psi + q s.
template <int Dim>
SavState step_cahn_hilliard(const SavSystem<Dim>& sys, const SavState& state) {
    detail::check_state(sys, state);
    return detail::guarded_step<Dim>(state, [&] {
        const auto& p = sys.params();
        const Vector q = assemble_sav_load(sys.mesh(), state.phi, p).coeffs;
        const Vector ql = sys.stiffness().apply(sys.mass_solver().solve(q));
        const Vector& phi = state.phi.coeffs;
        const Vector c = sys.mass().apply(phi) - p.dt * (state.s - 0.5 * q.dot(phi)) * ql;
        struct {
            const SavSystem<Dim>* s;
            Vector solve(const Vector& b) const { return s->solve_c(b); }
        } csolve{&sys};
        Vector next = rank_one_solve(csolve, ql, q, c, p.dt);
        SavState out;
        out.s = state.s + 0.5 * q.dot(next - phi);
        out.psi = FieldVector(sys.psi_from_phi(next), sys.mesh().tag());
        out.varphi = FieldVector(sys.chemical_potential(out.psi.coeffs, q, out.s), sys.mesh().tag());
        out.phi = FieldVector(std::move(next), sys.mesh().tag());
        out.step_index = state.step_index + 1;
        out.time = static_cast<double>(out.step_index) * p.dt;
        return out;
    });
}

/// Stop rule for run(): time horizon, modified-energy plateau, or both.
struct Schedule {
    std::optional<double> t_end;
    std::optional<double> energy_tol;
    long max_steps = 1'000'000;
};

struct RunResult {
    std::vector<EnergyReport> trace;
    SavState final_state;
    bool energy_converged = false;
};

using StepObserver = std::function<void(const SavState&, const EnergyReport&)>;

/// Steps until t >= t_end or |E~^{n+1} - E~^n| <= energy_tol. The observer, if
/// any, sees the initial state and every subsequent one.
template <int Dim>
RunResult run(const SavSystem<Dim>& sys, SavState state, const Schedule& schedule, const StepObserver& observer = {}) {
    if (!schedule.t_end && !schedule.energy_tol) {
        throw std::invalid_argument("schedule needs t_end or energy_tol");
    }
    if (schedule.t_end && !(*schedule.t_end >= 0.0)) throw std::invalid_argument("t_end must be non-negative");
    if (schedule.energy_tol && !(*schedule.energy_tol > 0.0)) throw std::invalid_argument("energy_tol must be positive");
    const double dt = sys.params().dt;
    long target = std::numeric_limits<long>::max();
    if (schedule.t_end) target = static_cast<long>(std::ceil(*schedule.t_end / dt - 1e-9));

    RunResult result;
    result.trace.push_back(sys.report(state));
    if (observer) observer(state, result.trace.back());
    long taken = 0;
    while (state.step_index < target && taken < schedule.max_steps) {
        state = sys.step(state);
        ++taken;
        result.trace.push_back(sys.report(state));
        if (observer) observer(state, result.trace.back());
        const double delta = std::abs(result.trace.back().modified_energy -
                                      result.trace[result.trace.size() - 2].modified_energy);
        if (schedule.energy_tol && delta <= *schedule.energy_tol) {
            result.energy_converged = true;
            break;
        }
    }
    result.final_state = std::move(state);
    return result;
}

}  // namespace lbpfc
