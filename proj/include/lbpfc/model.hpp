#pragma once

#include <cmath>
#include <optional>
#include <sstream>

#include "lbpfc/assembly.hpp"
#include "lbpfc/errors.hpp"
#include "lbpfc/params.hpp"

namespace lbpfc {

/// Full discrete unknown of the first-order SAV scheme.
struct SavState {
    FieldVector phi;
    FieldVector psi;
    std::optional<FieldVector> varphi;  ///< chemical potential, H^-1 flow only
    double s = 0.0;
    double time = 0.0;
    long step_index = 0;
};

struct EnergyReport {
    double time = 0.0;
    double original_energy = 0.0;  ///< xi^2/2 ||psi_h||^2 + E1(phi_h)
    double modified_energy = 0.0;  ///< xi^2/2 ||psi_h||^2 + s^2
    double e1 = 0.0;
    double s = 0.0;
};

/// s0 = sqrt(E1(phi0) + D0).
template <int Dim>
double sav_init(const Mesh<Dim>& mesh, const FieldVector& phi0, const ModelParams& params) {
    const double radicand = integrate_bulk_energy(mesh, phi0, params) + params.d0;
    if (!(radicand > 0.0)) {
        std::ostringstream os;
        os << "E1(phi0) + D0 = " << radicand << " is not positive; raise D0";
        throw ModelViolation(os.str(), radicand);
    }
    return std::sqrt(radicand);
}

template <int Dim>
EnergyReport energy_report(const Mesh<Dim>& mesh, const SavState& state, const SparseMatrix& mass,
                           const ModelParams& params) {
    require_same_mesh(state.psi.mesh_tag, mass.mesh_tag(), "energy_report");
    const double grad_part = 0.5 * params.xi * params.xi * state.psi.coeffs.dot(mass.apply(state.psi.coeffs));
    const double e1 = integrate_bulk_energy(mesh, state.phi, params);
    return {state.time, grad_part + e1, grad_part + state.s * state.s, e1, state.s};
}

}  // namespace lbpfc
