#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <type_traits>
#include <stdexcept>
#include <vector>

#include "lbpfc/assembly.hpp"
#include "lbpfc/mesh.hpp"
#include "lbpfc/stepper.hpp"

namespace lbpfc {

enum class Estimator { RecoveryH1, GradientNorm };

inline const char* to_string(Estimator e) {
    return e == Estimator::RecoveryH1 ? "recovery_h1" : "gradient_norm";
}

struct AdaptConfig {
    double epsilon_e = 1e-6;
    double epsilon_sigma = 0.05;
    double theta_r = 0.95;
    double theta_c = 0.4;
    Estimator estimator = Estimator::GradientNorm;
    long max_steps = 1'000'000;

    void validate() const {
        if (!(epsilon_e > 0.0)) throw std::invalid_argument("epsilon_e must be positive");
        if (!(epsilon_sigma > 0.0)) throw std::invalid_argument("epsilon_sigma must be positive");
        if (!(theta_c > 0.0 && theta_c < theta_r && theta_r <= 1.0)) {
            throw std::invalid_argument("need 0 < theta_c < theta_r <= 1");
        }
        if (max_steps < 0) throw std::invalid_argument("max_steps must be non-negative");
    }

    bool operator==(const AdaptConfig&) const = default;
};

/// Nodal vector field, one gradient per node.
template <int Dim>
using GradientField = std::vector<std::array<double, Dim>>;

namespace detail {

template <int Dim>
std::array<double, Dim> element_gradient(const Mesh<Dim>& mesh, Index e, const Vector& u) {
    const auto geo = element_geometry(mesh, e);
    const auto& el = mesh.element(e);
    std::array<double, Dim> g{};
    for (int k = 0; k <= Dim; ++k) {
        for (int d = 0; d < Dim; ++d) g[d] += u[el[k]] * geo.shape_gradients[k][d];
    }
    return g;
}

template <int Dim>
Point<Dim> centroid(const Mesh<Dim>& mesh, Index e) {
    Point<Dim> c{};
    for (Index v : mesh.element(e)) {
        for (int d = 0; d < Dim; ++d) c[d] += mesh.node(v)[d] / (Dim + 1);
    }
    return c;
}

template <int Dim>
std::vector<std::vector<Index>> node_patches(const Mesh<Dim>& mesh) {
    std::vector<std::vector<Index>> patch(mesh.num_nodes());
    for (Index e = 0; e < mesh.num_elements(); ++e) {
        for (Index v : mesh.element(e)) patch[v].push_back(e);
    }
    return patch;
}

/// Linear least-squares fit g(x) = a + B (x - x0) of sampled element gradients.
template <int Dim>
struct PatchFit {
    Point<Dim> origin{};
    double scale = 1.0;
    Eigen::Matrix<double, Dim + 1, Dim> coef;

    std::array<double, Dim> at(const Point<Dim>& p) const {
        Eigen::Matrix<double, 1, Dim + 1> row;
        row[0] = 1.0;
        for (int d = 0; d < Dim; ++d) row[d + 1] = (p[d] - origin[d]) / scale;
        const Eigen::Matrix<double, 1, Dim> g = row * coef;
        std::array<double, Dim> out;
        for (int d = 0; d < Dim; ++d) out[d] = g[d];
        return out;
    }
};

template <int Dim>
std::optional<PatchFit<Dim>> fit_patch(const Mesh<Dim>& mesh, Index node, const std::vector<Index>& patch,
                                       const std::vector<std::array<double, Dim>>& grads,
                                       const std::vector<Point<Dim>>& centroids) {
    if (static_cast<int>(patch.size()) < Dim + 1) return std::nullopt;
    PatchFit<Dim> fit;
    fit.origin = mesh.node(node);
    fit.scale = 0.0;
    for (Index e : patch) fit.scale = std::max(fit.scale, mesh.diameter(e));
    Eigen::MatrixXd P(patch.size(), Dim + 1);
    Eigen::MatrixXd G(patch.size(), Dim);
    for (std::size_t i = 0; i < patch.size(); ++i) {
        P(i, 0) = 1.0;
        for (int d = 0; d < Dim; ++d) {
            P(i, d + 1) = (centroids[patch[i]][d] - fit.origin[d]) / fit.scale;
            G(i, d) = grads[patch[i]][d];
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(P);
    qr.setThreshold(1e-10);
    if (qr.rank() < Dim + 1) return std::nullopt;
    fit.coef = qr.solve(G);
    return fit;
}

}  // namespace detail

/// Superconvergent patch recovery of grad u at the nodes.
///
/// Each node fits a linear polynomial to the element gradients sampled at the
/// centroids of its patch. Boundary nodes, and any node whose patch cannot
/// support the fit, evaluate the fit of the nearest interior node reachable
/// through element adjacency; if there is none, the area-weighted average of
/// the patch gradients is used.
template <int Dim>
GradientField<Dim> recover_gradient(const Mesh<Dim>& mesh, const FieldVector& u) {
    detail::check_field(mesh, u, "recover_gradient");
    const Index ne = mesh.num_elements(), nn = mesh.num_nodes();
    std::vector<std::array<double, Dim>> grads(ne);
    std::vector<Point<Dim>> centroids(ne);
    std::vector<double> measure(ne);
    for (Index e = 0; e < ne; ++e) {
        grads[e] = detail::element_gradient(mesh, e, u.coeffs);
        centroids[e] = detail::centroid(mesh, e);
        measure[e] = element_geometry(mesh, e).measure;
    }
    const auto patches = detail::node_patches(mesh);

    std::vector<std::optional<detail::PatchFit<Dim>>> fits(nn);
    for (Index i = 0; i < nn; ++i) {
        if (!mesh.is_boundary_node(i)) fits[i] = detail::fit_patch<Dim>(mesh, i, patches[i], grads, centroids);
    }

    GradientField<Dim> out(nn);
    std::vector<int> seen(nn, -1);
    for (Index i = 0; i < nn; ++i) {
        if (fits[i]) {
            out[i] = fits[i]->at(mesh.node(i));
            continue;
        }
        // Breadth-first search by rings for the nearest node owning a fit.
        std::vector<Index> ring{i};
        seen[i] = i;
        Index donor = -1;
        while (!ring.empty() && donor < 0) {
            std::vector<Index> next;
            for (Index v : ring) {
                for (Index e : patches[v]) {
                    for (Index w : mesh.element(e)) {
                        if (seen[w] == i) continue;
                        seen[w] = i;
                        next.push_back(w);
                    }
                }
            }
            std::sort(next.begin(), next.end());
            double best = std::numeric_limits<double>::max();
            for (Index w : next) {
                if (!fits[w]) continue;
                const double d = detail::distance<Dim>(mesh.node(i), mesh.node(w));
                if (d < best) {
                    best = d;
                    donor = w;
                }
            }
            ring = std::move(next);
        }
        if (donor >= 0) {
            out[i] = fits[donor]->at(mesh.node(i));
            continue;
        }
        std::array<double, Dim> avg{};
        double total = 0.0;
        for (Index e : patches[i]) {
            for (int d = 0; d < Dim; ++d) avg[d] += measure[e] * grads[e][d];
            total += measure[e];
        }
        for (int d = 0; d < Dim; ++d) avg[d] /= total;
        out[i] = avg;
    }
    return out;
}

struct IndicatorField {
    std::vector<double> values;
    double mean = 0.0;
    double sigma = 0.0;
};

/// Population mean and standard deviation of the indicator values.
inline IndicatorField make_indicator_field(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("indicator field needs at least one value");
    IndicatorField f;
    double sum = 0.0;
    for (double v : values) sum += v;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    f.mean = std::clamp(sum / static_cast<double>(values.size()), *lo, *hi);
    double sq = 0.0;
    for (double v : values) sq += (v - f.mean) * (v - f.mean);
    f.sigma = std::sqrt(sq / static_cast<double>(values.size()));
    f.values = std::move(values);
    return f;
}

/// Element indicators: ||grad u - R u||_{0,e} (RecoveryH1) or ||R u||_{0,e} (GradientNorm).
template <int Dim>
IndicatorField indicator(const Mesh<Dim>& mesh, const FieldVector& u, Estimator kind) {
    const auto rec = recover_gradient(mesh, u);
    std::vector<double> z(mesh.num_elements());
    for (Index e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.element(e);
        const double m = element_geometry(mesh, e).measure;
        const auto g = detail::element_gradient(mesh, e, u.coeffs);
        double acc = 0.0;
        for (const auto& q : element_rule<Dim>()) {
            double sq = 0.0;
            for (int d = 0; d < Dim; ++d) {
                double r = 0.0;
                for (int k = 0; k <= Dim; ++k) r += q.bary[k] * rec[el[k]][d];
                const double v = kind == Estimator::RecoveryH1 ? g[d] - r : r;
                sq += v * v;
            }
            acc += q.weight * sq;
        }
        z[e] = std::sqrt(m * acc);
    }
    return make_indicator_field(std::move(z));
}

struct Marks {
    std::vector<Index> refine;
    std::vector<Index> coarsen;
};

/// refine = {e : z_e > theta_r * mean}, coarsen = {e : z_e < theta_c * mean}.
inline Marks mark(const IndicatorField& ind, const AdaptConfig& cfg) {
    if (ind.values.empty()) throw std::invalid_argument("mark: empty indicator field");
    Marks m;
    for (std::size_t e = 0; e < ind.values.size(); ++e) {
        if (ind.values[e] > cfg.theta_r * ind.mean) {
            m.refine.push_back(static_cast<Index>(e));
        } else if (ind.values[e] < cfg.theta_c * ind.mean) {
            m.coarsen.push_back(static_cast<Index>(e));
        }
    }
    return m;
}

/// Coarsen then refine. Refine marks refer to elements of `mesh` and are
/// carried through the coarsening by permanent cell id.
template <int Dim>
Mesh<Dim> remesh(const Mesh<Dim>& mesh, const Marks& marks) {
    const Mesh<Dim> coarse = coarsen(mesh, std::span<const Index>(marks.coarsen));
    std::vector<Index> cells;
    cells.reserve(marks.refine.size());
    for (Index e : marks.refine) {
        if (e < 0 || e >= mesh.num_elements()) throw std::out_of_range("remesh: element index out of range");
        const Index c = mesh.cell_id(e);
        if (coarse.element_of_cell(c) >= 0) cells.push_back(c);
    }
    return coarse.refined_cells(std::move(cells));
}

/// Nodal values of the old P1 function at the nodes of a mesh from the same
/// genealogy. Shared points are copied; a new point takes the mean of the two
/// endpoints of the edge it bisects, which is exact for P1 because that edge
/// lies inside one old element.
template <int Dim>
FieldVector transfer_field(const Mesh<Dim>& old_mesh, const Mesh<Dim>& new_mesh, const FieldVector& u) {
    detail::check_field(old_mesh, u, "transfer");
    if (old_mesh.tag() == new_mesh.tag()) return u;
    Index max_point = 0;
    for (Index i = 0; i < new_mesh.num_nodes(); ++i) max_point = std::max(max_point, new_mesh.point_id(i));
    std::vector<double> value(max_point + 1, 0.0);
    std::vector<char> known(max_point + 1, 0);
    std::function<double(Index)> eval = [&](Index p) -> double {
        if (known[p]) return value[p];
        const Index old = old_mesh.node_of_point(p);
        double v;
        if (old >= 0) {
            v = u.coeffs[old];
        } else {
            const auto par = new_mesh.point_parents(p);
            if (par[0] < 0) throw std::logic_error("transfer: meshes do not share a genealogy");
            v = 0.5 * (eval(par[0]) + eval(par[1]));
        }
        known[p] = 1;
        value[p] = v;
        return v;
    };
    std::vector<Index> order(new_mesh.num_nodes());
    for (Index i = 0; i < new_mesh.num_nodes(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return new_mesh.point_id(a) < new_mesh.point_id(b); });
    Vector out(new_mesh.num_nodes());
    for (Index i : order) {
        const Index p = new_mesh.point_id(i);
        const Index old = old_mesh.node_of_point(p);
        if (old >= 0 && old_mesh.node(old) != new_mesh.node(i)) {
            throw std::logic_error("transfer: meshes do not share a genealogy");
        }
        out[i] = eval(p);
    }
    return {std::move(out), new_mesh.tag()};
}

/// Moves a state onto the mesh of `sys`: Phi transferred, Psi (and the chemical
/// potential for the H^-1 flow) recomputed, s unchanged.
template <int Dim>
SavState transfer(const SavState& state, const Mesh<Dim>& old_mesh, const SavSystem<Dim>& sys) {
    FieldVector phi = transfer_field(old_mesh, sys.mesh(), state.phi);
    if (old_mesh.tag() == sys.mesh().tag()) return state;
    SavState out = sys.make_state(std::move(phi.coeffs), state.s, state.step_index);
    out.time = state.time;
    return out;
}

struct AdaptEvent {
    long step = 0;
    double time = 0.0;
    Index n_elements = 0;
    double sigma = 0.0;
    Index refined = 0;
    Index coarsened = 0;
    double modified_energy = 0.0;
    /// |s^2 - E1 - D0| after the transfer minus the same quantity before it.
    double s_gap_jump = 0.0;
};

template <int Dim>
struct AdaptResult {
    std::vector<EnergyReport> trace;
    std::vector<AdaptEvent> events;
    Mesh<Dim> final_mesh;
    SavState final_state;
    bool converged = false;
};

/// Called with the current mesh and state after every step (and adaptation).
template <int Dim>
using AdaptObserver = std::function<void(const Mesh<Dim>&, const SavState&, const EnergyReport&)>;

/// Adaptive loop: step, check the energy change, and remesh when the
/// indicator standard deviation exceeds epsilon_sigma. The energy used for the
/// next difference is recomputed on the new mesh after each transfer.
template <int Dim, class F>
AdaptResult<Dim> adapt_run(const Mesh<Dim>& mesh0, F&& u0, const ModelParams& params, const AdaptConfig& cfg,
                           const StepperOptions& options = {},
                           const std::type_identity_t<AdaptObserver<Dim>>& observer = {}) {
    cfg.validate();
    auto sys = std::make_unique<SavSystem<Dim>>(mesh0, params, options);
    SavState state = init_state(*sys, std::forward<F>(u0));
    std::vector<EnergyReport> trace{sys->report(state)};
    if (observer) observer(sys->mesh(), state, trace.back());
    std::vector<AdaptEvent> events;

    double previous = trace.back().modified_energy;
    double delta = std::abs(previous);
    long taken = 0;
    while (delta > cfg.epsilon_e && taken < cfg.max_steps) {
        state = sys->step(state);
        ++taken;
        const EnergyReport rep = sys->report(state);
        trace.push_back(rep);
        delta = std::abs(rep.modified_energy - previous);
        previous = rep.modified_energy;

        const IndicatorField ind = indicator(sys->mesh(), state.phi, cfg.estimator);
        if (ind.sigma > cfg.epsilon_sigma) {
            const Marks marks = mark(ind, cfg);
            Mesh<Dim> next = remesh(sys->mesh(), marks);
            AdaptEvent ev;
            ev.step = state.step_index;
            ev.time = state.time;
            ev.sigma = ind.sigma;
            ev.refined = static_cast<Index>(marks.refine.size());
            ev.coarsened = static_cast<Index>(marks.coarsen.size());
            ev.modified_energy = rep.modified_energy;
            if (next.tag() != sys->mesh().tag()) {
                const double gap_before = std::abs(rep.s * rep.s - rep.e1 - params.d0);
                auto next_sys = std::make_unique<SavSystem<Dim>>(std::move(next), params, options);
                state = transfer(state, sys->mesh(), *next_sys);
                sys = std::move(next_sys);
                const EnergyReport after = sys->report(state);
                previous = after.modified_energy;
                ev.modified_energy = after.modified_energy;
                ev.s_gap_jump = std::abs(after.s * after.s - after.e1 - params.d0) - gap_before;
            }
            ev.n_elements = sys->mesh().num_elements();
            events.push_back(ev);
        }
        if (observer) observer(sys->mesh(), state, trace.back());
    }
    return {std::move(trace), std::move(events), sys->mesh(), std::move(state), delta <= cfg.epsilon_e};
}

}  // namespace lbpfc
