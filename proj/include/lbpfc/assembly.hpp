#pragma once

#include <Eigen/SparseCore>

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "lbpfc/errors.hpp"
#include "lbpfc/mesh.hpp"
#include "lbpfc/params.hpp"
#include "lbpfc/quadrature.hpp"
#include "lbpfc/sparse.hpp"

namespace lbpfc {

enum class MassKind { Consistent, Lumped };

namespace detail {

template <int Dim>
std::vector<Index> visit_order(const Mesh<Dim>& mesh, std::span<const Index> order) {
    if (order.empty()) return all_elements(mesh);
    if (static_cast<Index>(order.size()) != mesh.num_elements()) {
        throw std::invalid_argument("element visit order must be a permutation of all elements");
    }
    return {order.begin(), order.end()};
}

template <int Dim>
double field_at(const Mesh<Dim>& mesh, Index e, const Vector& u, const std::array<double, Dim + 1>& bary) {
    const auto& el = mesh.element(e);
    double v = 0.0;
    for (int k = 0; k <= Dim; ++k) v += bary[k] * u[el[k]];
    return v;
}

template <int Dim>
void check_field(const Mesh<Dim>& mesh, const FieldVector& f, const char* where) {
    if (f.size() != mesh.num_nodes()) throw std::invalid_argument(std::string(where) + ": field length mismatch");
    require_same_mesh(f.mesh_tag, mesh.tag(), where);
}

}  // namespace detail

/// P1 mass matrix M_ij = (eta_i, eta_j). `order` optionally permutes the element loop.
template <int Dim>
SparseMatrix assemble_mass(const Mesh<Dim>& mesh, MassKind kind = MassKind::Consistent,
                           std::span<const Index> order = {}) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * (Dim + 1) * (Dim + 1));
    constexpr double denom = (Dim + 1) * (Dim + 2);
    for (Index e : detail::visit_order(mesh, order)) {
        const auto& el = mesh.element(e);
        const double m = element_geometry(mesh, e).measure;
        for (int i = 0; i <= Dim; ++i) {
            if (kind == MassKind::Lumped) {
                trip.emplace_back(el[i], el[i], m / (Dim + 1));
                continue;
            }
            for (int j = 0; j <= Dim; ++j) {
                trip.emplace_back(el[i], el[j], m * (i == j ? 2.0 : 1.0) / denom);
            }
        }
    }
    SparseMatrix::Storage s(mesh.num_nodes(), mesh.num_nodes());
    s.setFromTriplets(trip.begin(), trip.end());
    return {std::move(s), mesh.tag(), true};
}

/// P1 stiffness matrix A_ij = (grad eta_i, grad eta_j). Element diagonals are set
/// to minus the off-diagonal row sum so that constants lie in the null space.
template <int Dim>
SparseMatrix assemble_stiffness(const Mesh<Dim>& mesh, std::span<const Index> order = {}) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * (Dim + 1) * (Dim + 1));
    for (Index e : detail::visit_order(mesh, order)) {
        const auto& el = mesh.element(e);
        const auto geo = element_geometry(mesh, e);
        std::array<std::array<double, Dim + 1>, Dim + 1> k{};
        for (int i = 0; i <= Dim; ++i) {
            for (int j = i + 1; j <= Dim; ++j) {
                double dot = 0.0;
                for (int d = 0; d < Dim; ++d) dot += geo.shape_gradients[i][d] * geo.shape_gradients[j][d];
                k[i][j] = k[j][i] = geo.measure * dot;
            }
        }
        for (int i = 0; i <= Dim; ++i) {
            double off = 0.0;
            for (int j = 0; j <= Dim; ++j) {
                if (j != i) off += k[i][j];
            }
            k[i][i] = -off;
        }
        for (int i = 0; i <= Dim; ++i) {
            for (int j = 0; j <= Dim; ++j) trip.emplace_back(el[i], el[j], k[i][j]);
        }
    }
    SparseMatrix::Storage s(mesh.num_nodes(), mesh.num_nodes());
    s.setFromTriplets(trip.begin(), trip.end());
    return {std::move(s), mesh.tag(), true};
}

/// E1(phi_h) = integral of N(phi_h), exact for the quartic integrand.
template <int Dim>
double integrate_bulk_energy(const Mesh<Dim>& mesh, const FieldVector& phi, const ModelParams& params) {
    detail::check_field(mesh, phi, "integrate_bulk_energy");
    double total = 0.0;
    for (Index e = 0; e < mesh.num_elements(); ++e) {
        const double m = element_geometry(mesh, e).measure;
        double local = 0.0;
        for (const auto& q : element_rule<Dim>()) {
            local += q.weight * bulk(detail::field_at(mesh, e, phi.coeffs, q.bary), params).n;
        }
        total += m * local;
    }
    return total;
}

/// Load vector b_j = (N'(phi_h), eta_j).
template <int Dim>
Vector assemble_bulk_derivative_load(const Mesh<Dim>& mesh, const FieldVector& phi, const ModelParams& params) {
    detail::check_field(mesh, phi, "assemble_bulk_derivative_load");
    Vector b = Vector::Zero(mesh.num_nodes());
    for (Index e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.element(e);
        const double m = element_geometry(mesh, e).measure;
        for (const auto& q : element_rule<Dim>()) {
            const double dn = bulk(detail::field_at(mesh, e, phi.coeffs, q.bary), params).dn;
            for (int k = 0; k <= Dim; ++k) b[el[k]] += m * q.weight * dn * q.bary[k];
        }
    }
    return b;
}

/// q_j = (u(phi_h), eta_j) with u = N'(phi) / sqrt(E1(phi) + D0).
template <int Dim>
FieldVector assemble_sav_load(const Mesh<Dim>& mesh, const FieldVector& phi, const ModelParams& params) {
    const double radicand = integrate_bulk_energy(mesh, phi, params) + params.d0;
    if (!(radicand > 0.0)) {
        std::ostringstream os;
        os << "E1(phi) + D0 = " << radicand << " is not positive; increase D0";
        throw ModelViolation(os.str(), radicand);
    }
    return {assemble_bulk_derivative_load(mesh, phi, params) / std::sqrt(radicand), mesh.tag()};
}

/// Nodal interpolant of a pointwise function f(Point<Dim>).
template <int Dim, class F>
FieldVector interpolate(const Mesh<Dim>& mesh, F&& f) {
    Vector v(mesh.num_nodes());
    for (Index i = 0; i < mesh.num_nodes(); ++i) v[i] = f(mesh.node(i));
    return {std::move(v), mesh.tag()};
}

template <int Dim>
FieldVector zero_field(const Mesh<Dim>& mesh) {
    return {Vector::Zero(mesh.num_nodes()), mesh.tag()};
}

/// L2 norm ||u_h|| = sqrt(u^T M u).
inline double l2_norm(const SparseMatrix& mass, const Vector& u) {
    return std::sqrt(std::max(0.0, u.dot(mass.apply(u))));
}

/// Locates points in a mesh and evaluates P1 fields there.
template <int Dim>
class PointLocator {
public:
    explicit PointLocator(const Mesh<Dim>& mesh) : mesh_(&mesh) {
        lo_.fill(std::numeric_limits<double>::max());
        hi_.fill(std::numeric_limits<double>::lowest());
        for (const auto& p : mesh.nodes()) {
            for (int d = 0; d < Dim; ++d) {
                lo_[d] = std::min(lo_[d], p[d]);
                hi_[d] = std::max(hi_[d], p[d]);
            }
        }
        const double n = std::max(1.0, std::pow(static_cast<double>(mesh.num_elements()), 1.0 / Dim));
        for (int d = 0; d < Dim; ++d) {
            cells_[d] = std::max(1, static_cast<int>(std::ceil(n)));
            width_[d] = std::max((hi_[d] - lo_[d]) / cells_[d], 1e-300);
        }
        int total = 1;
        for (int d = 0; d < Dim; ++d) total *= cells_[d];
        buckets_.assign(total, {});
        for (Index e = 0; e < mesh.num_elements(); ++e) {
            std::array<int, Dim> a, b;
            const auto& el = mesh.element(e);
            for (int d = 0; d < Dim; ++d) {
                double mn = std::numeric_limits<double>::max(), mx = std::numeric_limits<double>::lowest();
                for (Index v : el) {
                    mn = std::min(mn, mesh.node(v)[d]);
                    mx = std::max(mx, mesh.node(v)[d]);
                }
                a[d] = clamp_cell(d, mn);
                b[d] = clamp_cell(d, mx);
            }
            if constexpr (Dim == 1) {
                for (int i = a[0]; i <= b[0]; ++i) buckets_[i].push_back(e);
            } else {
                for (int j = a[1]; j <= b[1]; ++j) {
                    for (int i = a[0]; i <= b[0]; ++i) buckets_[j * cells_[0] + i].push_back(e);
                }
            }
        }
    }

    struct Location {
        Index element = -1;
        std::array<double, Dim + 1> bary{};
    };

    Location locate(const Point<Dim>& p, double tol = 1e-10) const {
        int bucket = clamp_cell(0, p[0]);
        if constexpr (Dim == 2) bucket += clamp_cell(1, p[1]) * cells_[0];
        Location best;
        double best_violation = std::numeric_limits<double>::max();
        for (Index e : buckets_[bucket]) {
            const auto b = barycentric(e, p);
            double violation = 0.0;
            for (double l : b) violation = std::max(violation, -l);
            if (violation < best_violation) {
                best_violation = violation;
                best = {e, b};
            }
        }
        if (best.element < 0 || best_violation > tol) return {};
        return best;
    }

    double evaluate(const Vector& u, const Point<Dim>& p) const {
        const auto loc = locate(p);
        if (loc.element < 0) throw std::runtime_error("point location failed");
        return detail::field_at(*mesh_, loc.element, u, loc.bary);
    }

private:
    int clamp_cell(int d, double x) const {
        const int c = static_cast<int>(std::floor((x - lo_[d]) / width_[d]));
        return std::clamp(c, 0, cells_[d] - 1);
    }

    std::array<double, Dim + 1> barycentric(Index e, const Point<Dim>& p) const {
        const auto& el = mesh_->element(e);
        if constexpr (Dim == 1) {
            const double x0 = mesh_->node(el[0])[0], x1 = mesh_->node(el[1])[0];
            const double t = (p[0] - x0) / (x1 - x0);
            return {1.0 - t, t};
        } else {
            const auto& a = mesh_->node(el[0]);
            const auto& b = mesh_->node(el[1]);
            const auto& c = mesh_->node(el[2]);
            const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            const double l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
            const double l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
            return {1.0 - l1 - l2, l1, l2};
        }
    }

    const Mesh<Dim>* mesh_;
    std::array<double, Dim> lo_{}, hi_{}, width_{};
    std::array<int, Dim> cells_{};
    std::vector<std::vector<Index>> buckets_;
};

}  // namespace lbpfc
