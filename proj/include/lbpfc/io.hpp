#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lbpfc/adapt.hpp"
#include "lbpfc/errors.hpp"
#include "lbpfc/mesh.hpp"
#include "lbpfc/model.hpp"

namespace lbpfc {

namespace detail {

/// Shortest form that reads back to the same double (17 significant digits).
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    return f;
}

}  // namespace detail

/// Plain-text mesh block:
///
///   MESH dim=<d> nodes=<N> elements=<K>
///   <x> [<y>]           (N lines)
///   <i0> <i1> [<i2>]    (K lines, 0-based node indices)
template <int Dim>
void write_mesh(std::ostream& os, const Mesh<Dim>& mesh) {
    os << "MESH dim=" << Dim << " nodes=" << mesh.num_nodes() << " elements=" << mesh.num_elements() << "\n";
    for (const auto& p : mesh.nodes()) {
        for (int d = 0; d < Dim; ++d) os << (d ? " " : "") << detail::format_double(p[d]);
        os << "\n";
    }
    for (const auto& el : mesh.elements()) {
        for (int k = 0; k <= Dim; ++k) os << (k ? " " : "") << el[k];
        os << "\n";
    }
}

namespace detail {

inline std::map<std::string, std::string> read_header(std::istream& is, const std::string& tag) {
    std::string line;
    while (std::getline(is, line) && line.empty()) {
    }
    std::istringstream hs(line);
    std::string word;
    hs >> word;
    if (word != tag) throw std::runtime_error("expected a " + tag + " header, got '" + line + "'");
    std::map<std::string, std::string> kv;
    while (hs >> word) {
        const auto eq = word.find('=');
        if (eq == std::string::npos) throw std::runtime_error("malformed " + tag + " header field '" + word + "'");
        kv[word.substr(0, eq)] = word.substr(eq + 1);
    }
    return kv;
}

inline long header_int(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("header lacks '" + key + "'");
    return std::stol(it->second);
}

}  // namespace detail

/// Reads a block written by write_mesh; the element vertex order is kept as given.
template <int Dim>
Mesh<Dim> read_mesh(std::istream& is) {
    const auto kv = detail::read_header(is, "MESH");
    if (detail::header_int(kv, "dim") != Dim) throw std::runtime_error("mesh dimension mismatch");
    const long n = detail::header_int(kv, "nodes"), k = detail::header_int(kv, "elements");
    std::vector<Point<Dim>> nodes(n);
    for (auto& p : nodes) {
        for (int d = 0; d < Dim; ++d) {
            std::string tok;
            if (!(is >> tok)) throw std::runtime_error("truncated node list");
            p[d] = std::stod(tok);
        }
    }
    std::vector<typename Mesh<Dim>::Element> elements(k);
    for (auto& el : elements) {
        for (int v = 0; v <= Dim; ++v) {
            if (!(is >> el[v])) throw std::runtime_error("truncated element list");
        }
    }
    std::string rest;
    std::getline(is, rest);
    return Mesh<Dim>(std::move(nodes), std::move(elements), Mesh<Dim>::Labeling::AsGiven);
}

/// Field snapshot: a mesh block followed by one FIELD block per named nodal field.
///
///   FIELD name=<name> values=<N> time=<t> step=<n>
///   <value>             (N lines)
template <int Dim>
void write_snapshot(std::ostream& os, const Mesh<Dim>& mesh, const SavState& state) {
    write_mesh(os, mesh);
    auto field = [&](const char* name, const Vector& v) {
        os << "FIELD name=" << name << " values=" << v.size() << " time=" << detail::format_double(state.time)
           << " step=" << state.step_index << "\n";
        for (Eigen::Index i = 0; i < v.size(); ++i) os << detail::format_double(v[i]) << "\n";
    };
    field("phi", state.phi.coeffs);
    field("psi", state.psi.coeffs);
    if (state.varphi) field("varphi", state.varphi->coeffs);
}

/// Reads the FIELD blocks that follow a mesh block.
inline std::map<std::string, Vector> read_fields(std::istream& is) {
    std::map<std::string, Vector> out;
    for (;;) {
        const int c = (is >> std::ws).peek();
        if (c == std::char_traits<char>::eof()) break;
        const auto kv = detail::read_header(is, "FIELD");
        const long n = detail::header_int(kv, "values");
        Vector v(n);
        for (long i = 0; i < n; ++i) {
            std::string tok;
            if (!(is >> tok)) throw std::runtime_error("truncated field");
            v[i] = std::stod(tok);
        }
        std::string rest;
        std::getline(is, rest);
        out[kv.at("name")] = std::move(v);
    }
    return out;
}

inline void write_energy_csv(std::ostream& os, const std::vector<EnergyReport>& trace, long first_step = 0) {
    os << "step,time,original_energy,modified_energy,e1,s\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& r = trace[i];
        os << first_step + static_cast<long>(i) << "," << detail::format_double(r.time) << ","
           << detail::format_double(r.original_energy) << "," << detail::format_double(r.modified_energy) << ","
           << detail::format_double(r.e1) << "," << detail::format_double(r.s) << "\n";
    }
}

inline void write_adapt_csv(std::ostream& os, const std::vector<AdaptEvent>& events) {
    os << "step,time,n_elements,sigma,refined,coarsened,modified_energy\n";
    for (const auto& e : events) {
        os << e.step << "," << detail::format_double(e.time) << "," << e.n_elements << ","
           << detail::format_double(e.sigma) << "," << e.refined << "," << e.coarsened << ","
           << detail::format_double(e.modified_energy) << "\n";
    }
}

/// Legacy VTK unstructured grid with point data.
template <int Dim>
void write_vtk(std::ostream& os, const Mesh<Dim>& mesh, const SavState& state) {
    os << "# vtk DataFile Version 3.0\nlbpfc step " << state.step_index << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.num_nodes() << " double\n";
    for (const auto& p : mesh.nodes()) {
        os << detail::format_double(p[0]) << " " << (Dim > 1 ? detail::format_double(p[Dim - 1]) : "0") << " 0\n";
    }
    os << "CELLS " << mesh.num_elements() << " " << mesh.num_elements() * (Dim + 2) << "\n";
    for (const auto& el : mesh.elements()) {
        os << Dim + 1;
        for (Index v : el) os << " " << v;
        os << "\n";
    }
    os << "CELL_TYPES " << mesh.num_elements() << "\n";
    for (Index e = 0; e < mesh.num_elements(); ++e) os << (Dim == 1 ? 3 : 5) << "\n";
    os << "POINT_DATA " << mesh.num_nodes() << "\n";
    auto scalars = [&](const char* name, const Vector& v) {
        os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (Eigen::Index i = 0; i < v.size(); ++i) os << detail::format_double(v[i]) << "\n";
    };
    scalars("phi", state.phi.coeffs);
    scalars("psi", state.psi.coeffs);
    if (state.varphi) scalars("varphi", state.varphi->coeffs);
}

}  // namespace lbpfc
