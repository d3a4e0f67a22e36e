#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lbpfc {

using Index = std::int32_t;
using MeshTag = std::uint64_t;

template <int Dim>
using Point = std::array<double, Dim>;

template <int Dim>
struct ElementGeometry {
    double measure = 0.0;
    /// Constant gradient of each barycentric basis function on the element.
    std::array<Point<Dim>, Dim + 1> shape_gradients{};
};

struct ConformityReport {
    bool ok = true;
    std::string message;
    explicit operator bool() const { return ok; }
};

namespace detail {

inline MeshTag next_mesh_tag() {
    static std::atomic<MeshTag> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

inline std::uint64_t edge_key(Index a, Index b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

template <int Dim>
double distance(const Point<Dim>& a, const Point<Dim>& b) {
    double s = 0.0;
    for (int k = 0; k < Dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

inline double signed_area(const Point<2>& a, const Point<2>& b, const Point<2>& c) {
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

}  // namespace detail

/// Conforming simplicial mesh (segments in 1D, triangles in 2D).
///
/// Every point and cell ever created is kept in a shared, append-only genealogy
/// with permanent ids. A Mesh value is a selection of active cells from that
/// genealogy; node and element numbering is derived by sorting permanent ids,
/// so coarsening back to an earlier set of cells reproduces the earlier mesh
/// exactly, numbering included. Mesh values are immutable; refine() and
/// coarsen() return new meshes.
///
/// 2D cells follow the newest-vertex convention: vertex 0 is the peak and the
/// opposite edge (1,2) is the refinement edge. Initial meshes are labelled so
/// that the refinement edge is the longest edge.
template <int Dim>
class Mesh {
    static_assert(Dim == 1 || Dim == 2, "only 1D and 2D meshes are supported");

public:
    static constexpr int kVertices = Dim + 1;
    using PointT = Point<Dim>;
    using Element = std::array<Index, Dim + 1>;
    using Facet = std::array<Index, Dim>;

    enum class Labeling { LongestEdge, AsGiven };

    Mesh(std::vector<PointT> nodes, std::vector<Element> elements,
         Labeling labeling = Labeling::LongestEdge);

    Index num_nodes() const { return static_cast<Index>(nodes_.size()); }
    Index num_elements() const { return static_cast<Index>(elements_.size()); }
    const std::vector<PointT>& nodes() const { return nodes_; }
    const std::vector<Element>& elements() const { return elements_; }
    const PointT& node(Index i) const { return nodes_[i]; }
    const Element& element(Index e) const { return elements_[e]; }
    /// Facets on the domain boundary (node pairs in 2D, single nodes in 1D).
    const std::vector<Facet>& boundary_facets() const { return boundary_facets_; }
    const std::vector<char>& boundary_node_flags() const { return boundary_node_; }
    bool is_boundary_node(Index i) const { return boundary_node_[i] != 0; }

    /// Maximum element diameter.
    double h() const { return h_; }
    double diameter(Index e) const;
    double total_measure() const;
    MeshTag tag() const { return tag_; }

    int generation(Index e) const { return tree_->cells[active_[e]].generation; }
    Index cell_id(Index e) const { return active_[e]; }
    /// Element index of an active cell, -1 if the cell is not active here.
    Index element_of_cell(Index cell) const;
    Index parent_cell(Index e) const { return tree_->cells[active_[e]].parent; }

    Index point_id(Index node) const { return node_point_[node]; }
    /// Node index of a permanent point, -1 if not a vertex of this mesh.
    Index node_of_point(Index point) const {
        return point < static_cast<Index>(point_node_.size()) ? point_node_[point] : -1;
    }
    /// Endpoints of the edge whose midpoint created this point; {-1,-1} for initial points.
    std::array<Index, 2> point_parents(Index point) const { return tree_->point_parents[point]; }

    ConformityReport check_conformity() const;

    Mesh refined_cells(std::vector<Index> cells) const;
    Mesh coarsened_cells(std::vector<Index> cells) const;

private:
    struct Cell {
        std::array<Index, Dim + 1> v;
        Index parent = -1;
        std::array<Index, 2> children{-1, -1};
        int generation = 0;
    };
    struct Genealogy {
        std::vector<PointT> points;
        std::vector<std::array<Index, 2>> point_parents;
        std::vector<Cell> cells;
        std::unordered_map<std::uint64_t, Index> midpoints;
        /// Boundary facets of the initial mesh, by permanent point id.
        std::vector<std::array<Index, Dim>> initial_boundary;
    };

    Mesh(std::shared_ptr<const Genealogy> tree, std::vector<Index> active);

    static Index midpoint(Genealogy& g, Index a, Index b);
    static std::array<Index, 2> bisect(Genealogy& g, Index cell);
    static std::uint64_t refinement_edge(const Cell& c) {
        if constexpr (Dim == 1) {
            return detail::edge_key(c.v[0], c.v[1]);
        } else {
            return detail::edge_key(c.v[1], c.v[2]);
        }
    }
    void rebuild();

    std::shared_ptr<const Genealogy> tree_;
    std::vector<Index> active_;  // sorted cell ids

    std::vector<PointT> nodes_;
    std::vector<Element> elements_;
    std::vector<Index> node_point_;
    std::vector<Index> point_node_;
    std::vector<Facet> boundary_facets_;
    std::vector<char> boundary_node_;
    double h_ = 0.0;
    MeshTag tag_ = 0;
};

// ---------------------------------------------------------------------------

template <int Dim>
Mesh<Dim>::Mesh(std::vector<PointT> nodes, std::vector<Element> elements, Labeling labeling) {
    if (nodes.empty() || elements.empty()) {
        throw std::invalid_argument("mesh needs at least one node and one element");
    }
    const auto n = static_cast<Index>(nodes.size());
    auto g = std::make_shared<Genealogy>();
    g->points = std::move(nodes);
    g->point_parents.assign(g->points.size(), {-1, -1});
    g->cells.reserve(elements.size());
    for (auto el : elements) {
        for (Index v : el) {
            if (v < 0 || v >= n) throw std::invalid_argument("element vertex index out of range");
        }
        if constexpr (Dim == 1) {
            const double len = g->points[el[1]][0] - g->points[el[0]][0];
            if (len == 0.0) throw std::invalid_argument("degenerate segment");
            if (len < 0.0) std::swap(el[0], el[1]);
        } else {
            const double a = detail::signed_area(g->points[el[0]], g->points[el[1]], g->points[el[2]]);
            if (!(std::abs(a) > 0.0)) throw std::invalid_argument("degenerate triangle");
            if (a < 0.0) std::swap(el[1], el[2]);
            if (labeling == Labeling::LongestEdge) {
                // Rotate so the edge opposite vertex 0 is the longest (first one on ties).
                int best = 0;
                double best_len = -1.0;
                for (int k = 0; k < 3; ++k) {
                    const double len = detail::distance<2>(g->points[el[(k + 1) % 3]],
                                                           g->points[el[(k + 2) % 3]]);
                    if (len > best_len * (1.0 + 1e-12)) {
                        best = k;
                        best_len = len;
                    }
                }
                std::rotate(el.begin(), el.begin() + best, el.end());
            }
        }
        g->cells.push_back(Cell{el, -1, {-1, -1}, 0});
    }

    // Initial boundary: facets with a single incident cell.
    std::unordered_map<std::uint64_t, int> count;
    for (const auto& c : g->cells) {
        if constexpr (Dim == 1) {
            ++count[static_cast<std::uint64_t>(c.v[0])];
            ++count[static_cast<std::uint64_t>(c.v[1])];
        } else {
            for (int k = 0; k < 3; ++k) ++count[detail::edge_key(c.v[k], c.v[(k + 1) % 3])];
        }
    }
    for (const auto& [key, k] : count) {
        if (k > 2) throw std::invalid_argument("facet shared by more than two elements");
        if (k == 1) {
            if constexpr (Dim == 1) {
                g->initial_boundary.push_back({static_cast<Index>(key)});
            } else {
                g->initial_boundary.push_back(
                    {static_cast<Index>(key >> 32), static_cast<Index>(key & 0xffffffffu)});
            }
        }
    }
    std::sort(g->initial_boundary.begin(), g->initial_boundary.end());

    std::vector<Index> active(g->cells.size());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = static_cast<Index>(i);
    tree_ = std::move(g);
    active_ = std::move(active);
    rebuild();
}

template <int Dim>
Mesh<Dim>::Mesh(std::shared_ptr<const Genealogy> tree, std::vector<Index> active)
    : tree_(std::move(tree)), active_(std::move(active)) {
    std::sort(active_.begin(), active_.end());
    rebuild();
}

template <int Dim>
void Mesh<Dim>::rebuild() {
    tag_ = detail::next_mesh_tag();
    const auto& g = *tree_;
    std::vector<char> used(g.points.size(), 0);
    for (Index c : active_) {
        for (Index p : g.cells[c].v) used[p] = 1;
    }
    point_node_.assign(g.points.size(), -1);
    node_point_.clear();
    nodes_.clear();
    for (std::size_t p = 0; p < used.size(); ++p) {
        if (!used[p]) continue;
        point_node_[p] = static_cast<Index>(nodes_.size());
        node_point_.push_back(static_cast<Index>(p));
        nodes_.push_back(g.points[p]);
    }
    elements_.clear();
    elements_.reserve(active_.size());
    for (Index c : active_) {
        Element el;
        for (int k = 0; k < kVertices; ++k) el[k] = point_node_[g.cells[c].v[k]];
        elements_.push_back(el);
    }

    boundary_facets_.clear();
    boundary_node_.assign(nodes_.size(), 0);
    if constexpr (Dim == 1) {
        std::vector<int> count(nodes_.size(), 0);
        for (const auto& el : elements_) {
            ++count[el[0]];
            ++count[el[1]];
        }
        for (std::size_t i = 0; i < count.size(); ++i) {
            if (count[i] == 1) {
                boundary_facets_.push_back({static_cast<Index>(i)});
                boundary_node_[i] = 1;
            }
        }
    } else {
        std::unordered_map<std::uint64_t, int> count;
        count.reserve(elements_.size() * 3);
        for (const auto& el : elements_) {
            for (int k = 0; k < 3; ++k) ++count[detail::edge_key(el[k], el[(k + 1) % 3])];
        }
        for (const auto& [key, k] : count) {
            if (k == 1) {
                const auto a = static_cast<Index>(key >> 32);
                const auto b = static_cast<Index>(key & 0xffffffffu);
                boundary_facets_.push_back({a, b});
                boundary_node_[a] = boundary_node_[b] = 1;
            }
        }
        std::sort(boundary_facets_.begin(), boundary_facets_.end());
    }

    h_ = 0.0;
    for (Index e = 0; e < num_elements(); ++e) h_ = std::max(h_, diameter(e));
}

template <int Dim>
double Mesh<Dim>::diameter(Index e) const {
    const auto& el = elements_[e];
    double d = 0.0;
    for (int i = 0; i < kVertices; ++i) {
        for (int j = i + 1; j < kVertices; ++j) {
            d = std::max(d, detail::distance<Dim>(nodes_[el[i]], nodes_[el[j]]));
        }
    }
    return d;
}

template <int Dim>
Index Mesh<Dim>::element_of_cell(Index cell) const {
    auto it = std::lower_bound(active_.begin(), active_.end(), cell);
    if (it == active_.end() || *it != cell) return -1;
    return static_cast<Index>(it - active_.begin());
}

template <int Dim>
Index Mesh<Dim>::midpoint(Genealogy& g, Index a, Index b) {
    const auto key = detail::edge_key(a, b);
    if (auto it = g.midpoints.find(key); it != g.midpoints.end()) return it->second;
    PointT m;
    for (int k = 0; k < Dim; ++k) m[k] = 0.5 * (g.points[a][k] + g.points[b][k]);
    const auto id = static_cast<Index>(g.points.size());
    g.points.push_back(m);
    g.point_parents.push_back({std::min(a, b), std::max(a, b)});
    g.midpoints.emplace(key, id);
    return id;
}

template <int Dim>
std::array<Index, 2> Mesh<Dim>::bisect(Genealogy& g, Index cell) {
    if (g.cells[cell].children[0] >= 0) return g.cells[cell].children;
    const auto v = g.cells[cell].v;
    const int gen = g.cells[cell].generation + 1;
    Cell c0, c1;
    if constexpr (Dim == 1) {
        const Index p = midpoint(g, v[0], v[1]);
        c0 = Cell{{v[0], p}, cell, {-1, -1}, gen};
        c1 = Cell{{p, v[1]}, cell, {-1, -1}, gen};
    } else {
        const Index p = midpoint(g, v[1], v[2]);
        c0 = Cell{{p, v[0], v[1]}, cell, {-1, -1}, gen};
        c1 = Cell{{p, v[2], v[0]}, cell, {-1, -1}, gen};
    }
    const auto id0 = static_cast<Index>(g.cells.size());
    g.cells.push_back(c0);
    g.cells.push_back(c1);
    g.cells[cell].children = {id0, id0 + 1};
    return g.cells[cell].children;
}

template <int Dim>
Mesh<Dim> Mesh<Dim>::refined_cells(std::vector<Index> cells) const {
    if (cells.empty()) return *this;
    auto g = std::make_shared<Genealogy>(*tree_);

    std::unordered_set<std::uint64_t> marked_edges;
    for (Index c : cells) marked_edges.insert(refinement_edge(g->cells[c]));

    if constexpr (Dim == 2) {
        // Closure: any cell with a cut edge must also cut its refinement edge.
        std::unordered_map<std::uint64_t, std::array<Index, 2>> edge_cells;
        edge_cells.reserve(active_.size() * 3);
        for (Index c : active_) {
            const auto& v = g->cells[c].v;
            for (int k = 0; k < 3; ++k) {
                auto [it, fresh] = edge_cells.try_emplace(detail::edge_key(v[k], v[(k + 1) % 3]),
                                                          std::array<Index, 2>{-1, -1});
                (it->second[0] < 0 ? it->second[0] : it->second[1]) = c;
            }
        }
        std::vector<std::uint64_t> work(marked_edges.begin(), marked_edges.end());
        std::sort(work.begin(), work.end());
        while (!work.empty()) {
            const auto key = work.back();
            work.pop_back();
            for (Index c : edge_cells[key]) {
                if (c < 0) continue;
                const auto r = refinement_edge(g->cells[c]);
                if (marked_edges.insert(r).second) work.push_back(r);
            }
        }
    }

    std::vector<Index> next;
    next.reserve(active_.size() + 2 * cells.size());
    std::vector<Index> stack;
    for (Index c : active_) {
        if (marked_edges.count(refinement_edge(g->cells[c]))) {
            stack.push_back(c);
        } else {
            next.push_back(c);
        }
    }
    while (!stack.empty()) {
        const Index c = stack.back();
        stack.pop_back();
        for (Index child : bisect(*g, c)) {
            if (Dim == 2 && marked_edges.count(refinement_edge(g->cells[child]))) {
                stack.push_back(child);
            } else {
                next.push_back(child);
            }
        }
    }
    return Mesh(std::move(g), std::move(next));
}

template <int Dim>
Mesh<Dim> Mesh<Dim>::coarsened_cells(std::vector<Index> cells) const {
    if (cells.empty()) return *this;
    const auto& g = *tree_;
    std::vector<char> active(g.cells.size(), 0), marked(g.cells.size(), 0);
    for (Index c : active_) active[c] = 1;
    for (Index c : cells) marked[c] = 1;

    auto sibling = [&](Index c) {
        const auto& ch = g.cells[g.cells[c].parent].children;
        return ch[0] == c ? ch[1] : ch[0];
    };

    std::vector<Index> merged_parents;
    std::vector<char> removed(g.cells.size(), 0);
    if constexpr (Dim == 1) {
        std::sort(cells.begin(), cells.end());
        for (Index c : cells) {
            if (g.cells[c].parent < 0 || removed[c]) continue;
            const Index s = sibling(c);
            if (!active[s] || !marked[s]) continue;
            removed[c] = removed[s] = 1;
            merged_parents.push_back(g.cells[c].parent);
        }
    } else {
        // A newest vertex can be removed when every cell of its star is marked,
        // has it as peak, and has its sibling in the star as well.
        std::unordered_map<Index, std::vector<Index>> star;
        for (Index c : active_) {
            for (Index p : g.cells[c].v) star[p].push_back(c);
        }
        std::vector<Index> candidates;
        for (Index c : cells) {
            if (g.cells[c].parent >= 0) candidates.push_back(g.cells[c].v[0]);
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        for (Index p : candidates) {
            const auto& s = star[p];
            bool ok = s.size() == 2 || s.size() == 4;
            for (Index c : s) {
                if (!ok) break;
                ok = marked[c] && g.cells[c].v[0] == p && g.cells[c].parent >= 0 &&
                     std::find(s.begin(), s.end(), sibling(c)) != s.end();
            }
            if (!ok) continue;
            for (Index c : s) {
                removed[c] = 1;
                merged_parents.push_back(g.cells[c].parent);
            }
        }
    }
    if (merged_parents.empty()) return *this;

    std::vector<Index> next;
    next.reserve(active_.size());
    for (Index c : active_) {
        if (!removed[c]) next.push_back(c);
    }
    std::sort(merged_parents.begin(), merged_parents.end());
    merged_parents.erase(std::unique(merged_parents.begin(), merged_parents.end()),
                         merged_parents.end());
    next.insert(next.end(), merged_parents.begin(), merged_parents.end());
    return Mesh(tree_, std::move(next));
}

template <int Dim>
ElementGeometry<Dim> element_geometry(const Mesh<Dim>& mesh, Index e) {
    const auto& el = mesh.element(e);
    ElementGeometry<Dim> geo;
    if constexpr (Dim == 1) {
        const double len = mesh.node(el[1])[0] - mesh.node(el[0])[0];
        geo.measure = len;
        geo.shape_gradients = {{{-1.0 / len}, {1.0 / len}}};
    } else {
        const auto& p0 = mesh.node(el[0]);
        const auto& p1 = mesh.node(el[1]);
        const auto& p2 = mesh.node(el[2]);
        const double twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        geo.measure = 0.5 * twice;
        geo.shape_gradients[0] = {(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice};
        geo.shape_gradients[1] = {(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice};
        geo.shape_gradients[2] = {(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice};
    }
    return geo;
}

template <int Dim>
double Mesh<Dim>::total_measure() const {
    // Neumaier summation: deep refinement sums very many small areas.
    double s = 0.0, c = 0.0;
    for (Index e = 0; e < num_elements(); ++e) {
        const double m = element_geometry(*this, e).measure;
        const double t = s + m;
        c += std::abs(s) >= std::abs(m) ? (s - t) + m : (m - t) + s;
        s = t;
    }
    return s + c;
}

template <int Dim>
ConformityReport Mesh<Dim>::check_conformity() const {
    for (Index e = 0; e < num_elements(); ++e) {
        if (!(element_geometry(*this, e).measure > 0.0)) {
            return {false, "element " + std::to_string(e) + " has non-positive measure"};
        }
    }
    const auto& g = *tree_;
    if constexpr (Dim == 1) {
        std::vector<int> count(nodes_.size(), 0);
        for (const auto& el : elements_) {
            ++count[el[0]];
            ++count[el[1]];
        }
        int ends = 0;
        for (std::size_t i = 0; i < count.size(); ++i) {
            if (count[i] > 2) return {false, "node shared by more than two segments"};
            if (count[i] == 1) {
                ++ends;
                const Index p = node_point_[i];
                bool on_boundary = false;
                for (const auto& b : g.initial_boundary) on_boundary |= (b[0] == p);
                if (!on_boundary) return {false, "interior node with a single segment"};
            }
        }
        if (ends != 2) return {false, "interval mesh must have exactly two end nodes"};
    } else {
        std::unordered_map<std::uint64_t, int> count;
        for (const auto& el : elements_) {
            for (int k = 0; k < 3; ++k) ++count[detail::edge_key(el[k], el[(k + 1) % 3])];
        }
        for (const auto& [key, k] : count) {
            if (k > 2) return {false, "edge shared by more than two triangles"};
            if (k == 2) continue;
            // A single-incidence edge must lie on a segment of the initial boundary;
            // otherwise it is the long side of a hanging node.
            const auto& a = nodes_[static_cast<Index>(key >> 32)];
            const auto& b = nodes_[static_cast<Index>(key & 0xffffffffu)];
            bool on_boundary = false;
            for (const auto& seg : g.initial_boundary) {
                const auto& s0 = g.points[seg[0]];
                const auto& s1 = g.points[seg[1]];
                const double len = detail::distance<2>(s0, s1);
                const double tol = 1e-10 * len * len;
                if (std::abs(detail::signed_area(s0, s1, a)) > tol ||
                    std::abs(detail::signed_area(s0, s1, b)) > tol) {
                    continue;
                }
                auto inside = [&](const Point<2>& p) {
                    const double t = ((p[0] - s0[0]) * (s1[0] - s0[0]) + (p[1] - s0[1]) * (s1[1] - s0[1])) /
                                     (len * len);
                    return t >= -1e-12 && t <= 1.0 + 1e-12;
                };
                if (inside(a) && inside(b)) {
                    on_boundary = true;
                    break;
                }
            }
            if (!on_boundary) return {false, "hanging node: interior edge with a single triangle"};
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Free-function interface.

template <int Dim>
Mesh<Dim> refine(const Mesh<Dim>& mesh, std::span<const Index> marked) {
    std::vector<Index> cells;
    cells.reserve(marked.size());
    for (Index e : marked) {
        if (e < 0 || e >= mesh.num_elements()) throw std::out_of_range("refine: element index out of range");
        cells.push_back(mesh.cell_id(e));
    }
    return mesh.refined_cells(std::move(cells));
}

template <int Dim>
Mesh<Dim> coarsen(const Mesh<Dim>& mesh, std::span<const Index> marked) {
    std::vector<Index> cells;
    cells.reserve(marked.size());
    for (Index e : marked) {
        if (e < 0 || e >= mesh.num_elements()) throw std::out_of_range("coarsen: element index out of range");
        cells.push_back(mesh.cell_id(e));
    }
    return mesh.coarsened_cells(std::move(cells));
}

template <int Dim>
std::vector<Index> all_elements(const Mesh<Dim>& mesh) {
    std::vector<Index> all(mesh.num_elements());
    for (Index e = 0; e < mesh.num_elements(); ++e) all[e] = e;
    return all;
}

inline Mesh<1> build_interval_mesh(double length, int n_cells) {
    if (!(length > 0.0) || !std::isfinite(length)) throw std::invalid_argument("interval length must be positive");
    if (n_cells < 1) throw std::invalid_argument("interval mesh needs at least one cell");
    std::vector<Point<1>> nodes(n_cells + 1);
    for (int i = 0; i <= n_cells; ++i) nodes[i] = {length * i / n_cells};
    nodes[n_cells] = {length};
    std::vector<Mesh<1>::Element> elements(n_cells);
    for (int i = 0; i < n_cells; ++i) elements[i] = {i, i + 1};
    return Mesh<1>(std::move(nodes), std::move(elements));
}

/// Structured triangulation of [x0,x1]x[y0,y1]; each cell is cut along its (i,j)-(i+1,j+1) diagonal.
inline Mesh<2> build_rectangle_mesh(double x0, double x1, double y0, double y1, int nx, int ny) {
    if (!(x1 > x0) || !(y1 > y0)) throw std::invalid_argument("rectangle must have positive extent");
    if (nx < 1 || ny < 1) throw std::invalid_argument("rectangle mesh needs at least one cell per direction");
    std::vector<Point<2>> nodes;
    nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j) {
        const double y = j == ny ? y1 : y0 + (y1 - y0) * j / ny;
        for (int i = 0; i <= nx; ++i) {
            const double x = i == nx ? x1 : x0 + (x1 - x0) * i / nx;
            nodes.push_back({x, y});
        }
    }
    auto id = [nx](int i, int j) { return static_cast<Index>(j * (nx + 1) + i); };
    std::vector<Mesh<2>::Element> elements;
    elements.reserve(2 * static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return Mesh<2>(std::move(nodes), std::move(elements));
}

inline std::vector<Point<2>> regular_polygon(int sides, double radius, Point<2> center = {0.0, 0.0}) {
    if (sides < 3) throw std::invalid_argument("a polygon needs at least three sides");
    if (!(radius > 0.0)) throw std::invalid_argument("polygon radius must be positive");
    std::vector<Point<2>> v(sides);
    for (int k = 0; k < sides; ++k) {
        const double a = 2.0 * std::numbers::pi * k / sides;
        v[k] = {center[0] + radius * std::cos(a), center[1] + radius * std::sin(a)};
    }
    return v;
}

/// Fan triangulation from the vertex centroid, then bisection of every element
/// whose diameter exceeds target_h until none does.
inline Mesh<2> build_polygon_mesh(std::vector<Point<2>> vertices, double target_h) {
    if (vertices.size() < 3) throw std::invalid_argument("polygon needs at least three vertices");
    if (!(target_h > 0.0)) throw std::invalid_argument("target_h must be positive");
    const std::size_t n = vertices.size();
    int sign = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double turn = detail::signed_area(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
        const int s = turn > 0.0 ? 1 : (turn < 0.0 ? -1 : 0);
        if (s == 0 || (sign != 0 && s != sign)) {
            throw std::invalid_argument("polygon is not strictly convex");
        }
        sign = s;
    }
    // Winding number check rejects self-intersecting star polygons with uniform turning.
    double total_angle = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = vertices[i];
        const auto& b = vertices[(i + 1) % n];
        const auto& c = vertices[(i + 2) % n];
        const double ang = std::atan2((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]),
                                      (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1]));
        total_angle += ang;
    }
    if (std::abs(std::abs(total_angle) - 2.0 * std::numbers::pi) > 1e-6) {
        throw std::invalid_argument("polygon is not strictly convex");
    }
    if (sign < 0) std::reverse(vertices.begin(), vertices.end());

    Point<2> c{0.0, 0.0};
    for (const auto& v : vertices) {
        c[0] += v[0] / static_cast<double>(n);
        c[1] += v[1] / static_cast<double>(n);
    }
    std::vector<Point<2>> nodes = vertices;
    nodes.push_back(c);
    const auto center = static_cast<Index>(n);
    std::vector<Mesh<2>::Element> elements;
    for (std::size_t i = 0; i < n; ++i) {
        elements.push_back({center, static_cast<Index>(i), static_cast<Index>((i + 1) % n)});
    }
    Mesh<2> mesh(std::move(nodes), std::move(elements));
    while (mesh.h() > target_h) {
        std::vector<Index> marked;
        for (Index e = 0; e < mesh.num_elements(); ++e) {
            if (mesh.diameter(e) > target_h) marked.push_back(e);
        }
        mesh = refine(mesh, std::span<const Index>(marked));
    }
    return mesh;
}

}  // namespace lbpfc
