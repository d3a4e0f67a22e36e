#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "lbpfc/mesh.hpp"

namespace lbpfc {

using Vector = Eigen::VectorXd;

/// Nodal coefficients of a P1 field, tagged with the mesh they live on.
struct FieldVector {
    Vector coeffs;
    MeshTag mesh_tag = 0;

    FieldVector() = default;
    FieldVector(Vector v, MeshTag tag) : coeffs(std::move(v)), mesh_tag(tag) {}

    Index size() const { return static_cast<Index>(coeffs.size()); }
    double operator[](Index i) const { return coeffs[i]; }
};

/// Square sparse operator in compressed-row storage.
class SparseMatrix {
public:
    using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    SparseMatrix() = default;
    SparseMatrix(Storage m, MeshTag tag, bool symmetric)
        : m_(std::move(m)), tag_(tag), symmetric_(symmetric) {
        if (m_.rows() != m_.cols()) throw std::invalid_argument("SparseMatrix must be square");
        m_.makeCompressed();
    }

    Index rows() const { return static_cast<Index>(m_.rows()); }
    MeshTag mesh_tag() const { return tag_; }
    bool symmetric() const { return symmetric_; }
    const Storage& storage() const { return m_; }
    double coeff(Index i, Index j) const { return m_.coeff(i, j); }

    Vector apply(const Vector& x) const {
        if (x.size() != m_.cols()) throw std::invalid_argument("SparseMatrix::apply: size mismatch");
        return m_ * x;
    }

    Vector row_sums() const { return m_ * Vector::Ones(m_.cols()); }

    double max_abs_entry() const {
        double mx = 0.0;
        for (Eigen::Index k = 0; k < m_.nonZeros(); ++k) mx = std::max(mx, std::abs(m_.valuePtr()[k]));
        return mx;
    }

private:
    Storage m_;
    MeshTag tag_ = 0;
    bool symmetric_ = false;
};

inline void require_same_mesh(MeshTag a, MeshTag b, const char* where) {
    if (a != b) throw std::invalid_argument(std::string(where) + ": operands belong to different meshes");
}

}  // namespace lbpfc
