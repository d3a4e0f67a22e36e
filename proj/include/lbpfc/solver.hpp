#pragma once

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <concepts>
#include <memory>
#include <sstream>
#include <variant>
#include <vector>

#include "lbpfc/errors.hpp"
#include "lbpfc/params.hpp"
#include "lbpfc/sparse.hpp"

namespace lbpfc {

template <class Op>
concept LinearOperator = requires(const Op& op, const Vector& x) {
    { op.apply(x) } -> std::convertible_to<Vector>;
    { op.rows() } -> std::convertible_to<Index>;
};

struct SolveOptions {
    double tol = 1e-10;       ///< relative residual target
    long max_iterations = 0;  ///< 0 selects 10 * n
};

struct SolveStats {
    long iterations = 0;
    double relative_residual = 0.0;
};

/// Cholesky factorization of an SPD sparse matrix (used for the mass matrix).
class MassSolver {
public:
    explicit MassSolver(const SparseMatrix& mass) : n_(mass.rows()) {
        Eigen::SparseMatrix<double> colmajor = mass.storage();
        llt_.compute(colmajor);
        if (llt_.info() != Eigen::Success) throw std::runtime_error("mass matrix is not positive definite");
    }
    Vector solve(const Vector& b) const { return llt_.solve(b); }
    Index rows() const { return n_; }

private:
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
    Index n_;
};

/// Matrix-free C, the operator left after eliminating psi (and, for the H^-1
/// flow, the chemical potential) from the linear part of one SAV step:
///   L2:   C = M + dt xi^2 (M-A) M^-1 (M-A)
///   H^-1: C = M + dt xi^2 A M^-1 (M-A) M^-1 (M-A)
class OperatorC {
public:
    OperatorC(const SparseMatrix& mass, const SparseMatrix& stiffness, std::shared_ptr<const MassSolver> mass_solver,
              double dt, double xi, Flow flow)
        : mass_(&mass), stiff_(&stiffness), mass_solver_(std::move(mass_solver)), dt_xi2_(dt * xi * xi), flow_(flow) {
        require_same_mesh(mass.mesh_tag(), stiffness.mesh_tag(), "OperatorC");
    }

    Index rows() const { return mass_->rows(); }
    Flow flow() const { return flow_; }
    const SparseMatrix& mass() const { return *mass_; }
    const SparseMatrix& stiffness() const { return *stiff_; }
    double dt_xi2() const { return dt_xi2_; }

    /// (M - A) x
    Vector shifted(const Vector& x) const { return mass_->apply(x) - stiff_->apply(x); }

    Vector apply(const Vector& x) const {
        Vector inner = mass_solver_->solve(shifted(x));
        if (flow_ == Flow::AllenCahn) {
            return mass_->apply(x) + dt_xi2_ * shifted(inner);
        }
        Vector outer = mass_solver_->solve(shifted(inner));
        return mass_->apply(x) + dt_xi2_ * stiff_->apply(outer);
    }

private:
    const SparseMatrix* mass_;
    const SparseMatrix* stiff_;
    std::shared_ptr<const MassSolver> mass_solver_;
    double dt_xi2_;
    Flow flow_;
};

namespace detail {

inline long iteration_cap(const SolveOptions& opt, Index n) {
    return opt.max_iterations > 0 ? opt.max_iterations : 10L * std::max<Index>(n, 1);
}

inline void require_positive_tol(const SolveOptions& opt) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
}

}  // namespace detail

struct IdentityPreconditioner {
    Vector apply(const Vector& r) const { return r; }
};

/// Preconditioned conjugate gradients for a symmetric positive definite operator.
template <LinearOperator Op, class Prec = IdentityPreconditioner>
Vector solve_spd(const Op& op, const Vector& b, SolveOptions opt = {}, SolveStats* stats = nullptr,
                 const Prec& prec = {}) {
    detail::require_positive_tol(opt);
    const Index n = op.rows();
    if (b.size() != n) throw std::invalid_argument("solve_spd: right-hand side size mismatch");
    Vector x = Vector::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        if (stats) *stats = {0, 0.0};
        return x;
    }
    const long cap = detail::iteration_cap(opt, n);
    long it = 0;
    double res = 1.0;
    // The recursive residual drifts from the true one on ill-conditioned
    // systems, so CG restarts from the true residual until that meets tol.
    for (;;) {
        Vector r = b - op.apply(x);
        res = r.norm() / bnorm;
        if (res <= opt.tol || it >= cap) break;
        Vector z = prec.apply(r);
        Vector p = z;
        double rz = r.dot(z);
        while (it < cap) {
            const Vector ap = op.apply(p);
            const double alpha = rz / p.dot(ap);
            x += alpha * p;
            r -= alpha * ap;
            ++it;
            if (r.norm() / bnorm <= opt.tol) break;
            z = prec.apply(r);
            const double rz_new = r.dot(z);
            p = z + (rz_new / rz) * p;
            rz = rz_new;
        }
    }
    if (stats) *stats = {it, res};
    if (res > opt.tol) {
        std::ostringstream os;
        os << "conjugate gradients did not converge: relative residual " << res << " after " << it << " iterations";
        throw SolverFailure(os.str(), res, it);
    }
    return x;
}

/// Restarted, right-preconditioned GMRES with Givens rotations, for operators without symmetry.
template <LinearOperator Op, class Prec = IdentityPreconditioner>
Vector solve_general(const Op& op, const Vector& b, SolveOptions opt = {}, SolveStats* stats = nullptr,
                     const Prec& prec = {}) {
    detail::require_positive_tol(opt);
    const Index n = op.rows();
    if (b.size() != n) throw std::invalid_argument("solve_general: right-hand side size mismatch");
    Vector x = Vector::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        if (stats) *stats = {0, 0.0};
        return x;
    }
    const int restart = static_cast<int>(std::min<Index>(n, 100));
    const long cap = detail::iteration_cap(opt, n);
    long it = 0;
    double res = 1.0;
    Eigen::MatrixXd basis(n, restart + 1);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(restart + 1, restart);
    Vector cs(restart), sn(restart), g(restart + 1);

    while (it < cap) {
        Vector r = b - op.apply(x);
        double beta = r.norm();
        res = beta / bnorm;
        if (res <= opt.tol) break;
        basis.col(0) = r / beta;
        hess.setZero();
        g.setZero();
        g[0] = beta;
        int k = 0;
        for (; k < restart && it < cap; ++k, ++it) {
            Vector w = op.apply(prec.apply(basis.col(k)));
            for (int j = 0; j <= k; ++j) {
                hess(j, k) = w.dot(basis.col(j));
                w -= hess(j, k) * basis.col(j);
            }
            hess(k + 1, k) = w.norm();
            if (hess(k + 1, k) > 0.0) basis.col(k + 1) = w / hess(k + 1, k);
            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * hess(j, k) + sn[j] * hess(j + 1, k);
                hess(j + 1, k) = -sn[j] * hess(j, k) + cs[j] * hess(j + 1, k);
                hess(j, k) = t;
            }
            const double denom = std::hypot(hess(k, k), hess(k + 1, k));
            cs[k] = hess(k, k) / denom;
            sn[k] = hess(k + 1, k) / denom;
            hess(k, k) = denom;
            hess(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            if (std::abs(g[k + 1]) / bnorm <= opt.tol * 0.5) {
                ++k;
                ++it;
                break;
            }
        }
        const Vector y = hess.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        x += prec.apply(basis.leftCols(k) * y);
    }
    res = (b - op.apply(x)).norm() / bnorm;
    if (stats) *stats = {it, res};
    if (res > opt.tol) {
        std::ostringstream os;
        os << "GMRES did not converge: relative residual " << res << " after " << it << " iterations";
        throw SolverFailure(os.str(), res, it);
    }
    return x;
}

/// Solves C x = b through a sparse LU factorization of the unreduced block
/// system, whose Schur complement onto the phi block is exactly C. The factor
/// is computed once per mesh and reused for every step.
class DirectCSolver {
public:
    DirectCSolver(const SparseMatrix& mass, const SparseMatrix& stiffness, double dt, double xi, Flow flow)
        : n_(mass.rows()), flow_(flow) {
        require_same_mesh(mass.mesh_tag(), stiffness.mesh_tag(), "DirectCSolver");
        const double c = dt * xi * xi;
        std::vector<Eigen::Triplet<double>> trip;
        const auto& m = mass.storage();
        const auto& a = stiffness.storage();
        auto add = [&](const SparseMatrix::Storage& s, Index row0, Index col0, double scale) {
            for (Eigen::Index i = 0; i < s.outerSize(); ++i) {
                for (SparseMatrix::Storage::InnerIterator itr(s, i); itr; ++itr) {
                    trip.emplace_back(row0 + itr.row(), col0 + itr.col(), scale * itr.value());
                }
            }
        };
        const Index n = n_;
        if (flow == Flow::AllenCahn) {
            // [ M        c (M-A) ] [phi]   [b]
            // [ -(M-A)   M       ] [psi] = [0]
            add(m, 0, 0, 1.0);
            add(m, 0, n, c);
            add(a, 0, n, -c);
            add(m, n, 0, -1.0);
            add(a, n, 0, 1.0);
            add(m, n, n, 1.0);
            blocks_ = 2;
        } else {
            // [ M        dt A    0            ] [phi ]   [b]
            // [ 0        M       -xi^2 (M-A)  ] [mu  ] = [0]
            // [ -(M-A)   0       M            ] [psi ]   [0]
            const double x2 = xi * xi;
            add(m, 0, 0, 1.0);
            add(a, 0, n, dt);
            add(m, n, n, 1.0);
            add(m, n, 2 * n, -x2);
            add(a, n, 2 * n, x2);
            add(m, 2 * n, 0, -1.0);
            add(a, 2 * n, 0, 1.0);
            add(m, 2 * n, 2 * n, 1.0);
            blocks_ = 3;
        }
        Eigen::SparseMatrix<double> k(blocks_ * n, blocks_ * n);
        k.setFromTriplets(trip.begin(), trip.end());
        k.makeCompressed();
        lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>>();
        lu_->compute(k);
        if (lu_->info() != Eigen::Success) throw SingularSystem("block system factorization failed");
    }

    Index rows() const { return n_; }

    Vector solve(const Vector& b) const {
        Vector rhs = Vector::Zero(blocks_ * n_);
        rhs.head(n_) = b;
        const Vector sol = lu_->solve(rhs);
        return sol.head(n_);
    }

private:
    Index n_;
    Flow flow_;
    int blocks_ = 2;
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu_;
};

/// Sparse factorization of C with M replaced by its row-sum lumping D, for
/// which D^-1 is diagonal and the whole operator can be formed explicitly:
///   L2:   D + dt xi^2 (D-A) D^-1 (D-A)
///   H^-1: D + dt xi^2 A D^-1 (D-A) D^-1 (D-A)
class LumpedCPreconditioner {
public:
    explicit LumpedCPreconditioner(const OperatorC& op) {
        using Sp = Eigen::SparseMatrix<double>;
        const Vector d = op.mass().row_sums();
        Sp dm(op.rows(), op.rows()), dinv(op.rows(), op.rows());
        std::vector<Eigen::Triplet<double>> td, ti;
        for (Index i = 0; i < op.rows(); ++i) {
            td.emplace_back(i, i, d[i]);
            ti.emplace_back(i, i, 1.0 / d[i]);
        }
        dm.setFromTriplets(td.begin(), td.end());
        dinv.setFromTriplets(ti.begin(), ti.end());
        const Sp a = op.stiffness().storage();
        const Sp shifted = dm - a;
        Sp c = op.flow() == Flow::AllenCahn ? Sp(dm + op.dt_xi2() * Sp(shifted * dinv * shifted))
                                            : Sp(dm + op.dt_xi2() * Sp(a * dinv * shifted * dinv * shifted));
        c.makeCompressed();
        lu_ = std::make_shared<Eigen::SparseLU<Sp, Eigen::COLAMDOrdering<int>>>();
        lu_->compute(c);
        if (lu_->info() != Eigen::Success) throw SingularSystem("lumped preconditioner factorization failed");
    }
    Vector apply(const Vector& r) const { return lu_->solve(r); }

private:
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu_;
};

/// C solves by Krylov iteration on the matrix-free operator, preconditioned
/// with LumpedCPreconditioner: CG for the symmetric L2 form, GMRES for the H^-1 form.
class IterativeCSolver {
public:
    IterativeCSolver(OperatorC op, SolveOptions opt) : op_(std::move(op)), opt_(opt), prec_(op_) {}
    Index rows() const { return op_.rows(); }
    Vector solve(const Vector& b) const {
        return op_.flow() == Flow::AllenCahn ? solve_spd(op_, b, opt_, nullptr, prec_)
                                             : solve_general(op_, b, opt_, nullptr, prec_);
    }
    const OperatorC& op() const { return op_; }

private:
    OperatorC op_;
    SolveOptions opt_;
    LumpedCPreconditioner prec_;
};

template <class S>
concept CSolve = requires(const S& s, const Vector& b) {
    { s.solve(b) } -> std::convertible_to<Vector>;
};

/// Solves (C + dt/2 q_left q_right^T) phi = c with two C-solves:
///   x = C^-1 c, y = C^-1 q_left,
///   sigma = q_right^T x / (1 + dt/2 q_right^T y),  phi = x - dt/2 sigma y.
template <CSolve S>
Vector rank_one_solve(const S& csolve, const Vector& q_left, const Vector& q_right, const Vector& c, double dt) {
    if (q_left.size() != c.size() || q_right.size() != c.size()) {
        throw std::invalid_argument("rank_one_solve: size mismatch");
    }
    Vector x = csolve.solve(c);
    if (q_left.squaredNorm() == 0.0 || q_right.squaredNorm() == 0.0) return x;
    const Vector y = csolve.solve(q_left);
    const double denom = 1.0 + 0.5 * dt * q_right.dot(y);
    if (!(std::abs(denom) > 1e-14)) {
        std::ostringstream os;
        os << "rank-one update is singular: 1 + dt/2 q^T C^-1 q = " << denom;
        throw SingularSystem(os.str());
    }
    const double sigma = q_right.dot(x) / denom;
    x -= 0.5 * dt * sigma * y;
    return x;
}

}  // namespace lbpfc
