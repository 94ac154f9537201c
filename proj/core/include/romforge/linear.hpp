#ifndef ROMFORGE_LINEAR_HPP
#define ROMFORGE_LINEAR_HPP

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "romforge/errors.hpp"

namespace romforge {

using SparseMat = Eigen::SparseMatrix<double>;

struct SolveReport {
    int iterations = 0;
    double residual = 0.0;                // final |r| / |b|
    std::vector<double> residual_history; // |r| / |b| per iteration
};

enum class Precond {
    Jacobi,
    Ilu0, // zero-fill incomplete LU; exact for tridiagonal systems
};

/// Zero-fill incomplete LU factorization on the sparsity pattern of A.
/// Rows with vanishing pivots fall back to a sign-preserving tiny pivot,
/// so the factorization always applies (it is only a preconditioner).
class Ilu0 {
public:
    void factorize(const SparseMat& A);
    // z = U^{-1} L^{-1} r
    void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const;

private:
    Eigen::SparseMatrix<double, Eigen::RowMajor> lu_;
    std::vector<int> diag_;
};

/// Preconditioned conjugate gradient for symmetric positive
/// (semi-)definite systems. Converges when |r| <= tol * |b|; throws
/// SolverFailureError with the residual history otherwise.
SolveReport solve_cg(const SparseMat& A, const Eigen::VectorXd& b,
                     Eigen::VectorXd& x, double tol, int max_iter,
                     Precond precond = Precond::Ilu0);

/// Preconditioned BiCGSTAB for nonsymmetric systems, with restart on
/// rho breakdown.
SolveReport solve_bicgstab(const SparseMat& A, const Eigen::VectorXd& b,
                           Eigen::VectorXd& x, double tol, int max_iter,
                           Precond precond = Precond::Ilu0);

} // namespace romforge

#endif
