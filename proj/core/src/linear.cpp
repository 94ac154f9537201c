#include "romforge/linear.hpp"

#include <cmath>
#include <limits>

namespace romforge {

void Ilu0::factorize(const SparseMat& A) {
    lu_ = A; // row-major copy, compressed with sorted columns
    lu_.makeCompressed();
    const int n = static_cast<int>(lu_.rows());
    diag_.assign(n, -1);

    const int* outer = lu_.outerIndexPtr();
    const int* inner = lu_.innerIndexPtr();
    double* vals = lu_.valuePtr();

    for (int i = 0; i < n; ++i) {
        for (int idx = outer[i]; idx < outer[i + 1]; ++idx) {
            if (inner[idx] == i) diag_[i] = idx;
        }
        if (diag_[i] < 0) {
            throw NumericError("ILU(0) requires a structurally nonzero diagonal");
        }
    }

    constexpr double tiny = 1e-300;
    for (int i = 0; i < n; ++i) {
        for (int idx = outer[i]; idx < outer[i + 1]; ++idx) {
            const int k = inner[idx];
            if (k >= i) break;
            double pivot = vals[diag_[k]];
            if (std::abs(pivot) < tiny) pivot = pivot >= 0 ? tiny : -tiny;
            const double lik = vals[idx] / pivot;
            vals[idx] = lik;
            // subtract lik * (row k, columns > k) on the row-i pattern
            int p = idx + 1;
            for (int kk = diag_[k] + 1; kk < outer[k + 1]; ++kk) {
                const int j = inner[kk];
                while (p < outer[i + 1] && inner[p] < j) ++p;
                if (p == outer[i + 1]) break;
                if (inner[p] == j) vals[p] -= lik * vals[kk];
            }
        }
    }
}

void Ilu0::apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
    const int n = static_cast<int>(lu_.rows());
    const int* outer = lu_.outerIndexPtr();
    const int* inner = lu_.innerIndexPtr();
    const double* vals = lu_.valuePtr();
    z = r;
    // forward with unit lower part
    for (int i = 0; i < n; ++i) {
        double acc = z[i];
        for (int idx = outer[i]; idx < diag_[i]; ++idx) {
            acc -= vals[idx] * z[inner[idx]];
        }
        z[i] = acc;
    }
    // backward with the upper part
    constexpr double tiny = 1e-300;
    for (int i = n - 1; i >= 0; --i) {
        double acc = z[i];
        for (int idx = diag_[i] + 1; idx < outer[i + 1]; ++idx) {
            acc -= vals[idx] * z[inner[idx]];
        }
        double pivot = vals[diag_[i]];
        if (std::abs(pivot) < tiny) pivot = pivot >= 0 ? tiny : -tiny;
        z[i] = acc / pivot;
    }
}

namespace {

class Preconditioner {
public:
    Preconditioner(const SparseMat& A, Precond kind) : kind_(kind) {
        if (kind_ == Precond::Ilu0) {
            ilu_.factorize(A);
        } else {
            dinv_ = A.diagonal();
            for (Eigen::Index i = 0; i < dinv_.size(); ++i) {
                dinv_[i] = dinv_[i] != 0.0 ? 1.0 / dinv_[i] : 1.0;
            }
        }
    }

    void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
        if (kind_ == Precond::Ilu0) {
            ilu_.apply(r, z);
        } else {
            z = dinv_.cwiseProduct(r);
        }
    }

private:
    Precond kind_;
    Ilu0 ilu_;
    Eigen::VectorXd dinv_;
};

[[noreturn]] void fail(const char* what, SolveReport& rep) {
    throw SolverFailureError(std::string(what) + " (iterations: " +
                                 std::to_string(rep.iterations) + ", residual: " +
                                 std::to_string(rep.residual) + ")",
                             std::move(rep.residual_history));
}

} // namespace

SolveReport solve_cg(const SparseMat& A, const Eigen::VectorXd& b,
                     Eigen::VectorXd& x, double tol, int max_iter,
                     Precond precond) {
    SolveReport rep;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero(A.rows());
        return rep;
    }
    if (x.size() != A.rows()) x.setZero(A.rows());
    const Preconditioner M(A, precond);

    Eigen::VectorXd r = b - A * x;
    Eigen::VectorXd z(A.rows());
    M.apply(r, z);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    rep.residual = r.norm() / bnorm;
    rep.residual_history.push_back(rep.residual);

    for (int it = 0; it < max_iter; ++it) {
        if (rep.residual <= tol) return rep;
        const Eigen::VectorXd Ap = A * p;
        const double pAp = p.dot(Ap);
        if (pAp <= 0.0 || !std::isfinite(pAp)) {
            fail("conjugate gradient broke down (matrix not SPD?)", rep);
        }
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        M.apply(r, z);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        rep.iterations = it + 1;
        rep.residual = r.norm() / bnorm;
        rep.residual_history.push_back(rep.residual);
    }
    if (rep.residual <= tol) return rep;
    fail("conjugate gradient did not converge", rep);
}

SolveReport solve_bicgstab(const SparseMat& A, const Eigen::VectorXd& b,
                           Eigen::VectorXd& x, double tol, int max_iter,
                           Precond precond) {
    SolveReport rep;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero(A.rows());
        return rep;
    }
    if (x.size() != A.rows()) x.setZero(A.rows());
    const Preconditioner M(A, precond);

    Eigen::VectorXd r = b - A * x;
    Eigen::VectorXd r0 = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(A.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(A.rows());
    Eigen::VectorXd ph(A.rows()), sh(A.rows());
    rep.residual = r.norm() / bnorm;
    rep.residual_history.push_back(rep.residual);

    const double eps = std::numeric_limits<double>::epsilon();
    for (int it = 0; it < max_iter; ++it) {
        if (rep.residual <= tol) return rep;
        double rho_new = r0.dot(r);
        if (!std::isfinite(rho_new)) fail("BiCGSTAB produced non-finite rho", rep);
        if (std::abs(rho_new) < eps * eps * bnorm * bnorm) {
            // r0 has drifted orthogonal to r: restart with the current
            // residual as the shadow vector
            r0 = r;
            rho_new = r.squaredNorm();
            if (rho_new == 0.0) return rep;
            p.setZero();
            v.setZero();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p = r + beta * (p - omega * v);
        M.apply(p, ph);
        v = A * ph;
        const double r0v = r0.dot(v);
        if (r0v == 0.0 || !std::isfinite(r0v)) {
            fail("BiCGSTAB broke down (r0.v = 0)", rep);
        }
        alpha = rho / r0v;
        const Eigen::VectorXd s = r - alpha * v;
        if (s.norm() / bnorm <= tol) {
            x += alpha * ph;
            rep.iterations = it + 1;
            rep.residual = s.norm() / bnorm;
            rep.residual_history.push_back(rep.residual);
            return rep;
        }
        M.apply(s, sh);
        const Eigen::VectorXd t = A * sh;
        const double tt = t.dot(t);
        if (tt == 0.0) fail("BiCGSTAB broke down (t = 0)", rep);
        omega = t.dot(s) / tt;
        x += alpha * ph + omega * sh;
        r = s - omega * t;
        rep.iterations = it + 1;
        rep.residual = r.norm() / bnorm;
        rep.residual_history.push_back(rep.residual);
        if (!std::isfinite(rep.residual)) {
            fail("BiCGSTAB produced a non-finite residual", rep);
        }
        if (omega == 0.0) fail("BiCGSTAB broke down (omega = 0)", rep);
    }
    if (rep.residual <= tol) return rep;
    fail("BiCGSTAB did not converge", rep);
}

} // namespace romforge
