#include <gtest/gtest.h>

#include "romforge/linear.hpp"
#include "romforge/rng.hpp"

using namespace romforge;

namespace {

// SPD tridiagonal test matrix
SparseMat laplacian_1d(int n) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) {
        trip.emplace_back(i, i, 2.0);
        if (i > 0) trip.emplace_back(i, i - 1, -1.0);
        if (i + 1 < n) trip.emplace_back(i, i + 1, -1.0);
    }
    SparseMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

} // namespace

TEST(ConjugateGradient, SolvesSpdSystem) {
    const int n = 200;
    const SparseMat A = laplacian_1d(n);
    Rng rng(1);
    Eigen::VectorXd x_ref(n);
    for (int i = 0; i < n; ++i) x_ref[i] = rng.uniform(-1, 1);
    const Eigen::VectorXd b = A * x_ref;
    Eigen::VectorXd x;
    const SolveReport rep = solve_cg(A, b, x, 1e-12, 2000);
    EXPECT_LE((x - x_ref).norm(), 1e-8 * x_ref.norm());
    EXPECT_LE(rep.residual, 1e-12);
    EXPECT_EQ(rep.residual_history.size(), static_cast<std::size_t>(rep.iterations) + 1);
}

TEST(ConjugateGradient, ZeroRhsGivesZero) {
    const SparseMat A = laplacian_1d(10);
    Eigen::VectorXd x;
    const SolveReport rep = solve_cg(A, Eigen::VectorXd::Zero(10), x, 1e-12, 100);
    EXPECT_EQ(rep.iterations, 0);
    EXPECT_EQ(x.norm(), 0.0);
}

TEST(ConjugateGradient, FailureCarriesResidualHistory) {
    const SparseMat A = laplacian_1d(400);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(400);
    Eigen::VectorXd x;
    try {
        // Jacobi makes the solve slow enough to hit the iteration cap
        solve_cg(A, b, x, 1e-14, 3, Precond::Jacobi);
        FAIL() << "expected SolverFailureError";
    } catch (const SolverFailureError& e) {
        // one entry per attempted iteration plus the initial residual
        EXPECT_EQ(e.residual_history.size(), 4u);
        for (double r : e.residual_history) EXPECT_TRUE(std::isfinite(r));
    }
}

TEST(Ilu0, ExactForTridiagonalSystems) {
    const SparseMat A = laplacian_1d(300);
    Rng rng(4);
    Eigen::VectorXd x_ref(300);
    for (int i = 0; i < 300; ++i) x_ref[i] = rng.uniform(-1, 1);
    const Eigen::VectorXd b = A * x_ref;
    Eigen::VectorXd x;
    // zero fill-in is exact on a tridiagonal pattern
    const SolveReport rep = solve_cg(A, b, x, 1e-12, 50, Precond::Ilu0);
    EXPECT_LE(rep.iterations, 2);
    EXPECT_LE((x - x_ref).norm(), 1e-9 * x_ref.norm());
}

TEST(BiCgStab, SolvesNonsymmetricSystem) {
    const int n = 150;
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) {
        trip.emplace_back(i, i, 3.0);
        if (i > 0) trip.emplace_back(i, i - 1, -1.4); // skewed off-diagonals
        if (i + 1 < n) trip.emplace_back(i, i + 1, -0.6);
    }
    SparseMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    Rng rng(2);
    Eigen::VectorXd x_ref(n);
    for (int i = 0; i < n; ++i) x_ref[i] = rng.uniform(-1, 1);
    const Eigen::VectorXd b = A * x_ref;
    Eigen::VectorXd x;
    const SolveReport rep = solve_bicgstab(A, b, x, 1e-12, 2000);
    EXPECT_LE((x - x_ref).norm(), 1e-9 * x_ref.norm());
    EXPECT_LE(rep.residual, 1e-12);
}

TEST(BiCgStab, WarmStartIsAccepted) {
    const SparseMat A = laplacian_1d(50);
    Rng rng(3);
    Eigen::VectorXd x_ref(50);
    for (int i = 0; i < 50; ++i) x_ref[i] = rng.uniform(-1, 1);
    const Eigen::VectorXd b = A * x_ref;
    Eigen::VectorXd x = x_ref; // exact initial guess
    const SolveReport rep = solve_bicgstab(A, b, x, 1e-12, 100);
    EXPECT_LE(rep.iterations, 1);
    EXPECT_LE((x - x_ref).norm(), 1e-10);
}
