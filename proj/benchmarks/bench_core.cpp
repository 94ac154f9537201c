#include <benchmark/benchmark.h>

#include "romforge/ffd.hpp"
#include "romforge/fv.hpp"
#include "romforge/mlp.hpp"
#include "romforge/pod.hpp"
#include "romforge/rng.hpp"

using namespace romforge;

namespace {

FfdLattice stenosed_lattice() {
    FfdLattice lat = make_channel_lattice(0.5, 0.3, 0.2);
    StenosisSpec spec;
    spec.severity = 0.7;
    spec.center_x = 0.5;
    spec.extent = 0.3;
    return apply_stenosis(lat, spec);
}

} // namespace

static void BsplineBasisEval(benchmark::State& state) {
    const int degree = static_cast<int>(state.range(0));
    const auto knots = clamped_uniform_knots(degree + 6, degree);
    Rng rng(1);
    std::vector<double> us(1024);
    for (auto& u : us) u = rng.uniform();
    std::size_t i = 0;
    for (auto _ : state) {
        const BasisEval be = bspline_basis(us[i++ & 1023], degree, knots);
        benchmark::DoNotOptimize(be.values.data());
    }
}
BENCHMARK(BsplineBasisEval)->Arg(1)->Arg(2)->Arg(3);

static void DeformMeshVertices(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const StructuredMesh mesh = build_channel_mesh(1.0, 0.2, n, n / 2);
    const FfdLattice lat = stenosed_lattice();
    Eigen::MatrixXd pts(2, mesh.n_vertices());
    for (int v = 0; v < mesh.n_vertices(); ++v) pts.col(v) = mesh.vertices[v];
    for (auto _ : state) {
        const Eigen::MatrixXd moved = deform_points(lat, pts);
        benchmark::DoNotOptimize(moved.data());
    }
    state.SetItemsProcessed(state.iterations() * mesh.n_vertices());
}
BENCHMARK(DeformMeshVertices)->Arg(32)->Arg(64);

static void PodProjectReconstruct(benchmark::State& state) {
    const int n_dof = static_cast<int>(state.range(0));
    Rng rng(2);
    SnapshotMatrix S;
    S.variable = RomVariable::Velocity;
    S.data.resize(n_dof, 50);
    for (int j = 0; j < 50; ++j) {
        for (int i = 0; i < n_dof; ++i) S.data(i, j) = rng.normal();
    }
    S.times.resize(50);
    for (int j = 0; j < 50; ++j) S.times[j] = 0.016 * (j + 1);
    PodBasis basis = truncate(compute_pod(S), 0.99);
    Eigen::VectorXd x = S.data.col(7);
    for (auto _ : state) {
        const Eigen::VectorXd y = reconstruct(basis, project(basis, x));
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(PodProjectReconstruct)->Arg(4096)->Arg(16384);

static void MlpForward(benchmark::State& state) {
    const int width = static_cast<int>(state.range(0));
    const MlpModel model =
        init_mlp({1, width, width, width, 16}, Activation::Tanh, 3);
    Eigen::VectorXd t(1);
    t << 0.4;
    for (auto _ : state) {
        const Eigen::VectorXd y = model.forward(t);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(MlpForward)->Arg(100)->Arg(200);

static void FomStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const StructuredMesh mesh = build_channel_mesh(1.0, 0.2, n, n / 2);
    SolverConfig cfg;
    cfg.dt = 0.002;
    const FvSolver solver(mesh, cfg);
    FlowState prev = make_quiescent_state(mesh);
    FlowState curr = solver.step(prev, prev, cfg.dt, true);
    int step = 1;
    for (auto _ : state) {
        ++step;
        FlowState next = solver.step(curr, prev, step * cfg.dt, false);
        prev = std::move(curr);
        curr = std::move(next);
        benchmark::DoNotOptimize(curr.u.values.data());
    }
}
BENCHMARK(FomStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
