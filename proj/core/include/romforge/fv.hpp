#ifndef ROMFORGE_FV_HPP
#define ROMFORGE_FV_HPP

#include <functional>
#include <string>
#include <vector>

#include "romforge/field.hpp"
#include "romforge/linear.hpp"
#include "romforge/mesh.hpp"
#include "romforge/waveform.hpp"

namespace romforge {

enum class VelocityBcKind { Dirichlet, ZeroGradient };
enum class PressureBcKind { ZeroGradient, FixedValue };

/// Boundary data for one boundary face.
struct FaceBc {
    VelocityBcKind ukind = VelocityBcKind::Dirichlet;
    Vec2 uvalue = Vec2::Zero();
    PressureBcKind pkind = PressureBcKind::ZeroGradient;
    double pvalue = 0.0;
};

/// Indexed by face id; only boundary entries are meaningful.
using BoundaryConditions = std::vector<FaceBc>;

enum class InletProfile { Parabolic, Uniform };

/// How the pressure level is fixed.
///   OutletPatch: fixed reference value on every outlet face (default).
///   OutletFace:  fixed reference value on a single outlet face,
///                zero gradient on the rest.
///   PinCell:     all-Neumann plus normalization p[pin_cell] = 0.
///   None:        all-Neumann; solving then raises ConfigError.
enum class PressureRef { OutletPatch, OutletFace, PinCell, None };

struct SolverConfig {
    double nu = 0.004;   // kinematic viscosity, m^2/s
    double dt = 0.002;   // s
    double T = 0.8;      // cycle period, s
    int n_cycles = 2;    // warm-up cycles + one sampled final cycle
    int piso_correctors = 2;
    double linear_tol = 1e-10;
    double div_tol = 1e-8;
    int max_linear_iter = 5000;
    WaveformBc waveform = default_pulse_waveform();
    InletProfile inlet_profile = InletProfile::Parabolic;
    PressureRef pressure_ref = PressureRef::OutletPatch;
    int pin_cell = 0; // used when pressure_ref == PinCell
    int snapshots_per_cycle = 100;

    void validate() const;
    int steps_per_cycle() const;
};

struct FlowState {
    Field u;                   // Vector2, cell velocities (m/s)
    Field p;                   // Scalar, kinematic pressure (m^2/s^2)
    Eigen::VectorXd face_flux; // phi_j = u_j . A_j per face, signed along the
                               // face-area vector (m^3/s per unit depth)
    double time = 0.0;
};

FlowState make_quiescent_state(const StructuredMesh& mesh, double time = 0.0);

/// Channel boundary conditions at time t: inlet Dirichlet profile
/// integrating (discretely, exactly) to inflow_rate(waveform, t), no-slip
/// walls, outlet zero-gradient velocity with the pressure reference from
/// `cfg.pressure_ref`.
BoundaryConditions make_channel_bcs(const StructuredMesh& mesh,
                                    const SolverConfig& cfg, double t);

/// Per-volume transport operator for one velocity component:
///   time_coeff*u + (1/V) sum_j phi_j u_j - (nu/V) sum_j |A_j|(u_N-u_P)/|d|
/// with central face interpolation and two-point gradients. Both
/// components share the matrix; rhs_x/rhs_y carry the boundary terms.
struct MomentumSystem {
    SparseMat A;
    Eigen::VectorXd rhs_x;
    Eigen::VectorXd rhs_y;
};
MomentumSystem assemble_transport(const StructuredMesh& mesh,
                                  const Eigen::VectorXd& face_flux, double nu,
                                  double time_coeff,
                                  const BoundaryConditions& bcs);

/// Gauss cell gradient of a scalar with boundary values from `bcs`
/// (FixedValue uses pvalue, ZeroGradient extrapolates the owner value).
Eigen::Matrix2Xd gauss_gradient(const StructuredMesh& mesh,
                                const Eigen::VectorXd& p,
                                const BoundaryConditions& bcs);

/// Variable-coefficient Poisson solve in negative-Laplacian form,
///   sum_j c_j (p_P - p_N) = rhs_P   with c_j = coeff_f |A_j| / |d|,
/// i.e. rhs = f*V for -lap(p) = f; `face_coeff` holds coeff_f per face.
/// Boundary faces follow the pressure kinds in `bcs`. With no Dirichlet
/// face the system is singular: PressureRef::PinCell solves it in the
/// zero-mean range and normalizes p[pin_cell] = 0, anything else raises
/// ConfigError. Returns the pressure; `report` carries CG statistics.
Eigen::VectorXd solve_poisson(const StructuredMesh& mesh,
                              const Eigen::VectorXd& face_coeff,
                              const Eigen::VectorXd& rhs,
                              const BoundaryConditions& bcs,
                              PressureRef pressure_ref, int pin_cell,
                              double tol, int max_iter, SolveReport* report);

/// Wall traction tau . n with tau = nu (grad u + grad u^T), one-sided
/// two-point gradient at the wall. `wall_velocity` overrides the no-slip
/// wall value (used for testing; default zero).
WssField compute_wss(const StructuredMesh& mesh, const Field& u, double nu,
                     const std::function<Vec2(int face)>* wall_velocity = nullptr);

/// Max over cells of |sum of signed face fluxes| (discrete divergence).
double max_cell_divergence(const StructuredMesh& mesh,
                           const Eigen::VectorXd& face_flux);

/// Net flux through a patch along the outward normal.
double patch_flux(const StructuredMesh& mesh, const std::vector<int>& patch,
                  const Eigen::VectorXd& face_flux);

/// Incompressible Navier-Stokes integrator: BDF2 in time (implicit-Euler
/// bootstrap on the first step), second-order central FV in space, PISO
/// pressure-velocity coupling with the convecting flux frozen at the old
/// time level.
class FvSolver {
public:
    FvSolver(const StructuredMesh& mesh, SolverConfig cfg);

    const StructuredMesh& mesh() const { return mesh_; }
    const SolverConfig& config() const { return cfg_; }

    /// One implicit step to t_np1. `state_nm1` may equal `state_n` on the
    /// first step; `bootstrap` switches BDF2 to implicit Euler.
    FlowState step(const FlowState& state_n, const FlowState& state_nm1,
                   double t_np1, bool bootstrap,
                   const BoundaryConditions* bcs_override = nullptr) const;

    /// Run `piso_correctors` corrector sweeps on an assembled predictor.
    /// `b_*` are the full per-volume sources, `b_time_*` their time-source
    /// parts, and `flux_time` the same time source built from the old
    /// face fluxes; the flux predictor uses the latter so the Rhie-Chow
    /// interpolation stays consistent with the divergence-free flux
    /// history. Exposed pieces of `step` for verification; `correctors`
    /// must be >= 1 or a precondition violation is raised.
    FlowState piso_correct(const MomentumSystem& sys,
                           const Eigen::VectorXd& b_x,
                           const Eigen::VectorXd& b_y,
                           const Eigen::VectorXd& b_time_x,
                           const Eigen::VectorXd& b_time_y,
                           const Eigen::VectorXd& flux_time, Eigen::VectorXd ux,
                           Eigen::VectorXd uy, const BoundaryConditions& bcs,
                           int correctors, double t_np1) const;

private:
    const StructuredMesh& mesh_;
    SolverConfig cfg_;
};

/// One snapshot row of the run manifest.
struct SnapshotRecord {
    int index = 0;
    double time = 0.0;
    std::string path_u;
    std::string path_p;
    std::string path_wss;
};

using SnapshotSink =
    std::function<void(const FlowState& state, const WssField& wss, int index)>;

/// Advance cfg.n_cycles cycles from rest and emit cfg.snapshots_per_cycle
/// equispaced snapshots over the final cycle, at times
/// t = t_warmup + k*T/N for k = 1..N.
void run_cycles(const StructuredMesh& mesh, const SolverConfig& cfg,
                const SnapshotSink& sink);

/// File-emitting variant: binary fields under `out_dir` plus
/// `manifest.csv` with rows `index,time,path_u,path_p,path_wss`.
std::vector<SnapshotRecord> run_cycles_to_dir(const StructuredMesh& mesh,
                                              const SolverConfig& cfg,
                                              const std::string& out_dir);

/// Parse a manifest written by run_cycles_to_dir.
std::vector<SnapshotRecord> read_snapshot_manifest(const std::string& path);

} // namespace romforge

#endif
