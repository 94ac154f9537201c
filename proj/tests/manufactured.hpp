// Manufactured problems shared by the solver tests and the acceptance
// suite: a decaying vortex (Taylor-Green) for temporal order and steady
// Poiseuille flow for profile/WSS verification.
#ifndef ROMFORGE_TESTS_MANUFACTURED_HPP
#define ROMFORGE_TESTS_MANUFACTURED_HPP

#include <cmath>

#include "romforge/fv.hpp"

namespace romforge::mms {

/// Decaying vortex on [0,1]^2 with all-Neumann-compatible pressure:
///   u =  -cos(2 pi x) sin(2 pi y) F(t)
///   v =   sin(2 pi x) cos(2 pi y) F(t)
///   p = -1/4 (cos(4 pi x) + cos(4 pi y)) F(t)^2,  F = exp(-8 pi^2 nu t)
struct DecayingVortex {
    double nu = 0.005;

    double amplitude(double t) const {
        return std::exp(-8.0 * M_PI * M_PI * nu * t);
    }
    Vec2 velocity(const Vec2& x, double t) const {
        const double k = 2.0 * M_PI;
        return amplitude(t) * Vec2(-std::cos(k * x.x()) * std::sin(k * x.y()),
                                   std::sin(k * x.x()) * std::cos(k * x.y()));
    }
    double pressure(const Vec2& x, double t) const {
        const double k = 4.0 * M_PI;
        const double F = amplitude(t);
        return -0.25 * (std::cos(k * x.x()) + std::cos(k * x.y())) * F * F;
    }

    FlowState exact_state(const StructuredMesh& mesh, double t) const {
        FlowState s = make_quiescent_state(mesh, t);
        for (int c = 0; c < mesh.n_cells(); ++c) {
            s.u.set_vec(c, velocity(mesh.cell_centers[c], t));
            s.p.values[c] = pressure(mesh.cell_centers[c], t);
        }
        for (int f = 0; f < mesh.n_faces(); ++f) {
            s.face_flux[f] =
                velocity(mesh.faces[f].center, t).dot(mesh.faces[f].area);
        }
        return s;
    }

    BoundaryConditions boundary_conditions(const StructuredMesh& mesh,
                                           double t) const {
        BoundaryConditions bcs(mesh.n_faces());
        for (int f = 0; f < mesh.n_faces(); ++f) {
            if (mesh.faces[f].neighbour >= 0) continue;
            bcs[f].ukind = VelocityBcKind::Dirichlet;
            bcs[f].uvalue = velocity(mesh.faces[f].center, t);
            bcs[f].pkind = PressureBcKind::ZeroGradient;
        }
        return bcs;
    }

    /// March from the exact initial state to t_final; returns the final
    /// state. The first step bootstraps with implicit Euler.
    FlowState run(const StructuredMesh& mesh, double dt, double t_final,
                  double div_tol = 1e-8) const {
        SolverConfig cfg;
        cfg.nu = nu;
        cfg.dt = dt;
        cfg.T = t_final;
        cfg.n_cycles = 1;
        cfg.piso_correctors = 2;
        cfg.linear_tol = 1e-12;
        cfg.div_tol = div_tol;
        cfg.pressure_ref = PressureRef::PinCell;
        cfg.pin_cell = 0;
        const FvSolver solver(mesh, cfg);
        FlowState prev = exact_state(mesh, 0.0);
        FlowState curr = prev;
        const int steps = static_cast<int>(std::lround(t_final / dt));
        for (int k = 1; k <= steps; ++k) {
            const double t = k * dt;
            const BoundaryConditions bcs = boundary_conditions(mesh, t);
            FlowState next = solver.step(curr, prev, t, k == 1, &bcs);
            prev = std::move(curr);
            curr = std::move(next);
        }
        return curr;
    }
};

/// Observed order via a Richardson triplet on one mesh: errors between
/// successive refinements of dt isolate the temporal error.
inline double observed_temporal_order(const StructuredMesh& mesh,
                                      const DecayingVortex& tg, double dt,
                                      double t_final) {
    const FlowState a = tg.run(mesh, dt, t_final);
    const FlowState b = tg.run(mesh, dt / 2, t_final);
    const FlowState c = tg.run(mesh, dt / 4, t_final);
    Field ab = a.u;
    ab.values -= b.u.values;
    Field bc = b.u;
    bc.values -= c.u.values;
    const double e_ab = l2_norm(ab, mesh);
    const double e_bc = l2_norm(bc, mesh);
    return std::log2(e_ab / e_bc);
}

/// Steady Poiseuille channel: constant-rate parabolic inflow marched to
/// steady state from a slightly perturbed exact profile. The time step
/// must respect the PISO stability envelope (nu dt / dy^2 of order one).
struct PoiseuilleCase {
    double length = 1.0;
    double height = 0.2;
    double nu = 0.004;
    double rate = 0.01; // m^3/s per unit depth

    double centerline_speed() const { return 1.5 * rate / height; }

    SolverConfig config(double dt, double t_end) const {
        SolverConfig cfg;
        cfg.nu = nu;
        cfg.dt = dt;
        cfg.T = t_end;
        cfg.n_cycles = 1;
        cfg.waveform.t = {0.0, t_end};
        cfg.waveform.q = {rate, rate};
        cfg.waveform.f = 1.0;
        cfg.inlet_profile = InletProfile::Parabolic;
        cfg.pressure_ref = PressureRef::OutletPatch;
        return cfg;
    }

    Vec2 exact_velocity(const Vec2& x) const {
        const double h = height / 2;
        const double eta = (x.y() - h) / h;
        return Vec2(centerline_speed() * (1.0 - eta * eta), 0.0);
    }

    /// March to steady state; returns the final state.
    FlowState run(const StructuredMesh& mesh, double dt, double t_end) const {
        const SolverConfig cfg = config(dt, t_end);
        const FvSolver solver(mesh, cfg);
        FlowState prev = make_quiescent_state(mesh);
        // warm start from a perturbed exact profile to cut the transient
        for (int c = 0; c < mesh.n_cells(); ++c) {
            prev.u.set_vec(c, 1.05 * exact_velocity(mesh.cell_centers[c]));
        }
        for (int f = 0; f < mesh.n_faces(); ++f) {
            prev.face_flux[f] =
                1.05 * exact_velocity(mesh.faces[f].center).dot(mesh.faces[f].area);
        }
        FlowState curr = prev;
        const int steps = static_cast<int>(std::lround(t_end / dt));
        for (int k = 1; k <= steps; ++k) {
            FlowState next = solver.step(curr, prev, k * dt, k == 1);
            prev = std::move(curr);
            curr = std::move(next);
        }
        return curr;
    }
};

} // namespace romforge::mms

#endif
