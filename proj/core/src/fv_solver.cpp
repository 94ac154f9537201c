#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "romforge/field_io.hpp"
#include "romforge/fv.hpp"

namespace romforge {

FvSolver::FvSolver(const StructuredMesh& mesh, SolverConfig cfg)
    : mesh_(mesh), cfg_(std::move(cfg)) {
    cfg_.validate();
}

FlowState FvSolver::step(const FlowState& state_n, const FlowState& state_nm1,
                         double t_np1, bool bootstrap,
                         const BoundaryConditions* bcs_override) const {
    const BoundaryConditions bcs =
        bcs_override ? *bcs_override : make_channel_bcs(mesh_, cfg_, t_np1);
    const double dt = cfg_.dt;
    const double ct = bootstrap ? 1.0 / dt : 1.5 / dt;

    MomentumSystem sys =
        assemble_transport(mesh_, state_n.face_flux, cfg_.nu, ct, bcs);

    // time source: (4u^n - u^{n-1})/(2 dt) for BDF2, u^n/dt for the
    // implicit-Euler bootstrap; the same combination of old face fluxes
    // feeds the Rhie-Chow flux predictor
    const int n = mesh_.n_cells();
    Eigen::VectorXd b_time_x(n), b_time_y(n);
    for (int c = 0; c < n; ++c) {
        if (bootstrap) {
            b_time_x[c] = state_n.u.values[2 * c] / dt;
            b_time_y[c] = state_n.u.values[2 * c + 1] / dt;
        } else {
            b_time_x[c] =
                (4.0 * state_n.u.values[2 * c] - state_nm1.u.values[2 * c]) /
                (2.0 * dt);
            b_time_y[c] = (4.0 * state_n.u.values[2 * c + 1] -
                           state_nm1.u.values[2 * c + 1]) /
                          (2.0 * dt);
        }
    }
    Eigen::VectorXd flux_time(mesh_.n_faces());
    for (int f = 0; f < mesh_.n_faces(); ++f) {
        flux_time[f] = bootstrap ? state_n.face_flux[f] / dt
                                 : (4.0 * state_n.face_flux[f] -
                                    state_nm1.face_flux[f]) /
                                       (2.0 * dt);
    }
    const Eigen::VectorXd b_x = sys.rhs_x + b_time_x;
    const Eigen::VectorXd b_y = sys.rhs_y + b_time_y;

    // momentum predictor with the old-time pressure gradient
    const Eigen::Matrix2Xd grad_p = gauss_gradient(mesh_, state_n.p.values, bcs);
    Eigen::VectorXd ux(n), uy(n);
    for (int c = 0; c < n; ++c) {
        ux[c] = state_n.u.values[2 * c];
        uy[c] = state_n.u.values[2 * c + 1];
    }
    const Eigen::VectorXd rx = b_x - grad_p.row(0).transpose();
    const Eigen::VectorXd ry = b_y - grad_p.row(1).transpose();
    try {
        solve_bicgstab(sys.A, rx, ux, cfg_.linear_tol, cfg_.max_linear_iter);
        solve_bicgstab(sys.A, ry, uy, cfg_.linear_tol, cfg_.max_linear_iter);
    } catch (SolverFailureError& e) {
        throw SolverFailureError("momentum predictor at t = " +
                                     std::to_string(t_np1) + ": " + e.what(),
                                 std::move(e.residual_history));
    }

    return piso_correct(sys, b_x, b_y, b_time_x, b_time_y, flux_time,
                        std::move(ux), std::move(uy), bcs,
                        cfg_.piso_correctors, t_np1);
}

FlowState FvSolver::piso_correct(const MomentumSystem& sys,
                                 const Eigen::VectorXd& b_x,
                                 const Eigen::VectorXd& b_y,
                                 const Eigen::VectorXd& b_time_x,
                                 const Eigen::VectorXd& b_time_y,
                                 const Eigen::VectorXd& flux_time,
                                 Eigen::VectorXd ux, Eigen::VectorXd uy,
                                 const BoundaryConditions& bcs, int correctors,
                                 double t_np1) const {
    if (correctors < 1) {
        throw InvalidArgumentError("piso_correct requires at least one corrector");
    }
    const int n = mesh_.n_cells();
    const int nf = mesh_.n_faces();
    const Eigen::VectorXd diag = sys.A.diagonal();
    const Eigen::VectorXd rAU = diag.cwiseInverse();

    // face interpolation of 1/a_P; fixed within the step
    Eigen::VectorXd face_coeff(nf);
    for (int fid = 0; fid < nf; ++fid) {
        const Face& f = mesh_.faces[fid];
        face_coeff[fid] = f.neighbour >= 0
                              ? 0.5 * (rAU[f.owner] + rAU[f.neighbour])
                              : rAU[f.owner];
    }

    Eigen::VectorXd p(n);
    Eigen::VectorXd flux(nf);
    for (int k = 0; k < correctors; ++k) {
        // H(u)/a_P from the latest velocities
        Eigen::VectorXd hx = b_x - sys.A * ux + diag.cwiseProduct(ux);
        Eigen::VectorXd hy = b_y - sys.A * uy + diag.cwiseProduct(uy);
        hx = hx.cwiseProduct(rAU);
        hy = hy.cwiseProduct(rAU);
        // spatial part only; the flux predictor re-adds the time source
        // built from the old face fluxes
        const Eigen::VectorXd hsx = hx - rAU.cwiseProduct(b_time_x);
        const Eigen::VectorXd hsy = hy - rAU.cwiseProduct(b_time_y);

        Eigen::VectorXd flux_star(nf);
        for (int fid = 0; fid < nf; ++fid) {
            const Face& f = mesh_.faces[fid];
            if (f.neighbour >= 0) {
                const Vec2 hf(0.5 * (hsx[f.owner] + hsx[f.neighbour]),
                              0.5 * (hsy[f.owner] + hsy[f.neighbour]));
                flux_star[fid] = hf.dot(f.area) + face_coeff[fid] * flux_time[fid];
            } else if (bcs[fid].ukind == VelocityBcKind::Dirichlet) {
                flux_star[fid] = bcs[fid].uvalue.dot(f.area);
            } else {
                flux_star[fid] = Vec2(hsx[f.owner], hsy[f.owner]).dot(f.area) +
                                 rAU[f.owner] * flux_time[fid];
            }
        }

        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        for (int fid = 0; fid < nf; ++fid) {
            const Face& f = mesh_.faces[fid];
            rhs[f.owner] -= flux_star[fid];
            if (f.neighbour >= 0) rhs[f.neighbour] += flux_star[fid];
        }

        SolveReport rep;
        try {
            p = solve_poisson(mesh_, face_coeff, rhs, bcs, cfg_.pressure_ref,
                              cfg_.pin_cell, cfg_.linear_tol, cfg_.max_linear_iter,
                              &rep);
        } catch (SolverFailureError& e) {
            throw SolverFailureError("pressure corrector at t = " +
                                         std::to_string(t_np1) + ": " + e.what(),
                                     std::move(e.residual_history));
        }

        // conservative flux and velocity corrections
        for (int fid = 0; fid < nf; ++fid) {
            const Face& f = mesh_.faces[fid];
            if (f.neighbour >= 0) {
                const double dist =
                    (mesh_.cell_centers[f.neighbour] - mesh_.cell_centers[f.owner])
                        .norm();
                const double c = face_coeff[fid] * f.area.norm() / dist;
                flux[fid] = flux_star[fid] - c * (p[f.neighbour] - p[f.owner]);
            } else if (bcs[fid].pkind == PressureBcKind::FixedValue) {
                const double dist =
                    (f.center - mesh_.cell_centers[f.owner]).norm();
                const double c = face_coeff[fid] * f.area.norm() / dist;
                flux[fid] = flux_star[fid] - c * (bcs[fid].pvalue - p[f.owner]);
            } else {
                flux[fid] = flux_star[fid];
            }
        }
        const Eigen::Matrix2Xd grad_p = gauss_gradient(mesh_, p, bcs);
        ux = hx - rAU.cwiseProduct(grad_p.row(0).transpose());
        uy = hy - rAU.cwiseProduct(grad_p.row(1).transpose());
    }

    const double div = max_cell_divergence(mesh_, flux);
    if (!(div <= cfg_.div_tol)) {
        throw StepFailureError("divergence " + std::to_string(div) +
                                   " above div_tol after " +
                                   std::to_string(correctors) + " correctors",
                               t_np1);
    }

    FlowState out;
    out.time = t_np1;
    out.u = Field::zeros(FieldKind::Vector2, mesh_, t_np1);
    out.p = Field::zeros(FieldKind::Scalar, mesh_, t_np1);
    for (int c = 0; c < n; ++c) {
        out.u.values[2 * c] = ux[c];
        out.u.values[2 * c + 1] = uy[c];
        out.p.values[c] = p[c];
    }
    out.face_flux = std::move(flux);
    if (!out.u.all_finite() || !out.p.all_finite()) {
        throw StepFailureError("non-finite state after PISO step", t_np1);
    }
    return out;
}

void run_cycles(const StructuredMesh& mesh, const SolverConfig& cfg,
                const SnapshotSink& sink) {
    cfg.validate();
    const int spc = cfg.steps_per_cycle();
    if (spc % cfg.snapshots_per_cycle != 0) {
        throw InvalidArgumentError(
            "snapshots_per_cycle must divide the steps per cycle");
    }
    const int stride = spc / cfg.snapshots_per_cycle;
    const int total = cfg.n_cycles * spc;
    const int sample_start = (cfg.n_cycles - 1) * spc;

    FvSolver solver(mesh, cfg);
    FlowState prev = make_quiescent_state(mesh);
    FlowState curr = prev;
    int index = 0;
    for (int step = 1; step <= total; ++step) {
        const double t = step * cfg.dt;
        FlowState next = solver.step(curr, prev, t, step == 1);
        prev = std::move(curr);
        curr = std::move(next);
        if (step > sample_start && (step - sample_start) % stride == 0) {
            // snapshots are stamped with cycle-local time in (0, T]
            const double tau = (step - sample_start) * cfg.dt;
            FlowState snap = curr;
            snap.time = tau;
            snap.u.time = tau;
            snap.p.time = tau;
            WssField wss = compute_wss(mesh, snap.u, cfg.nu);
            wss.time = tau;
            sink(snap, wss, index);
            ++index;
        }
    }
}

std::vector<SnapshotRecord> run_cycles_to_dir(const StructuredMesh& mesh,
                                              const SolverConfig& cfg,
                                              const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<SnapshotRecord> records;
    run_cycles(mesh, cfg, [&](const FlowState& s, const WssField& wss, int idx) {
        char tag[16];
        std::snprintf(tag, sizeof(tag), "%04d", idx);
        SnapshotRecord rec;
        rec.index = idx;
        rec.time = s.time;
        rec.path_u = out_dir + "/snap_u_" + tag + ".bin";
        rec.path_p = out_dir + "/snap_p_" + tag + ".bin";
        rec.path_wss = out_dir + "/snap_wss_" + tag + ".bin";
        write_field(rec.path_u, s.u);
        write_field(rec.path_p, s.p);
        write_field(rec.path_wss, wss.as_field());
        records.push_back(std::move(rec));
    });

    std::ofstream man(out_dir + "/manifest.csv");
    if (!man) throw IoError("cannot write snapshot manifest in " + out_dir);
    man.precision(17);
    man << "index,time,path_u,path_p,path_wss\n";
    for (const auto& r : records) {
        man << r.index << "," << r.time << "," << r.path_u << "," << r.path_p
            << "," << r.path_wss << "\n";
    }
    return records;
}

std::vector<SnapshotRecord> read_snapshot_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open snapshot manifest: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "index,time,path_u,path_p,path_wss") {
        throw IoError("malformed snapshot manifest header: " + path);
    }
    std::vector<SnapshotRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        SnapshotRecord r;
        std::string tok;
        if (!std::getline(ss, tok, ',')) throw IoError("bad manifest row: " + line);
        r.index = std::stoi(tok);
        if (!std::getline(ss, tok, ',')) throw IoError("bad manifest row: " + line);
        r.time = std::stod(tok);
        if (!std::getline(ss, r.path_u, ',') || !std::getline(ss, r.path_p, ',') ||
            !std::getline(ss, r.path_wss, ',')) {
            throw IoError("bad manifest row: " + line);
        }
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace romforge
