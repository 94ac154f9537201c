#include <cmath>

#include "romforge/fv.hpp"

namespace romforge {

void SolverConfig::validate() const {
    if (!(dt > 0.0)) throw InvalidArgumentError("dt must be positive");
    if (!(nu > 0.0)) throw InvalidArgumentError("nu must be positive");
    if (!(T > 0.0)) throw InvalidArgumentError("cycle period must be positive");
    if (piso_correctors < 2) {
        throw InvalidArgumentError("piso_correctors must be >= 2");
    }
    if (n_cycles < 1) throw InvalidArgumentError("n_cycles must be >= 1");
    const double steps = T / dt;
    if (std::abs(steps - std::round(steps)) > 1e-8 * steps) {
        throw InvalidArgumentError("T/dt must be integral within rounding");
    }
    if (snapshots_per_cycle < 1) {
        throw InvalidArgumentError("snapshots_per_cycle must be >= 1");
    }
    waveform.validate();
}

int SolverConfig::steps_per_cycle() const {
    return static_cast<int>(std::lround(T / dt));
}

FlowState make_quiescent_state(const StructuredMesh& mesh, double time) {
    FlowState s;
    s.u = Field::zeros(FieldKind::Vector2, mesh, time);
    s.p = Field::zeros(FieldKind::Scalar, mesh, time);
    s.face_flux = Eigen::VectorXd::Zero(mesh.n_faces());
    s.time = time;
    return s;
}

BoundaryConditions make_channel_bcs(const StructuredMesh& mesh,
                                    const SolverConfig& cfg, double t) {
    BoundaryConditions bcs(mesh.n_faces());
    const double q = inflow_rate(cfg.waveform, t);

    // inlet span from the vertex extremes of the inlet patch
    double y_lo = 1e300, y_hi = -1e300;
    for (int fid : mesh.inlet) {
        const Face& f = mesh.faces[fid];
        y_lo = std::min({y_lo, mesh.vertices[f.va].y(), mesh.vertices[f.vb].y()});
        y_hi = std::max({y_hi, mesh.vertices[f.va].y(), mesh.vertices[f.vb].y()});
    }
    const double span = y_hi - y_lo;

    // raw profile, then discrete renormalization so the face fluxes sum
    // exactly to q
    double q_raw = 0.0;
    std::vector<double> speed(mesh.inlet.size(), 0.0);
    for (std::size_t k = 0; k < mesh.inlet.size(); ++k) {
        const Face& f = mesh.faces[mesh.inlet[k]];
        if (cfg.inlet_profile == InletProfile::Uniform) {
            speed[k] = 1.0;
        } else {
            const double eta = (f.center.y() - y_lo) / span;
            speed[k] = 4.0 * eta * (1.0 - eta);
        }
        q_raw += speed[k] * f.area.norm();
    }
    const double scale = (q_raw > 0.0 && q != 0.0) ? q / q_raw : 0.0;

    for (std::size_t k = 0; k < mesh.inlet.size(); ++k) {
        const int fid = mesh.inlet[k];
        const Face& f = mesh.faces[fid];
        const Vec2 inward = -f.area.normalized();
        bcs[fid].ukind = VelocityBcKind::Dirichlet;
        bcs[fid].uvalue = scale * speed[k] * inward;
        bcs[fid].pkind = PressureBcKind::ZeroGradient;
    }
    for (int fid : mesh.wall_lower) {
        bcs[fid].ukind = VelocityBcKind::Dirichlet;
        bcs[fid].uvalue = Vec2::Zero();
    }
    for (int fid : mesh.wall_upper) {
        bcs[fid].ukind = VelocityBcKind::Dirichlet;
        bcs[fid].uvalue = Vec2::Zero();
    }
    for (std::size_t k = 0; k < mesh.outlet.size(); ++k) {
        const int fid = mesh.outlet[k];
        bcs[fid].ukind = VelocityBcKind::ZeroGradient;
        switch (cfg.pressure_ref) {
        case PressureRef::OutletPatch:
            bcs[fid].pkind = PressureBcKind::FixedValue;
            bcs[fid].pvalue = 0.0;
            break;
        case PressureRef::OutletFace:
            bcs[fid].pkind = (k == 0) ? PressureBcKind::FixedValue
                                      : PressureBcKind::ZeroGradient;
            bcs[fid].pvalue = 0.0;
            break;
        default:
            bcs[fid].pkind = PressureBcKind::ZeroGradient;
            break;
        }
    }
    return bcs;
}

MomentumSystem assemble_transport(const StructuredMesh& mesh,
                                  const Eigen::VectorXd& face_flux, double nu,
                                  double time_coeff,
                                  const BoundaryConditions& bcs) {
    const int n = mesh.n_cells();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(5) * n);
    MomentumSystem sys;
    sys.rhs_x = Eigen::VectorXd::Zero(n);
    sys.rhs_y = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, time_coeff);

    for (int fid = 0; fid < mesh.n_faces(); ++fid) {
        const Face& f = mesh.faces[fid];
        const int P = f.owner;
        const double vP = mesh.cell_volumes[P];
        const double phi = face_flux[fid];
        const double amag = f.area.norm();
        if (f.neighbour >= 0) {
            const int N = f.neighbour;
            const double vN = mesh.cell_volumes[N];
            const double dist = (mesh.cell_centers[N] - mesh.cell_centers[P]).norm();
            const double dcoef = nu * amag / dist;
            // central convection: phi * (u_P + u_N)/2, signed per side
            diag[P] += (0.5 * phi + dcoef) / vP;
            trip.emplace_back(P, N, (0.5 * phi - dcoef) / vP);
            diag[N] += (-0.5 * phi + dcoef) / vN;
            trip.emplace_back(N, P, (-0.5 * phi - dcoef) / vN);
        } else {
            const FaceBc& bc = bcs[fid];
            const double dist = (f.center - mesh.cell_centers[P]).norm();
            if (bc.ukind == VelocityBcKind::Dirichlet) {
                const double dcoef = nu * amag / dist;
                diag[P] += dcoef / vP;
                sys.rhs_x[P] += (dcoef - phi) * bc.uvalue.x() / vP;
                sys.rhs_y[P] += (dcoef - phi) * bc.uvalue.y() / vP;
            } else {
                // zero gradient: u_b = u_P, no diffusive flux
                diag[P] += phi / vP;
            }
        }
    }
    for (int c = 0; c < n; ++c) trip.emplace_back(c, c, diag[c]);
    sys.A.resize(n, n);
    sys.A.setFromTriplets(trip.begin(), trip.end());
    sys.A.makeCompressed();
    return sys;
}

Eigen::Matrix2Xd gauss_gradient(const StructuredMesh& mesh,
                                const Eigen::VectorXd& p,
                                const BoundaryConditions& bcs) {
    Eigen::Matrix2Xd g = Eigen::Matrix2Xd::Zero(2, mesh.n_cells());
    for (int fid = 0; fid < mesh.n_faces(); ++fid) {
        const Face& f = mesh.faces[fid];
        if (f.neighbour >= 0) {
            const double pf = 0.5 * (p[f.owner] + p[f.neighbour]);
            g.col(f.owner) += pf * f.area;
            g.col(f.neighbour) -= pf * f.area;
        } else {
            const double pf = bcs[fid].pkind == PressureBcKind::FixedValue
                                  ? bcs[fid].pvalue
                                  : p[f.owner];
            g.col(f.owner) += pf * f.area;
        }
    }
    for (int c = 0; c < mesh.n_cells(); ++c) g.col(c) /= mesh.cell_volumes[c];
    return g;
}

Eigen::VectorXd solve_poisson(const StructuredMesh& mesh,
                              const Eigen::VectorXd& face_coeff,
                              const Eigen::VectorXd& rhs,
                              const BoundaryConditions& bcs,
                              PressureRef pressure_ref, int pin_cell,
                              double tol, int max_iter, SolveReport* report) {
    const int n = mesh.n_cells();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(5) * n);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd b = rhs;
    bool has_dirichlet = false;

    for (int fid = 0; fid < mesh.n_faces(); ++fid) {
        const Face& f = mesh.faces[fid];
        const int P = f.owner;
        if (f.neighbour >= 0) {
            const int N = f.neighbour;
            const double dist = (mesh.cell_centers[N] - mesh.cell_centers[P]).norm();
            const double c = face_coeff[fid] * f.area.norm() / dist;
            diag[P] += c;
            diag[N] += c;
            trip.emplace_back(P, N, -c);
            trip.emplace_back(N, P, -c);
        } else if (bcs[fid].pkind == PressureBcKind::FixedValue) {
            const double dist = (f.center - mesh.cell_centers[P]).norm();
            const double c = face_coeff[fid] * f.area.norm() / dist;
            diag[P] += c;
            b[P] += c * bcs[fid].pvalue;
            has_dirichlet = true;
        }
        // zero-gradient boundary: no contribution
    }

    const bool singular = !has_dirichlet;
    if (singular && pressure_ref != PressureRef::PinCell) {
        throw ConfigError(
            "pressure system is all-Neumann and no pressure pin is configured");
    }
    if (singular) {
        if (pin_cell < 0 || pin_cell >= n) {
            throw ConfigError("pin_cell out of range for pressure normalization");
        }
        // project the source onto the range of the singular operator
        b.array() -= b.mean();
    }

    for (int c = 0; c < n; ++c) trip.emplace_back(c, c, diag[c]);
    SparseMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();

    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    SolveReport rep = solve_cg(A, b, p, tol, max_iter);
    if (singular) {
        p.array() -= p[pin_cell];
    }
    if (report) *report = rep;
    return p;
}

WssField compute_wss(const StructuredMesh& mesh, const Field& u, double nu,
                     const std::function<Vec2(int)>* wall_velocity) {
    const auto ids = mesh.wall_faces();
    WssField wss;
    wss.face_ids = ids;
    wss.values.resize(2 * static_cast<Eigen::Index>(ids.size()));
    wss.mesh_checksum = mesh.checksum();
    wss.time = u.time;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const Face& f = mesh.faces[ids[k]];
        const Vec2 nhat = f.area.normalized();
        const Vec2 uw = wall_velocity ? (*wall_velocity)(ids[k]) : Vec2::Zero();

        // one-sided quadratic reconstruction along the inward normal
        // through the wall value and the two nearest cell rows
        const int i = f.owner % mesh.nx;
        const int j = f.owner / mesh.nx;
        const int j2 = j == 0 ? 1 : j - 1; // second row away from the wall
        const int second = mesh.cell_index(i, j2);
        const double a = (mesh.cell_centers[f.owner] - f.center).dot(-nhat);
        const double b = (mesh.cell_centers[second] - f.center).dot(-nhat);
        const Vec2 uP = u.vec(f.owner);
        const Vec2 uPP = u.vec(second);
        // d/dn at the wall, sign along the outward normal
        const Vec2 du = -(-(a + b) / (a * b) * uw -
                          b / (a * (a - b)) * uP -
                          a / (b * (b - a)) * uPP);
        const Vec2 traction = nu * (du + nhat * du.dot(nhat));
        wss.values[2 * k] = traction.x();
        wss.values[2 * k + 1] = traction.y();
    }
    return wss;
}

double max_cell_divergence(const StructuredMesh& mesh,
                           const Eigen::VectorXd& face_flux) {
    Eigen::VectorXd div = Eigen::VectorXd::Zero(mesh.n_cells());
    for (int fid = 0; fid < mesh.n_faces(); ++fid) {
        const Face& f = mesh.faces[fid];
        div[f.owner] += face_flux[fid];
        if (f.neighbour >= 0) div[f.neighbour] -= face_flux[fid];
    }
    return div.cwiseAbs().maxCoeff();
}

double patch_flux(const StructuredMesh& mesh, const std::vector<int>& patch,
                  const Eigen::VectorXd& face_flux) {
    (void)mesh;
    double q = 0.0;
    for (int fid : patch) q += face_flux[fid];
    return q;
}

} // namespace romforge
