#include "romforge/ffd.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace romforge {

namespace {

int find_span(double u, int degree, const std::vector<double>& knots) {
    const int last = static_cast<int>(knots.size()) - degree - 2;
    if (u >= knots[last + 1]) return last;
    if (u <= knots[degree]) return degree;
    int lo = degree;
    int hi = last + 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (knots[mid] <= u) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

void check_domain(double u, int degree, const std::vector<double>& knots) {
    if (knots.size() < static_cast<std::size_t>(2 * degree + 2)) {
        throw InvalidArgumentError("knot vector too short for degree");
    }
    const double lo = knots[degree];
    const double hi = knots[knots.size() - degree - 1];
    if (!(u >= lo && u <= hi)) {
        throw OutOfDomainError("parametric coordinate " + std::to_string(u) +
                               " outside knot range [" + std::to_string(lo) +
                               ", " + std::to_string(hi) + "]");
    }
}

// Cox-de Boor triangle for the nonzero functions on `span`.
std::vector<double> basis_on_span(double u, int degree, int span,
                                  const std::vector<double>& knots) {
    std::vector<double> vals(degree + 1, 0.0);
    std::vector<double> left(degree + 1, 0.0), right(degree + 1, 0.0);
    vals[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = vals[r] / (right[r + 1] + left[j - r]);
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    return vals;
}

} // namespace

BasisEval bspline_basis(double u, int degree, const std::vector<double>& knots) {
    check_domain(u, degree, knots);
    BasisEval out;
    out.span = find_span(u, degree, knots);
    out.values = basis_on_span(u, degree, out.span, knots);
    return out;
}

BasisDerivEval bspline_basis_derivs(double u, int degree,
                                    const std::vector<double>& knots) {
    check_domain(u, degree, knots);
    BasisDerivEval out;
    out.span = find_span(u, degree, knots);
    out.values = basis_on_span(u, degree, out.span, knots);
    out.derivs.assign(degree + 1, 0.0);
    if (degree == 0) return out;

    // N'_{i,p} = p [ N_{i,p-1}/(k_{i+p}-k_i) - N_{i+1,p-1}/(k_{i+p+1}-k_{i+1}) ]
    // where the degree p-1 functions nonzero at u are span-p+1 .. span.
    const std::vector<double> lower = basis_on_span(u, degree - 1, out.span, knots);
    for (int j = 0; j <= degree; ++j) {
        const int i = out.span - degree + j;
        double d = 0.0;
        if (j > 0) {
            const double den = knots[i + degree] - knots[i];
            if (den > 0.0) d += lower[j - 1] / den;
        }
        if (j < degree) {
            const double den = knots[i + degree + 1] - knots[i + 1];
            if (den > 0.0) d -= lower[j] / den;
        }
        out.derivs[j] = degree * d;
    }
    return out;
}

std::vector<double> clamped_uniform_knots(int n_control, int degree) {
    if (n_control < degree + 1) {
        throw InvalidArgumentError("need at least degree+1 control points");
    }
    std::vector<double> knots(n_control + degree + 1);
    const int segments = n_control - degree;
    for (int i = 0; i < static_cast<int>(knots.size()); ++i) {
        if (i <= degree) {
            knots[i] = 0.0;
        } else if (i >= n_control) {
            knots[i] = 1.0;
        } else {
            knots[i] = static_cast<double>(i - degree) / segments;
        }
    }
    return knots;
}

std::vector<double> greville_abscissae(int degree,
                                       const std::vector<double>& knots) {
    const int n = static_cast<int>(knots.size()) - degree - 1;
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
        if (degree == 0) {
            g[i] = 0.5 * (knots[i] + knots[i + 1]);
        } else {
            double acc = 0.0;
            for (int k = 1; k <= degree; ++k) acc += knots[i + k];
            g[i] = acc / degree;
        }
    }
    return g;
}

int FfdLattice::n_control() const {
    int n = 1;
    for (int d : dims) n *= d;
    return n;
}

int FfdLattice::flat_index(const std::vector<int>& idx) const {
    int flat = 0;
    for (int d = rank() - 1; d >= 0; --d) flat = flat * dims[d] + idx[d];
    return flat;
}

void FfdLattice::validate() const {
    const int r = rank();
    if (r < 1) throw InvalidArgumentError("lattice needs at least one direction");
    if (static_cast<int>(degrees.size()) != r ||
        static_cast<int>(knots.size()) != r) {
        throw InvalidArgumentError("lattice dims/degrees/knots rank mismatch");
    }
    for (int d = 0; d < r; ++d) {
        if (dims[d] < degrees[d] + 1) {
            throw InvalidArgumentError("dims must be >= degree+1 per direction");
        }
        const auto& kv = knots[d];
        if (static_cast<int>(kv.size()) != dims[d] + degrees[d] + 1) {
            throw InvalidArgumentError("knot vector length mismatch");
        }
        for (std::size_t i = 1; i < kv.size(); ++i) {
            if (kv[i] < kv[i - 1]) {
                throw InvalidArgumentError("knots must be non-decreasing");
            }
        }
        for (int i = 0; i <= degrees[d]; ++i) {
            if (kv[i] != kv.front() || kv[kv.size() - 1 - i] != kv.back()) {
                throw InvalidArgumentError("knot vector must be clamped");
            }
        }
        if (!(box(d, 1) > box(d, 0))) {
            throw InvalidArgumentError("embedding box must have positive extent");
        }
    }
    if (control_points.rows() != r || control_points.cols() != n_control()) {
        throw InvalidArgumentError("control point array shape mismatch");
    }
    if (weights.size() != n_control()) {
        throw InvalidArgumentError("one weight per control point required");
    }
    if ((weights.array() <= 0.0).any()) {
        throw InvalidArgumentError("weights must be positive");
    }
}

Eigen::MatrixXd FfdLattice::reference_points() const {
    const int r = rank();
    std::vector<std::vector<double>> g(r);
    for (int d = 0; d < r; ++d) g[d] = greville_abscissae(degrees[d], knots[d]);
    Eigen::MatrixXd ref(r, n_control());
    std::vector<int> idx(r, 0);
    for (int flat = 0; flat < n_control(); ++flat) {
        for (int d = 0; d < r; ++d) {
            ref(d, flat) = box(d, 0) + (box(d, 1) - box(d, 0)) * g[d][idx[d]];
        }
        for (int d = 0; d < r; ++d) {
            if (++idx[d] < dims[d]) break;
            idx[d] = 0;
        }
    }
    return ref;
}

Eigen::VectorXd FfdLattice::evaluate_net(const Eigen::MatrixXd& net,
                                         const Eigen::VectorXd& uv) const {
    const int r = rank();
    std::vector<BasisEval> be(r);
    for (int d = 0; d < r; ++d) {
        be[d] = bspline_basis(uv[d], degrees[d], knots[d]);
    }
    Eigen::VectorXd num = Eigen::VectorXd::Zero(r);
    double den = 0.0;
    std::vector<int> off(r, 0);
    std::vector<int> idx(r, 0);
    while (true) {
        double w = 1.0;
        for (int d = 0; d < r; ++d) {
            idx[d] = be[d].span - degrees[d] + off[d];
            w *= be[d].values[off[d]];
        }
        const int flat = flat_index(idx);
        w *= weights[flat];
        num += w * net.col(flat);
        den += w;
        int d = 0;
        for (; d < r; ++d) {
            if (++off[d] <= degrees[d]) break;
            off[d] = 0;
        }
        if (d == r) break;
    }
    return num / den;
}

Eigen::VectorXd FfdLattice::evaluate(const Eigen::VectorXd& uv) const {
    return evaluate_net(control_points, uv);
}

Eigen::MatrixXd FfdLattice::jacobian_net(const Eigen::MatrixXd& net,
                                         const Eigen::VectorXd& uv) const {
    const int r = rank();
    std::vector<BasisDerivEval> be(r);
    for (int d = 0; d < r; ++d) {
        be[d] = bspline_basis_derivs(uv[d], degrees[d], knots[d]);
    }
    Eigen::VectorXd num = Eigen::VectorXd::Zero(r);
    double den = 0.0;
    Eigen::MatrixXd dnum = Eigen::MatrixXd::Zero(r, r); // d num / d uv_c
    Eigen::VectorXd dden = Eigen::VectorXd::Zero(r);

    std::vector<int> off(r, 0);
    std::vector<int> idx(r, 0);
    while (true) {
        double w = 1.0;
        for (int d = 0; d < r; ++d) {
            idx[d] = be[d].span - degrees[d] + off[d];
            w *= be[d].values[off[d]];
        }
        const int flat = flat_index(idx);
        const double ww = w * weights[flat];
        num += ww * net.col(flat);
        den += ww;
        for (int c = 0; c < r; ++c) {
            // replace the factor for direction c by its derivative
            double dw = weights[flat];
            for (int d = 0; d < r; ++d) {
                dw *= (d == c) ? be[d].derivs[off[d]] : be[d].values[off[d]];
            }
            dnum.col(c) += dw * net.col(flat);
            dden[c] += dw;
        }
        int d = 0;
        for (; d < r; ++d) {
            if (++off[d] <= degrees[d]) break;
            off[d] = 0;
        }
        if (d == r) break;
    }
    Eigen::MatrixXd jac(r, r);
    for (int c = 0; c < r; ++c) {
        jac.col(c) = (dnum.col(c) * den - num * dden[c]) / (den * den);
    }
    return jac;
}

bool FfdLattice::inside_box(const Eigen::VectorXd& x) const {
    for (int d = 0; d < rank(); ++d) {
        if (x[d] < box(d, 0) || x[d] > box(d, 1)) return false;
    }
    return true;
}

bool FfdLattice::reference_is_affine() const {
    return (weights.array() == 1.0).all();
}

FfdLattice make_channel_lattice(double center_x, double half_span,
                                double height, std::vector<int> dims,
                                std::vector<int> degrees) {
    if (!(half_span > 0.0) || !(height > 0.0)) {
        throw InvalidArgumentError("lattice span and height must be positive");
    }
    FfdLattice lat;
    lat.dims = std::move(dims);
    lat.degrees = std::move(degrees);
    lat.box.resize(2, 2);
    lat.box(0, 0) = center_x - half_span;
    lat.box(0, 1) = center_x + half_span;
    lat.box(1, 0) = -height;
    lat.box(1, 1) = 2.0 * height;
    lat.lumen_lo = 0.0;
    lat.lumen_hi = height;
    lat.knots.resize(2);
    for (int d = 0; d < 2; ++d) {
        lat.knots[d] = clamped_uniform_knots(lat.dims[d], lat.degrees[d]);
    }
    lat.weights = Eigen::VectorXd::Ones(lat.dims[0] * lat.dims[1]);
    lat.control_points.resize(2, lat.dims[0] * lat.dims[1]);
    lat.control_points = lat.reference_points();
    lat.validate();
    return lat;
}

void StenosisSpec::validate(const FfdLattice& lattice) const {
    if (severity < 0.0 || severity > 0.9) {
        throw InvalidArgumentError("stenosis severity out of range [0, 0.9]");
    }
    if (!(extent > 0.0)) {
        throw InvalidArgumentError("stenosis extent must be positive");
    }
    const double lo = center_x - 0.5 * extent;
    const double hi = center_x + 0.5 * extent;
    if (!(lo > lattice.box(0, 0) && hi < lattice.box(0, 1))) {
        throw InvalidArgumentError(
            "stenosis support must lie strictly inside the lattice box");
    }
}

namespace {

Eigen::VectorXd locate_closed_form(const FfdLattice& lat,
                                   const Eigen::VectorXd& x) {
    Eigen::VectorXd uv(lat.rank());
    for (int d = 0; d < lat.rank(); ++d) {
        uv[d] = (x[d] - lat.box(d, 0)) / (lat.box(d, 1) - lat.box(d, 0));
    }
    return uv;
}

// Subdivision search on the parametric box followed by a damped Newton
// polish against the reference map.
Eigen::VectorXd locate_search(const FfdLattice& lat, const Eigen::MatrixXd& ref,
                              const Eigen::VectorXd& x) {
    const int r = lat.rank();
    Eigen::VectorXd best = locate_closed_form(lat, x); // good seed even if inexact
    for (int d = 0; d < r; ++d) best[d] = std::clamp(best[d], 0.0, 1.0);
    double best_dist = (lat.evaluate_net(ref, best) - x).norm();

    // coordinate subdivision: shrink a candidate stencil around the best
    double step = 0.25;
    Eigen::VectorXd cand(r);
    while (step > 1e-4) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (int d = 0; d < r; ++d) {
                for (int s = -1; s <= 1; s += 2) {
                    cand = best;
                    cand[d] = std::clamp(cand[d] + s * step, 0.0, 1.0);
                    const double dist = (lat.evaluate_net(ref, cand) - x).norm();
                    if (dist < best_dist) {
                        best_dist = dist;
                        best = cand;
                        improved = true;
                    }
                }
            }
        }
        step *= 0.5;
    }

    const double scale = (lat.box.col(1) - lat.box.col(0)).norm();
    for (int it = 0; it < 60; ++it) {
        const Eigen::VectorXd res = lat.evaluate_net(ref, best) - x;
        if (res.norm() <= 1e-13 * scale) break;
        const Eigen::MatrixXd jac = lat.jacobian_net(ref, best);
        Eigen::VectorXd delta = jac.fullPivLu().solve(res);
        // damped, clamped update
        double lambda = 1.0;
        for (int ls = 0; ls < 30; ++ls) {
            Eigen::VectorXd trial = best - lambda * delta;
            for (int d = 0; d < r; ++d) trial[d] = std::clamp(trial[d], 0.0, 1.0);
            const double dist = (lat.evaluate_net(ref, trial) - x).norm();
            if (dist < res.norm()) {
                best = trial;
                break;
            }
            lambda *= 0.5;
        }
    }
    return best;
}

} // namespace

LocateResult locate_parametric(const FfdLattice& lattice,
                               const Eigen::MatrixXd& points) {
    lattice.validate();
    const int n = static_cast<int>(points.cols());
    LocateResult out;
    out.uv.resize(lattice.rank(), n);
    out.inside.assign(n, false);
    const bool affine = lattice.reference_is_affine();
    Eigen::MatrixXd ref;
    if (!affine) ref = lattice.reference_points();
    for (int k = 0; k < n; ++k) {
        const Eigen::VectorXd x = points.col(k);
        if (!lattice.inside_box(x)) {
            out.uv.col(k).setZero();
            continue;
        }
        out.inside[k] = true;
        out.uv.col(k) =
            affine ? locate_closed_form(lattice, x) : locate_search(lattice, ref, x);
    }
    return out;
}

namespace {

double cosine_bump(double x, double center, double extent) {
    const double t = (x - center) / (0.5 * extent);
    if (std::abs(t) >= 1.0) return 0.0;
    return 0.5 * (1.0 + std::cos(M_PI * t));
}

// Lattice displaced toward the lumen midline with amplitude s.
FfdLattice displaced_lattice(const FfdLattice& base, const StenosisSpec& spec,
                             double s) {
    FfdLattice lat = base;
    const int r = lat.rank();
    const int tdir = r - 1; // transverse direction
    const Eigen::MatrixXd ref = lat.reference_points();
    const double y_mid = 0.5 * (lat.lumen_lo + lat.lumen_hi);

    std::vector<int> idx(r, 0);
    for (int flat = 0; flat < lat.n_control(); ++flat) {
        bool interior = true;
        for (int d = 0; d < r; ++d) {
            if (idx[d] == 0 || idx[d] == lat.dims[d] - 1) interior = false;
        }
        if (interior) {
            const double bump = cosine_bump(ref(0, flat), spec.center_x, spec.extent);
            lat.control_points(tdir, flat) =
                ref(tdir, flat) + s * bump * (y_mid - ref(tdir, flat));
        }
        for (int d = 0; d < r; ++d) {
            if (++idx[d] < lat.dims[d]) break;
            idx[d] = 0;
        }
    }
    return lat;
}

double min_lumen_height(const FfdLattice& lat, const StenosisSpec& spec) {
    const int samples = 201;
    const int tdir = lat.rank() - 1;
    double lo = spec.center_x - 0.5 * spec.extent;
    double hi = spec.center_x + 0.5 * spec.extent;
    double min_gap = lat.lumen_hi - lat.lumen_lo;
    for (int k = 0; k < samples; ++k) {
        const double x = lo + (hi - lo) * k / (samples - 1);
        Eigen::MatrixXd pts(lat.rank(), 2);
        pts.setZero();
        pts(0, 0) = x;
        pts(tdir, 0) = lat.lumen_lo;
        pts(0, 1) = x;
        pts(tdir, 1) = lat.lumen_hi;
        const Eigen::MatrixXd moved = deform_points(lat, pts);
        min_gap = std::min(min_gap, moved(tdir, 1) - moved(tdir, 0));
    }
    return min_gap;
}

} // namespace

FfdLattice apply_stenosis(const FfdLattice& lattice, const StenosisSpec& spec) {
    lattice.validate();
    spec.validate(lattice);
    if (!(std::isfinite(lattice.lumen_lo) && std::isfinite(lattice.lumen_hi))) {
        throw InvalidArgumentError("lattice carries no lumen band to calibrate");
    }
    if (spec.severity == 0.0) return lattice;

    const double height = lattice.lumen_hi - lattice.lumen_lo;
    const double target = (1.0 - spec.severity) * height;

    // bracket the amplitude, then bisect on the evaluated lattice
    double s_lo = 0.0;
    double s_hi = 1.0;
    int grow = 0;
    while (min_lumen_height(displaced_lattice(lattice, spec, s_hi), spec) >
           target) {
        s_hi *= 1.5;
        if (++grow > 8) {
            throw InvalidArgumentError(
                "stenosis severity unreachable with this lattice");
        }
    }
    for (int it = 0; it < 80; ++it) {
        const double s = 0.5 * (s_lo + s_hi);
        const double gap = min_lumen_height(displaced_lattice(lattice, spec, s), spec);
        if (gap > target) {
            s_lo = s;
        } else {
            s_hi = s;
        }
        if (s_hi - s_lo < 1e-13) break;
    }
    return displaced_lattice(lattice, spec, 0.5 * (s_lo + s_hi));
}

Eigen::MatrixXd deform_points(const FfdLattice& lattice,
                              const Eigen::MatrixXd& points) {
    const LocateResult loc = locate_parametric(lattice, points);
    Eigen::MatrixXd out = points;
    for (int k = 0; k < points.cols(); ++k) {
        if (!loc.inside[k]) continue; // exterior points stay bit-identical
        out.col(k) = lattice.evaluate(loc.uv.col(k));
    }
    return out;
}

std::pair<StructuredMesh, MeshQuality> deform_mesh(const StructuredMesh& mesh,
                                                   const FfdLattice& lattice) {
    StructuredMesh out = mesh;
    Eigen::MatrixXd pts(2, mesh.n_vertices());
    for (int v = 0; v < mesh.n_vertices(); ++v) pts.col(v) = mesh.vertices[v];
    const Eigen::MatrixXd moved = deform_points(lattice, pts);
    for (int v = 0; v < mesh.n_vertices(); ++v) out.vertices[v] = moved.col(v);
    out.recompute_geometry(); // throws InvalidDeformationError on tangling
    return {out, out.quality()};
}

void save_lattice(const FfdLattice& lattice, const std::string& path) {
    lattice.validate();
    nlohmann::json j;
    j["version"] = 1;
    j["dims"] = lattice.dims;
    j["degrees"] = lattice.degrees;
    j["knots"] = lattice.knots;
    std::vector<std::vector<double>> cps(lattice.n_control());
    for (int k = 0; k < lattice.n_control(); ++k) {
        cps[k].assign(lattice.control_points.col(k).data(),
                      lattice.control_points.col(k).data() + lattice.rank());
    }
    j["control_points"] = cps;
    j["weights"] = std::vector<double>(lattice.weights.data(),
                                       lattice.weights.data() +
                                           lattice.weights.size());
    std::vector<std::vector<double>> box(lattice.rank());
    for (int d = 0; d < lattice.rank(); ++d) {
        box[d] = {lattice.box(d, 0), lattice.box(d, 1)};
    }
    j["box"] = box;
    if (std::isfinite(lattice.lumen_lo)) {
        j["lumen"] = {lattice.lumen_lo, lattice.lumen_hi};
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open lattice file for writing: " + path);
    out << j.dump(2) << "\n";
}

FfdLattice load_lattice(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lattice file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed lattice file " + path + ": " + e.what());
    }
    if (!j.contains("version") || j["version"].get<int>() != 1) {
        throw IoError("unsupported lattice file version in " + path);
    }
    FfdLattice lat;
    try {
        lat.dims = j.at("dims").get<std::vector<int>>();
        lat.degrees = j.at("degrees").get<std::vector<int>>();
        lat.knots = j.at("knots").get<std::vector<std::vector<double>>>();
        const auto cps = j.at("control_points").get<std::vector<std::vector<double>>>();
        const auto w = j.at("weights").get<std::vector<double>>();
        const auto box = j.at("box").get<std::vector<std::vector<double>>>();
        const int r = static_cast<int>(lat.dims.size());
        lat.control_points.resize(r, static_cast<int>(cps.size()));
        for (std::size_t k = 0; k < cps.size(); ++k) {
            for (int d = 0; d < r; ++d) lat.control_points(d, k) = cps[k].at(d);
        }
        lat.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
        lat.box.resize(r, 2);
        for (int d = 0; d < r; ++d) {
            lat.box(d, 0) = box.at(d).at(0);
            lat.box(d, 1) = box.at(d).at(1);
        }
        if (j.contains("lumen")) {
            lat.lumen_lo = j["lumen"].at(0).get<double>();
            lat.lumen_hi = j["lumen"].at(1).get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed lattice file " + path + ": " + e.what());
    }
    lat.validate();
    return lat;
}

} // namespace romforge
