#ifndef ROMFORGE_FFD_HPP
#define ROMFORGE_FFD_HPP

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "romforge/mesh.hpp"

namespace romforge {

/// Nonzero B-spline basis values at u: degree+1 values for functions
/// span-degree .. span, from the Cox-de Boor recursion.
struct BasisEval {
    int span = 0;
    std::vector<double> values;
};

/// Values and first derivatives of the nonzero basis functions.
struct BasisDerivEval {
    int span = 0;
    std::vector<double> values;
    std::vector<double> derivs;
};

/// Throws OutOfDomainError when u lies outside the knot range.
BasisEval bspline_basis(double u, int degree, const std::vector<double>& knots);
BasisDerivEval bspline_basis_derivs(double u, int degree,
                                    const std::vector<double>& knots);

/// Clamped uniform knot vector on [0,1] for n control points.
std::vector<double> clamped_uniform_knots(int n_control, int degree);

/// Greville abscissae (parametric positions of control points).
std::vector<double> greville_abscissae(int degree,
                                       const std::vector<double>& knots);

/// Tensor-product NURBS control lattice for free-form deformation.
/// Written rank-generically: `dims.size()` parametric directions, each
/// with its own degree and clamped knot vector. The reference
/// configuration places control points at the Greville abscissae mapped
/// into `box`, so the undisplaced map restricted to the box is the
/// identity (exactly, by linear precision, when all weights are 1).
class FfdLattice {
public:
    std::vector<int> dims;
    std::vector<int> degrees;
    std::vector<std::vector<double>> knots; // per direction
    Eigen::MatrixXd control_points;         // rank x n_control, dir 0 fastest
    Eigen::VectorXd weights;                // per control point, default 1
    Eigen::MatrixXd box;                    // rank x 2: column 0 min, column 1 max

    // channel lumen the stenosis calibration targets (wall positions
    // along the last direction); NaN when not applicable
    double lumen_lo = std::numeric_limits<double>::quiet_NaN();
    double lumen_hi = std::numeric_limits<double>::quiet_NaN();

    int rank() const { return static_cast<int>(dims.size()); }
    int n_control() const;
    int flat_index(const std::vector<int>& idx) const;

    void validate() const;

    /// Reference (undisplaced) control net: Greville positions in `box`.
    Eigen::MatrixXd reference_points() const;

    /// Rational map through the current control net.
    Eigen::VectorXd evaluate(const Eigen::VectorXd& uv) const;
    /// Rational map through an arbitrary net (used for the reference).
    Eigen::VectorXd evaluate_net(const Eigen::MatrixXd& net,
                                 const Eigen::VectorXd& uv) const;
    /// Jacobian d(map)/d(uv) through `net`.
    Eigen::MatrixXd jacobian_net(const Eigen::MatrixXd& net,
                                 const Eigen::VectorXd& uv) const;

    bool inside_box(const Eigen::VectorXd& x) const;
    /// True when the reference map is affine (all weights unit), so
    /// point location is closed-form.
    bool reference_is_affine() const;
};

/// Lattice enclosing the stenosis region of a channel of height
/// `height`: box x in [center_x - half_span, center_x + half_span],
/// y in [-height, 2*height] so both walls sit well inside the box.
FfdLattice make_channel_lattice(double center_x, double half_span,
                                double height, std::vector<int> dims = {7, 5},
                                std::vector<int> degrees = {2, 2});

/// Fractional lumen reduction to introduce at center_x over a streamwise
/// support of `extent`. severity in [0, 0.9].
struct StenosisSpec {
    double severity = 0.0;
    double center_x = 0.0;
    double extent = 0.0;

    void validate(const FfdLattice& lattice) const;
};

struct LocateResult {
    Eigen::MatrixXd uv;       // rank x n
    std::vector<bool> inside; // outside points are flagged, never an error
};

/// Parametric coordinates of `points` with respect to the reference
/// (undisplaced) lattice map. Closed-form for the affine reference;
/// subdivision-seeded Newton search otherwise. Inside points satisfy
/// |evaluate_reference(uv) - point| <= 1e-10 * box scale.
LocateResult locate_parametric(const FfdLattice& lattice,
                               const Eigen::MatrixXd& points);

/// New lattice with interior control points displaced toward the
/// channel centerline under a cosine streamwise bump; the displacement
/// amplitude is calibrated by bisection on the evaluated lattice so the
/// minimal lumen height is (1-severity)*(lumen_hi-lumen_lo) within 2%.
/// Boundary control layers are never displaced.
FfdLattice apply_stenosis(const FfdLattice& lattice, const StenosisSpec& spec);

/// Map points through the displaced lattice. Points outside the box are
/// returned bit-identical.
Eigen::MatrixXd deform_points(const FfdLattice& lattice,
                              const Eigen::MatrixXd& points);

/// Warp mesh vertices through the lattice and recompute the geometry.
/// Throws InvalidDeformationError when any deformed cell volume is
/// non-positive (tangling).
std::pair<StructuredMesh, MeshQuality> deform_mesh(const StructuredMesh& mesh,
                                                   const FfdLattice& lattice);

/// JSON text files with a version field (schema: dims, degrees, knots,
/// control_points, weights, box, lumen).
void save_lattice(const FfdLattice& lattice, const std::string& path);
FfdLattice load_lattice(const std::string& path);

} // namespace romforge

#endif
