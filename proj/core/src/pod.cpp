#include "romforge/pod.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <Eigen/SVD>

#include "romforge/errors.hpp"

namespace romforge {

std::string variable_name(RomVariable v) {
    switch (v) {
    case RomVariable::Pressure: return "p";
    case RomVariable::Velocity: return "u";
    case RomVariable::Wss: return "wss";
    }
    throw InvalidArgumentError("unknown variable");
}

FieldKind variable_kind(RomVariable v) {
    switch (v) {
    case RomVariable::Pressure: return FieldKind::Scalar;
    case RomVariable::Velocity: return FieldKind::Vector2;
    case RomVariable::Wss: return FieldKind::WallVector2;
    }
    throw InvalidArgumentError("unknown variable");
}

void SnapshotMatrix::validate() const {
    if (data.cols() < 2) {
        throw InvalidArgumentError("snapshot matrix needs at least two columns");
    }
    if (static_cast<Eigen::Index>(times.size()) != data.cols()) {
        throw InvalidArgumentError("one time stamp per snapshot column required");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw InvalidArgumentError("snapshot times must strictly increase");
        }
    }
    if (!data.allFinite()) {
        throw InvalidArgumentError("snapshot matrix contains non-finite entries");
    }
}

SnapshotMatrix assemble_snapshots(const std::vector<Field>& snapshots,
                                  RomVariable variable) {
    if (snapshots.size() < 2) {
        throw InvalidArgumentError("need at least two snapshots");
    }
    const FieldKind kind = variable_kind(variable);
    const Eigen::Index n_dof = snapshots.front().values.size();
    const std::uint64_t cs = snapshots.front().mesh_checksum;
    SnapshotMatrix S;
    S.variable = variable;
    S.mesh_checksum = cs;
    S.data.resize(n_dof, static_cast<Eigen::Index>(snapshots.size()));
    S.times.resize(snapshots.size());
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
        const Field& f = snapshots[k];
        if (f.kind != kind) {
            throw InvalidArgumentError("snapshot kind mismatch for variable " +
                                       variable_name(variable));
        }
        if (f.mesh_checksum != cs) {
            throw InvalidArgumentError("snapshots live on different meshes");
        }
        if (f.values.size() != n_dof) {
            throw InvalidArgumentError("snapshot size mismatch");
        }
        S.data.col(static_cast<Eigen::Index>(k)) = f.values;
        S.times[k] = f.time;
    }
    S.validate();
    return S;
}

namespace {

// One modified Gram-Schmidt pass. The Gram route loses orthogonality on
// deep spectra; this restores it without touching well-separated modes.
void orthonormalize(Eigen::MatrixXd& modes, Eigen::VectorXd& sigma, int& r) {
    for (int j = 0; j < r; ++j) {
        for (int i = 0; i < j; ++i) {
            modes.col(j) -= modes.col(i).dot(modes.col(j)) * modes.col(i);
        }
        const double nrm = modes.col(j).norm();
        if (nrm < 1e-10) {
            r = j; // trailing columns are numerically dependent
            break;
        }
        modes.col(j) /= nrm;
    }
    (void)sigma;
}

} // namespace

PodBasis compute_pod(const SnapshotMatrix& S, double eps_rank, SvdMethod method,
                     bool center) {
    S.validate();
    if (method == SvdMethod::Auto) {
        method = S.data.rows() > 4 * S.data.cols() ? SvdMethod::GramSnapshots
                                                   : SvdMethod::Direct;
    }

    PodBasis basis;
    basis.variable = S.variable;
    basis.mesh_checksum = S.mesh_checksum;

    Eigen::MatrixXd centered;
    const Eigen::MatrixXd* data = &S.data;
    if (center) {
        basis.mean_shift = S.data.rowwise().mean();
        centered = S.data.colwise() - basis.mean_shift;
        data = &centered;
    }

    if (method == SvdMethod::Direct) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(*data, Eigen::ComputeThinU);
        if (svd.info() != Eigen::Success) {
            throw NumericError("SVD failed to converge on a " +
                               std::to_string(S.data.rows()) + "x" +
                               std::to_string(S.data.cols()) +
                               " snapshot matrix (norm " +
                               std::to_string(S.data.norm()) + ")");
        }
        basis.singular_values = svd.singularValues();
        const double s0 = basis.singular_values.size() ? basis.singular_values[0] : 0.0;
        int r = 0;
        while (r < basis.singular_values.size() &&
               basis.singular_values[r] > eps_rank * s0 &&
               basis.singular_values[r] > 0.0) {
            ++r;
        }
        basis.modes = svd.matrixU().leftCols(r);
        basis.rank = r;
    } else {
        const Eigen::MatrixXd gram = data->transpose() * (*data);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        if (eig.info() != Eigen::Success) {
            throw NumericError("eigendecomposition of the Gram matrix failed");
        }
        const Eigen::Index n = gram.rows();
        Eigen::VectorXd sigma(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            // SelfAdjointEigenSolver sorts ascending
            sigma[i] = std::sqrt(std::max(0.0, eig.eigenvalues()[n - 1 - i]));
        }
        const double s0 = sigma.size() ? sigma[0] : 0.0;
        // the Gram matrix resolves sigma only down to sqrt(eps) * sigma_1;
        // anything below that is rounding noise, not a singular value
        const double floor =
            s0 * std::sqrt(static_cast<double>(n) *
                           std::numeric_limits<double>::epsilon());
        for (Eigen::Index i = 0; i < n; ++i) {
            if (sigma[i] <= floor) sigma[i] = 0.0;
        }
        basis.singular_values = sigma;
        int r = 0;
        while (r < n && sigma[r] > eps_rank * s0 && sigma[r] > 0.0) ++r;
        basis.modes.resize(data->rows(), r);
        for (int i = 0; i < r; ++i) {
            basis.modes.col(i) =
                (*data) * eig.eigenvectors().col(n - 1 - i) / sigma[i];
        }
        orthonormalize(basis.modes, basis.singular_values, r);
        basis.modes.conservativeResize(Eigen::NoChange, r);
        basis.rank = r;
    }
    return basis;
}

int select_rank(const Eigen::VectorXd& singular_values, double delta,
                EnergyCriterion criterion) {
    if (singular_values.size() == 0) {
        throw InvalidArgumentError("empty singular value spectrum");
    }
    if (!(delta > 0.0 && delta <= 1.0)) {
        throw InvalidArgumentError("energy threshold delta must lie in (0, 1]");
    }
    const bool squared = criterion == EnergyCriterion::SigmaSquared;
    double total = 0.0;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
        const double s = singular_values[i];
        total += squared ? s * s : s;
    }
    if (total <= 0.0) {
        throw InvalidArgumentError("spectrum has no positive singular values");
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
        const double s = singular_values[i];
        acc += squared ? s * s : s;
        if (acc / total >= delta - 1e-15) {
            return static_cast<int>(i) + 1;
        }
    }
    return static_cast<int>(singular_values.size());
}

PodBasis truncate(const PodBasis& basis, double delta, EnergyCriterion criterion) {
    PodBasis out = basis;
    out.energy_delta = delta;
    out.criterion = criterion;
    int L = select_rank(basis.singular_values, delta, criterion);
    // never retain more modes than were computed
    L = std::min(L, static_cast<int>(basis.modes.cols()));
    out.rank = L;
    out.modes = basis.modes.leftCols(L);
    return out;
}

Eigen::VectorXd project(const PodBasis& basis, const Eigen::VectorXd& snapshot) {
    if (snapshot.size() != basis.modes.rows()) {
        throw InvalidArgumentError("snapshot length does not match basis");
    }
    if (basis.mean_shift.size() > 0) {
        return basis.retained_modes().transpose() * (snapshot - basis.mean_shift);
    }
    return basis.retained_modes().transpose() * snapshot;
}

Eigen::VectorXd reconstruct(const PodBasis& basis,
                            const Eigen::VectorXd& coefficients) {
    if (coefficients.size() != basis.rank) {
        throw InvalidArgumentError("coefficient length does not match basis rank");
    }
    Eigen::VectorXd x = basis.retained_modes() * coefficients;
    if (basis.mean_shift.size() > 0) x += basis.mean_shift;
    return x;
}

namespace {

constexpr char kMagic[4] = {'R', 'P', 'O', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated basis file while reading " + what);
    return v;
}

} // namespace

void save_basis(const PodBasis& basis, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open basis file for writing: " + path);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(basis.variable));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(basis.criterion));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(basis.modes.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(basis.modes.cols()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(basis.singular_values.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(basis.rank));
    put<double>(out, basis.energy_delta);
    put<std::uint64_t>(out, basis.mesh_checksum);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(basis.mean_shift.size()));
    out.write(reinterpret_cast<const char*>(basis.mean_shift.data()),
              static_cast<std::streamsize>(basis.mean_shift.size() *
                                           sizeof(double)));
    out.write(reinterpret_cast<const char*>(basis.singular_values.data()),
              static_cast<std::streamsize>(basis.singular_values.size() *
                                           sizeof(double)));
    out.write(reinterpret_cast<const char*>(basis.modes.data()),
              static_cast<std::streamsize>(basis.modes.size() * sizeof(double)));
    if (!out) throw IoError("short write on basis file: " + path);
}

PodBasis load_basis(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open basis file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("malformed basis file header (bad magic): " + path);
    }
    if (get<std::uint32_t>(in, "version") != kVersion) {
        throw IoError("unsupported basis file version in " + path);
    }
    PodBasis basis;
    basis.variable = static_cast<RomVariable>(get<std::uint32_t>(in, "variable"));
    basis.criterion =
        static_cast<EnergyCriterion>(get<std::uint32_t>(in, "criterion"));
    const auto rows = get<std::uint64_t>(in, "rows");
    const auto cols = get<std::uint64_t>(in, "cols");
    const auto spec_len = get<std::uint64_t>(in, "spectrum length");
    basis.rank = static_cast<int>(get<std::uint64_t>(in, "rank"));
    basis.energy_delta = get<double>(in, "delta");
    basis.mesh_checksum = get<std::uint64_t>(in, "mesh checksum");
    const auto mean_len = get<std::uint64_t>(in, "mean length");
    basis.mean_shift.resize(static_cast<Eigen::Index>(mean_len));
    in.read(reinterpret_cast<char*>(basis.mean_shift.data()),
            static_cast<std::streamsize>(mean_len * sizeof(double)));
    basis.singular_values.resize(static_cast<Eigen::Index>(spec_len));
    in.read(reinterpret_cast<char*>(basis.singular_values.data()),
            static_cast<std::streamsize>(spec_len * sizeof(double)));
    basis.modes.resize(static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(basis.modes.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!in) throw IoError("basis file length mismatch (truncated): " + path);
    return basis;
}

void write_spectrum_csv(const PodBasis& basis, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open spectrum CSV for writing: " + path);
    out.precision(17);
    out << "index,sigma,cumulative_energy_sigma,cumulative_energy_sigma2\n";
    double tot1 = 0.0, tot2 = 0.0;
    for (Eigen::Index i = 0; i < basis.singular_values.size(); ++i) {
        const double s = basis.singular_values[i];
        tot1 += s;
        tot2 += s * s;
    }
    double acc1 = 0.0, acc2 = 0.0;
    for (Eigen::Index i = 0; i < basis.singular_values.size(); ++i) {
        const double s = basis.singular_values[i];
        acc1 += s;
        acc2 += s * s;
        out << i + 1 << "," << s << "," << (tot1 > 0 ? acc1 / tot1 : 0.0) << ","
            << (tot2 > 0 ? acc2 / tot2 : 0.0) << "\n";
    }
}

} // namespace romforge
