#include "romforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "romforge/field_io.hpp"

namespace fs = std::filesystem;

namespace romforge {

int worker_count() {
    if (const char* env = std::getenv("ROMFORGE_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

const std::array<RomVariable, 3> kVariables = {
    RomVariable::Pressure, RomVariable::Velocity, RomVariable::Wss};

/// Run tasks on up to `workers` threads; rethrows the first failure.
void run_parallel(const std::vector<std::function<void()>>& tasks, int workers) {
    workers = std::min<int>(workers, static_cast<int>(tasks.size()));
    if (workers <= 1) {
        for (const auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(tasks.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                try {
                    tasks[i]();
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&now));
    return buf;
}

SolverConfig resolve_solver(const ExperimentConfig& cfg) {
    SolverConfig s = cfg.solver;
    s.waveform = cfg.make_waveform();
    return s;
}

} // namespace

void RomArtifacts::validate() const {
    for (int v = 0; v < 3; ++v) {
        if (bases[v].rank != models[v].output_size()) {
            throw InvalidArgumentError(
                "basis rank does not match network output width for variable " +
                variable_name(static_cast<RomVariable>(v)));
        }
        if (bases[v].mesh_checksum != mesh_checksum) {
            throw InvalidArgumentError("artifact mesh checksums disagree");
        }
    }
    if (!(cycle_period > 0.0)) {
        throw InvalidArgumentError("artifacts carry no cycle period");
    }
}

void save_artifacts(const RomArtifacts& artifacts, const std::string& out_dir) {
    artifacts.validate();
    fs::create_directories(out_dir + "/basis");
    fs::create_directories(out_dir + "/models");
    nlohmann::json j;
    j["version"] = 1;
    j["config_hash"] = artifacts.config_hash;
    j["seed"] = artifacts.seed;
    j["mesh_checksum"] = artifacts.mesh_checksum;
    j["cycle_period"] = artifacts.cycle_period;
    j["created"] = artifacts.created.empty() ? iso_timestamp() : artifacts.created;
    for (RomVariable v : kVariables) {
        const std::string name = variable_name(v);
        const std::string basis_path = out_dir + "/basis/basis_" + name + ".bin";
        const std::string model_path = out_dir + "/models/model_" + name + ".bin";
        save_basis(artifacts.basis(v), basis_path);
        save_model(artifacts.model(v), model_path);
        j["ranks"][name] = artifacts.basis(v).rank;
        j["paths"]["basis_" + name] = "basis/basis_" + name + ".bin";
        j["paths"]["model_" + name] = "models/model_" + name + ".bin";
    }
    std::ofstream out(out_dir + "/manifest.json");
    if (!out) throw IoError("cannot write artifact manifest in " + out_dir);
    out << j.dump(2) << "\n";
}

RomArtifacts load_artifacts(const std::string& out_dir) {
    std::ifstream in(out_dir + "/manifest.json");
    if (!in) throw IoError("no artifact manifest in " + out_dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed artifact manifest: " + std::string(e.what()));
    }
    RomArtifacts art;
    try {
        art.config_hash = j.at("config_hash").get<std::uint64_t>();
        art.seed = j.at("seed").get<std::uint64_t>();
        art.mesh_checksum = j.at("mesh_checksum").get<std::uint64_t>();
        art.cycle_period = j.at("cycle_period").get<double>();
        art.created = j.value("created", "");
        for (RomVariable v : kVariables) {
            const std::string name = variable_name(v);
            const std::string basis_rel =
                j.at("paths").at("basis_" + name).get<std::string>();
            const std::string model_rel =
                j.at("paths").at("model_" + name).get<std::string>();
            art.bases[static_cast<int>(v)] = load_basis(out_dir + "/" + basis_rel);
            art.models[static_cast<int>(v)] = load_model(out_dir + "/" + model_rel);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed artifact manifest: " + std::string(e.what()));
    }
    art.validate();
    return art;
}

GeometryResult make_geometry(const ExperimentConfig& cfg) {
    const StructuredMesh base =
        build_channel_mesh(cfg.mesh.length, cfg.mesh.height, cfg.mesh.nx,
                           cfg.mesh.ny);
    FfdLattice lattice =
        make_channel_lattice(cfg.ffd.center_x, cfg.ffd.half_span, cfg.mesh.height,
                             cfg.ffd.dims, cfg.ffd.degrees);
    StenosisSpec spec;
    spec.severity = cfg.ffd.severity;
    spec.center_x = cfg.ffd.center_x;
    spec.extent = cfg.ffd.extent;
    GeometryResult out{base, apply_stenosis(lattice, spec), MeshQuality{}};
    auto [mesh, quality] = deform_mesh(base, out.lattice);
    out.mesh = std::move(mesh);
    out.quality = quality;
    return out;
}

OfflineResult offline(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    for (const char* sub : {"snapshots", "basis", "models", "reports", "fields"}) {
        fs::create_directories(out_dir + "/" + sub);
    }

    OfflineResult result;

    GeometryResult geo;
    try {
        geo = make_geometry(cfg);
    } catch (const Error& e) {
        throw Error(std::string("offline stage `ffd` failed: ") + e.what());
    }
    result.mesh = geo.mesh;
    write_quality_csv(geo.quality, out_dir + "/reports/mesh_quality.csv");
    save_lattice(geo.lattice, out_dir + "/reports/lattice.json");

    const SolverConfig solver_cfg = resolve_solver(cfg);
    try {
        result.snapshots =
            run_cycles_to_dir(result.mesh, solver_cfg, out_dir + "/snapshots");
    } catch (const Error& e) {
        throw Error(std::string("offline stage `fom` failed: ") + e.what());
    }

    RomArtifacts& art = result.artifacts;
    art.mesh_checksum = result.mesh.checksum();
    art.config_hash = cfg.config_hash;
    art.seed = cfg.seed;
    art.cycle_period = cfg.solver.T;

    // POD and training per variable (independent, fanned out)
    std::vector<std::function<void()>> tasks;
    for (RomVariable v : kVariables) {
        tasks.emplace_back([&, v] {
            const int vi = static_cast<int>(v);
            std::vector<Field> fields;
            fields.reserve(result.snapshots.size());
            for (const auto& rec : result.snapshots) {
                const std::string& path = v == RomVariable::Pressure ? rec.path_p
                                          : v == RomVariable::Velocity
                                              ? rec.path_u
                                              : rec.path_wss;
                fields.push_back(read_field(path));
            }
            SnapshotMatrix S;
            PodBasis basis;
            try {
                S = assemble_snapshots(fields, v);
                basis = compute_pod(S, cfg.pod.eps_rank, cfg.pod.method,
                                    cfg.pod.center);
                basis = truncate(basis, cfg.pod.delta, cfg.pod.criterion);
            } catch (const Error& e) {
                throw Error(std::string("offline stage `pod` failed for ") +
                            variable_name(v) + ": " + e.what());
            }

            CoefficientDataset& ds = result.datasets[vi];
            ds.inputs.resize(S.data.cols());
            ds.targets.resize(basis.rank, S.data.cols());
            for (Eigen::Index k = 0; k < S.data.cols(); ++k) {
                ds.inputs[k] = S.times[static_cast<std::size_t>(k)];
                ds.targets.col(k) = project(basis, S.data.col(k));
            }
            const TrainConfig& tcfg = cfg.ann_for(v);
            split_dataset(ds, tcfg.train_fraction, tcfg.seed);

            MlpModel model =
                init_mlp(tcfg.layer_sizes(basis.rank), tcfg.activation, tcfg.seed);
            try {
                result.histories[vi] = train(model, ds, tcfg);
            } catch (const Error& e) {
                throw Error(std::string("offline stage `train` failed for ") +
                            variable_name(v) + ": " + e.what());
            }

            art.bases[vi] = std::move(basis);
            art.models[vi] = std::move(model);
        });
    }
    run_parallel(tasks, std::min(worker_count(), 3));

    for (RomVariable v : kVariables) {
        const int vi = static_cast<int>(v);
        const std::string name = variable_name(v);
        write_spectrum_csv(art.bases[vi],
                           out_dir + "/reports/spectrum_" + name + ".csv");
        write_loss_csv(result.histories[vi],
                       out_dir + "/reports/loss_" + name + ".csv");
    }
    save_artifacts(art, out_dir);
    return result;
}

OnlineResult online_evaluate(const RomArtifacts& artifacts,
                             const StructuredMesh& mesh, double t_new) {
    artifacts.validate();
    if (artifacts.mesh_checksum != mesh.checksum()) {
        throw InvalidArgumentError(
            "artifact mesh checksum does not match the supplied mesh; "
            "refusing to evaluate");
    }
    OnlineResult out;
    out.extrapolated = t_new < 0.0 || t_new > artifacts.cycle_period;

    Eigen::VectorXd tin(1);
    tin[0] = t_new;
    const auto tic = std::chrono::steady_clock::now();
    std::array<Eigen::VectorXd, 3> values;
    for (RomVariable v : kVariables) {
        const int vi = static_cast<int>(v);
        const Eigen::VectorXd coeffs = artifacts.model(v).forward(tin);
        values[vi] = reconstruct(artifacts.basis(v), coeffs);
    }
    const auto toc = std::chrono::steady_clock::now();
    out.wall_seconds = std::chrono::duration<double>(toc - tic).count();

    const std::uint64_t cs = mesh.checksum();
    auto wrap = [&](RomVariable v) {
        Field f;
        f.kind = variable_kind(v);
        f.values = std::move(values[static_cast<int>(v)]);
        f.mesh_checksum = cs;
        f.time = t_new;
        return f;
    };
    out.p = wrap(RomVariable::Pressure);
    out.u = wrap(RomVariable::Velocity);
    out.wss = wrap(RomVariable::Wss);
    return out;
}

namespace {

/// Evaluate the trained ROM against every stored snapshot.
StudyRun evaluate_against_snapshots(const OfflineResult& off,
                                    const ExperimentConfig& cfg, double delta) {
    StudyRun run;
    run.n_snapshots = cfg.solver.snapshots_per_cycle;
    run.delta = delta;
    for (int v = 0; v < 3; ++v) run.ranks[v] = off.artifacts.bases[v].rank;

    std::vector<std::vector<char>> heldout(3);
    for (int v = 0; v < 3; ++v) {
        heldout[v].assign(off.snapshots.size(), 0);
        for (int i : off.datasets[v].validation_indices) heldout[v][i] = 1;
    }

    std::array<double, 3> sum_all{};
    std::array<double, 3> sum_held{};
    std::array<int, 3> n_held{};
    for (std::size_t k = 0; k < off.snapshots.size(); ++k) {
        const auto& rec = off.snapshots[k];
        const OnlineResult rom =
            online_evaluate(off.artifacts, off.mesh, rec.time);
        StudyRow row;
        row.time = rec.time;
        // splits are drawn per variable with one seed, so they coincide;
        // use the pressure mask for the row flag
        row.heldout = heldout[0][k] != 0;
        const Field fom_p = read_field(rec.path_p);
        const Field fom_u = read_field(rec.path_u);
        const Field fom_wss = read_field(rec.path_wss);
        row.error[0] = l2_relative_error(rom.p, fom_p, off.mesh);
        row.error[1] = l2_relative_error(rom.u, fom_u, off.mesh);
        row.error[2] = l2_relative_error(rom.wss, fom_wss, off.mesh);
        for (int v = 0; v < 3; ++v) {
            sum_all[v] += row.error[v];
            if (heldout[v][k]) {
                sum_held[v] += row.error[v];
                ++n_held[v];
            }
        }
        run.rows.push_back(row);
    }
    for (int v = 0; v < 3; ++v) {
        run.time_avg_error[v] = sum_all[v] / static_cast<double>(run.rows.size());
        run.heldout_avg_error[v] =
            n_held[v] > 0 ? sum_held[v] / n_held[v] : run.time_avg_error[v];
    }
    return run;
}

void write_errors_csv(const StudyRun& run, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write study errors CSV: " + path);
    out.precision(17);
    out << "time,heldout,err_p,err_u,err_wss\n";
    for (const auto& row : run.rows) {
        out << row.time << "," << (row.heldout ? 1 : 0) << "," << row.error[0]
            << "," << row.error[1] << "," << row.error[2] << "\n";
    }
}

std::string format_avg(const StudyRun& run) {
    std::ostringstream ss;
    ss.precision(4);
    ss << "p " << run.time_avg_error[0] << ", u " << run.time_avg_error[1]
       << ", wss " << run.time_avg_error[2];
    return ss.str();
}

} // namespace

StudyReport study_snapshot_convergence(const ExperimentConfig& cfg,
                                       const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir + "/reports");
    StudyReport report;
    report.runs.resize(cfg.study.snapshot_counts.size());

    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < cfg.study.snapshot_counts.size(); ++i) {
        tasks.emplace_back([&, i] {
            const int n = cfg.study.snapshot_counts[i];
            ExperimentConfig sub = cfg;
            sub.solver.snapshots_per_cycle = n;
            const std::string run_dir = out_dir + "/run_N" + std::to_string(n);
            const OfflineResult off = offline(sub, run_dir);
            report.runs[i] = evaluate_against_snapshots(off, sub, sub.pod.delta);
            write_errors_csv(report.runs[i], out_dir + "/reports/errors_N" +
                                                 std::to_string(n) + ".csv");
        });
    }
    run_parallel(tasks, worker_count());

    bool ok = true;
    std::ostringstream summary;
    for (int v = 0; v < 3; ++v) {
        double lo = report.runs[0].time_avg_error[v];
        double hi = lo;
        for (const auto& run : report.runs) {
            lo = std::min(lo, run.time_avg_error[v]);
            hi = std::max(hi, run.time_avg_error[v]);
        }
        const double ratio = lo > 0.0 ? hi / lo : 1.0;
        if (ratio > cfg.study.error_band) ok = false;
        summary << variable_name(static_cast<RomVariable>(v)) << " ratio "
                << ratio << "; ";
    }
    for (const auto& run : report.runs) {
        summary << "N=" << run.n_snapshots << ": " << format_avg(run) << "; ";
    }
    report.passed = ok;
    report.summary = summary.str();
    return report;
}

StudyReport study_mode_convergence(const ExperimentConfig& cfg,
                                   const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir + "/reports");
    StudyReport report;

    std::vector<double> deltas = cfg.study.deltas;
    std::sort(deltas.begin(), deltas.end());
    report.runs.resize(deltas.size());

    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        tasks.emplace_back([&, i] {
            ExperimentConfig sub = cfg;
            sub.pod.delta = deltas[i];
            std::ostringstream dir;
            dir << out_dir << "/run_delta" << std::fixed;
            dir.precision(2);
            dir << deltas[i];
            const OfflineResult off = offline(sub, dir.str());
            report.runs[i] = evaluate_against_snapshots(off, sub, deltas[i]);
            std::ostringstream csv;
            csv << out_dir << "/reports/errors_delta" << std::fixed;
            csv.precision(2);
            csv << deltas[i] << ".csv";
            write_errors_csv(report.runs[i], csv.str());
        });
    }
    run_parallel(tasks, worker_count());

    // non-increasing time-averaged error as delta grows, with slack for
    // runs whose rank did not change
    bool ok = true;
    std::ostringstream summary;
    for (int v = 0; v < 3; ++v) {
        for (std::size_t i = 1; i < report.runs.size(); ++i) {
            const double prev = report.runs[i - 1].time_avg_error[v];
            const double curr = report.runs[i].time_avg_error[v];
            const bool same_rank =
                report.runs[i - 1].ranks[v] == report.runs[i].ranks[v];
            const double tol = same_rank ? 1.05 : 1.0;
            if (curr > prev * tol) ok = false;
        }
    }
    for (const auto& run : report.runs) {
        summary << "delta=" << run.delta << " (L_p " << run.ranks[0] << ", L_u "
                << run.ranks[1] << ", L_wss " << run.ranks[2]
                << "): " << format_avg(run) << "; ";
    }
    report.passed = ok;
    report.summary = summary.str();
    return report;
}

SpeedupReport report_speedup(const RomArtifacts& artifacts,
                             const ExperimentConfig& cfg,
                             const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir + "/reports");
    const GeometryResult geo = make_geometry(cfg);
    if (geo.mesh.checksum() != artifacts.mesh_checksum) {
        throw InvalidArgumentError(
            "artifacts were trained on a different mesh than the config builds");
    }
    const SolverConfig solver_cfg = resolve_solver(cfg);
    const int spc = solver_cfg.steps_per_cycle();

    // warm-up cycles, then time one cycle twice
    FvSolver solver(geo.mesh, solver_cfg);
    FlowState prev = make_quiescent_state(geo.mesh);
    FlowState curr = prev;
    int step = 0;
    auto advance_cycle = [&]() {
        for (int k = 0; k < spc; ++k) {
            ++step;
            FlowState next = solver.step(curr, prev, step * solver_cfg.dt, step == 1);
            prev = std::move(curr);
            curr = std::move(next);
        }
    };
    for (int c = 0; c < std::max(1, solver_cfg.n_cycles - 1); ++c) advance_cycle();

    SpeedupReport rep;
    {
        const auto tic = std::chrono::steady_clock::now();
        advance_cycle();
        rep.fom_cycle_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
                .count();
    }
    {
        const auto tic = std::chrono::steady_clock::now();
        advance_cycle();
        rep.fom_cycle_seconds_repeat =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
                .count();
    }

    // online timing: warm-up call excluded, evaluation times spread over
    // the cycle
    const int reps = std::max(1, cfg.study.online_reps);
    (void)online_evaluate(artifacts, geo.mesh, cfg.study.eval_time);
    std::vector<double> times(reps);
    for (int i = 0; i < reps; ++i) {
        const double t = artifacts.cycle_period * (i + 1) / (reps + 1);
        times[i] = online_evaluate(artifacts, geo.mesh, t).wall_seconds;
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= reps;
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    var /= reps;
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    rep.online_mean_seconds = mean;
    rep.online_median_seconds = sorted[reps / 2];
    rep.online_stddev_seconds = std::sqrt(var);
    rep.speedup = rep.fom_cycle_seconds / std::max(mean, 1e-12);
    rep.passed = rep.speedup >= cfg.study.speedup_min;

    std::ofstream out(out_dir + "/reports/speedup.csv");
    if (!out) throw IoError("cannot write speedup report in " + out_dir);
    out.precision(17);
    out << "metric,value\n";
    out << "fom_cycle_s," << rep.fom_cycle_seconds << "\n";
    out << "fom_cycle_repeat_s," << rep.fom_cycle_seconds_repeat << "\n";
    out << "online_mean_ms," << 1e3 * rep.online_mean_seconds << "\n";
    out << "online_median_ms," << 1e3 * rep.online_median_seconds << "\n";
    out << "online_stddev_ms," << 1e3 * rep.online_stddev_seconds << "\n";
    out << "speedup," << rep.speedup << "\n";
    out << "passed," << (rep.passed ? 1 : 0) << "\n";
    return rep;
}

} // namespace romforge
