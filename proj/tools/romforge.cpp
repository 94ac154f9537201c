// romforge: reduced-order model toolkit for pulsatile channel flow with a
// parametric stenosis. Offline: FFD-deformed geometry -> finite-volume
// Navier-Stokes snapshots -> POD bases -> coefficient regressors.
// Online: near-instant field reconstruction at any cycle time.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "romforge/config.hpp"
#include "romforge/field_io.hpp"
#include "romforge/pipeline.hpp"

namespace fs = std::filesystem;
using namespace romforge;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool quiet = false;

    ExperimentConfig load() const {
        ExperimentConfig cfg = load_experiment_config(config_path);
        if (seed_set) {
            cfg.seed = seed;
            for (auto& a : cfg.ann) a.seed = seed;
        }
        return cfg;
    }
    std::ostream& log() const {
        static std::ofstream devnull;
        if (quiet) {
            if (!devnull.is_open()) devnull.open("/dev/null");
            return devnull;
        }
        return std::cout;
    }
};

void add_global_opts(CLI::App* cmd, GlobalOpts& g) {
    cmd->add_option("--config", g.config_path, "experiment config file")
        ->required();
    cmd->add_option("--out-dir", g.out_dir, "output directory (default: out)");
    auto* seed_opt = cmd->add_option("--seed", g.seed, "override the config seed");
    cmd->callback([&g, seed_opt] { g.seed_set = seed_opt->count() > 0; });
    cmd->add_flag("--quiet", g.quiet, "suppress progress output");
}

void cmd_mesh(const GlobalOpts& g) {
    const ExperimentConfig cfg = g.load();
    const StructuredMesh mesh = build_channel_mesh(
        cfg.mesh.length, cfg.mesh.height, cfg.mesh.nx, cfg.mesh.ny);
    fs::create_directories(g.out_dir + "/fields");
    Field volumes = Field::zeros(FieldKind::Scalar, mesh);
    for (int c = 0; c < mesh.n_cells(); ++c) volumes.values[c] = mesh.cell_volumes[c];
    write_vtk(g.out_dir + "/fields/mesh.vtk", mesh, volumes, "cell_volume");
    g.log() << "mesh: " << mesh.n_cells() << " cells, " << mesh.n_faces()
            << " faces, " << mesh.n_boundary_faces()
            << " boundary faces, checksum " << mesh.checksum() << "\n";
    g.log() << "wrote " << g.out_dir << "/fields/mesh.vtk\n";
}

void cmd_deform(const GlobalOpts& g) {
    const ExperimentConfig cfg = g.load();
    const GeometryResult geo = make_geometry(cfg);
    fs::create_directories(g.out_dir + "/fields");
    fs::create_directories(g.out_dir + "/reports");
    Field volumes = Field::zeros(FieldKind::Scalar, geo.mesh);
    for (int c = 0; c < geo.mesh.n_cells(); ++c) {
        volumes.values[c] = geo.mesh.cell_volumes[c];
    }
    write_vtk(g.out_dir + "/fields/mesh_deformed.vtk", geo.mesh, volumes,
              "cell_volume");
    write_quality_csv(geo.quality, g.out_dir + "/reports/mesh_quality.csv");
    save_lattice(geo.lattice, g.out_dir + "/reports/lattice.json");
    g.log() << "deformed mesh: severity " << cfg.ffd.severity << ", min volume "
            << geo.quality.min_volume << ", max non-orthogonality "
            << geo.quality.max_nonorthogonality_deg << " deg, max skewness "
            << geo.quality.max_skewness << "\n";
}

void cmd_simulate(const GlobalOpts& g) {
    const ExperimentConfig cfg = g.load();
    const GeometryResult geo = make_geometry(cfg);
    SolverConfig solver_cfg = cfg.solver;
    solver_cfg.waveform = cfg.make_waveform();
    const auto records =
        run_cycles_to_dir(geo.mesh, solver_cfg, g.out_dir + "/snapshots");
    g.log() << "simulated " << cfg.solver.n_cycles << " cycles, wrote "
            << records.size() << " snapshots to " << g.out_dir << "/snapshots\n";
}

std::vector<Field> load_variable_fields(const std::vector<SnapshotRecord>& recs,
                                        RomVariable v) {
    std::vector<Field> fields;
    fields.reserve(recs.size());
    for (const auto& r : recs) {
        const std::string& path = v == RomVariable::Pressure ? r.path_p
                                  : v == RomVariable::Velocity ? r.path_u
                                                               : r.path_wss;
        fields.push_back(read_field(path));
    }
    return fields;
}

void cmd_pod(const GlobalOpts& g) {
    const ExperimentConfig cfg = g.load();
    const auto records =
        read_snapshot_manifest(g.out_dir + "/snapshots/manifest.csv");
    fs::create_directories(g.out_dir + "/basis");
    fs::create_directories(g.out_dir + "/reports");
    for (RomVariable v :
         {RomVariable::Pressure, RomVariable::Velocity, RomVariable::Wss}) {
        const auto fields = load_variable_fields(records, v);
        const SnapshotMatrix S = assemble_snapshots(fields, v);
        PodBasis basis =
            compute_pod(S, cfg.pod.eps_rank, cfg.pod.method, cfg.pod.center);
        basis = truncate(basis, cfg.pod.delta, cfg.pod.criterion);
        const std::string name = variable_name(v);
        save_basis(basis, g.out_dir + "/basis/basis_" + name + ".bin");
        write_spectrum_csv(basis, g.out_dir + "/reports/spectrum_" + name + ".csv");
        g.log() << name << ": rank " << basis.rank << " at delta "
                << cfg.pod.delta << " (spectrum length "
                << basis.singular_values.size() << ")\n";
    }
}

void cmd_train(const GlobalOpts& g) {
    const ExperimentConfig cfg = g.load();
    const auto records =
        read_snapshot_manifest(g.out_dir + "/snapshots/manifest.csv");
    fs::create_directories(g.out_dir + "/models");
    fs::create_directories(g.out_dir + "/reports");

    RomArtifacts art;
    art.config_hash = cfg.config_hash;
    art.seed = cfg.seed;
    art.cycle_period = cfg.solver.T;
    for (RomVariable v :
         {RomVariable::Pressure, RomVariable::Velocity, RomVariable::Wss}) {
        const int vi = static_cast<int>(v);
        const std::string name = variable_name(v);
        PodBasis basis = load_basis(g.out_dir + "/basis/basis_" + name + ".bin");
        const auto fields = load_variable_fields(records, v);
        const SnapshotMatrix S = assemble_snapshots(fields, v);

        CoefficientDataset ds;
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
        const TrainHistory hist = train(model, ds, tcfg);
        write_loss_csv(hist, g.out_dir + "/reports/loss_" + name + ".csv");
        g.log() << name << ": final train loss " << hist.train_loss.back()
                << ", val loss " << hist.val_loss.back() << "\n";
        art.mesh_checksum = basis.mesh_checksum;
        art.bases[vi] = std::move(basis);
        art.models[vi] = std::move(model);
    }
    save_artifacts(art, g.out_dir);
    g.log() << "artifacts saved under " << g.out_dir << "\n";
}

void cmd_offline(const GlobalOpts& g) {
    const ExperimentConfig cfg = g.load();
    const OfflineResult result = offline(cfg, g.out_dir);
    for (RomVariable v :
         {RomVariable::Pressure, RomVariable::Velocity, RomVariable::Wss}) {
        const int vi = static_cast<int>(v);
        g.log() << variable_name(v) << ": rank " << result.artifacts.bases[vi].rank
                << ", final train loss " << result.histories[vi].train_loss.back()
                << "\n";
    }
    g.log() << "offline artifacts saved under " << g.out_dir << "\n";
}

void cmd_evaluate(const GlobalOpts& g, double time) {
    const ExperimentConfig cfg = g.load();
    const GeometryResult geo = make_geometry(cfg);
    const RomArtifacts art = load_artifacts(g.out_dir);
    const OnlineResult rom = online_evaluate(art, geo.mesh, time);
    if (rom.extrapolated) {
        std::cerr << "warning: t = " << time
                  << " lies outside the training cycle [0, " << art.cycle_period
                  << "]; extrapolating\n";
    }
    fs::create_directories(g.out_dir + "/fields");
    char tag[32];
    std::snprintf(tag, sizeof(tag), "t%.6g", time);
    const std::string base = g.out_dir + "/fields/eval_";
    write_field(base + "p_" + tag + ".bin", rom.p);
    write_field(base + "u_" + tag + ".bin", rom.u);
    write_field(base + "wss_" + tag + ".bin", rom.wss);
    write_vtk(base + "p_" + tag + ".vtk", geo.mesh, rom.p, "p");
    write_vtk(base + "u_" + tag + ".vtk", geo.mesh, rom.u, "U");
    g.log() << "evaluated ROM at t = " << time << " in "
            << 1e3 * rom.wall_seconds << " ms; fields under " << g.out_dir
            << "/fields\n";
}

void cmd_study(const GlobalOpts& g, const std::string& kind) {
    const ExperimentConfig cfg = g.load();
    StudyReport report;
    if (kind == "snapshots") {
        report = study_snapshot_convergence(cfg, g.out_dir);
    } else if (kind == "modes") {
        report = study_mode_convergence(cfg, g.out_dir);
    } else {
        throw ConfigError("study kind must be snapshots or modes");
    }
    g.log() << "study (" << kind << "): " << (report.passed ? "PASS" : "FAIL")
            << "\n" << report.summary << "\n";
    if (!report.passed) throw Error("study check failed: " + report.summary);
}

void cmd_report(const GlobalOpts& g) {
    const ExperimentConfig cfg = g.load();
    const RomArtifacts art = load_artifacts(g.out_dir);
    const SpeedupReport rep = report_speedup(art, cfg, g.out_dir);
    g.log() << "FOM cycle: " << rep.fom_cycle_seconds << " s (repeat "
            << rep.fom_cycle_seconds_repeat << " s)\n";
    g.log() << "online evaluate: mean " << 1e3 * rep.online_mean_seconds
            << " ms, median " << 1e3 * rep.online_median_seconds << " ms, stddev "
            << 1e3 * rep.online_stddev_seconds << " ms\n";
    g.log() << "speedup: " << rep.speedup << " ("
            << (rep.passed ? "PASS" : "FAIL") << " at threshold "
            << cfg.study.speedup_min << ")\n";
    if (!rep.passed) throw Error("speedup below the configured threshold");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"romforge: POD + neural-network reduced-order models for "
                 "pulsatile stenosed-channel flow"};
    app.require_subcommand(1);

    GlobalOpts g;
    double eval_time = 0.0;
    std::string study_kind;

    add_global_opts(app.add_subcommand("mesh", "build the channel mesh"), g);
    add_global_opts(
        app.add_subcommand("deform", "apply the FFD stenosis to the mesh"), g);
    add_global_opts(
        app.add_subcommand("simulate", "run the full-order solver and write snapshots"),
        g);
    add_global_opts(
        app.add_subcommand("pod", "compute POD bases from stored snapshots"), g);
    add_global_opts(
        app.add_subcommand("train", "train coefficient networks from stored bases"),
        g);
    add_global_opts(
        app.add_subcommand("offline", "full offline pipeline (simulate+pod+train)"),
        g);
    auto* eval_cmd =
        app.add_subcommand("evaluate", "reconstruct fields at a cycle time");
    add_global_opts(eval_cmd, g);
    eval_cmd->add_option("--time", eval_time, "evaluation time in [0, T]")
        ->required();
    auto* study_cmd = app.add_subcommand("study", "convergence studies");
    add_global_opts(study_cmd, g);
    study_cmd->add_option("--kind", study_kind, "snapshots | modes")->required();
    add_global_opts(app.add_subcommand("report", "measure the FOM/ROM speedup"),
                    g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("mesh")) {
            cmd_mesh(g);
        } else if (app.got_subcommand("deform")) {
            cmd_deform(g);
        } else if (app.got_subcommand("simulate")) {
            cmd_simulate(g);
        } else if (app.got_subcommand("pod")) {
            cmd_pod(g);
        } else if (app.got_subcommand("train")) {
            cmd_train(g);
        } else if (app.got_subcommand("offline")) {
            cmd_offline(g);
        } else if (app.got_subcommand("evaluate")) {
            cmd_evaluate(g, eval_time);
        } else if (app.got_subcommand("study")) {
            cmd_study(g, study_kind);
        } else if (app.got_subcommand("report")) {
            cmd_report(g);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
