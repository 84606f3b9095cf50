// pansharp: operator CLI for the convolutional sparse fusion toolkit.
//
// Commands: synth, solve, train, infer, eval, gradcheck. Every command reads
// a sectioned key=value config (--config), writes all outputs under --out-dir,
// and drops a reproducibility record (effective config + seed + version)
// alongside them. Exit codes: 0 success, 2 config, 3 shape, 4 divergence,
// 5 I/O, 1 anything else.

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pansharp/checkpoint.hpp"
#include "pansharp/config.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/model.hpp"
#include "pansharp/network.hpp"
#include "pansharp/parallel.hpp"
#include "pansharp/raster_io.hpp"
#include "pansharp/rng.hpp"
#include "pansharp/solver.hpp"
#include "pansharp/train.hpp"
#include "pansharp/version.hpp"
#include "pansharp/wald.hpp"

namespace fs = std::filesystem;
using namespace pansharp;

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> precision;
};

RunConfig effective_config(const CliOverrides& cli) {
    RunConfig cfg = load_run_config(cli.config_path);
    if (cli.seed)
        cfg.seed = *cli.seed;
    if (cli.threads)
        cfg.threads = *cli.threads;
    if (cli.precision)
        cfg.precision = *cli.precision;
    cfg.validate();
    return cfg;
}

void write_run_record(const RunConfig& cfg, const std::string& out_dir, const std::string& cmd) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create run directory " + out_dir + ": " + ec.message());
    const fs::path path = fs::path(out_dir) / "run_record.ini";
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << "# pansharp " << kVersion << "\n# command: " << cmd << "\n"
        << serialize_run_config(cfg);
    if (!out)
        throw IoError("write failed for " + path.string());
}

std::array<int, 3> preview_bands(int bands) {
    if (bands >= 3)
        return {0, 1, 2};
    if (bands == 2)
        return {0, 1, 1};
    return {0, 0, 0};
}

std::string join(const std::string& base, const std::string& rel) {
    return (fs::path(base) / rel).string();
}

// Loads the rasters a manifest entry references, relative to the manifest.
struct LoadedSample {
    std::string id;
    MultibandImage<float> pan;
    MultibandImage<float> ms;
    MultibandImage<float> ms_up;
    MultibandImage<float> gt;
};

LoadedSample load_sample(const ManifestEntry& e, const std::string& base_dir) {
    return LoadedSample{e.id, read_raster(join(base_dir, e.pan)), read_raster(join(base_dir, e.ms)),
                        read_raster(join(base_dir, e.ms_up)), read_raster(join(base_dir, e.gt))};
}

NetworkParams<float> seeded_network(const RunConfig& cfg) {
    NetworkParams<float> params = make_network_params<float>(
        cfg.kernel_size, cfg.feature_count, cfg.ms_bands, cfg.prox_kernel, cfg.stages);
    initialize_parameters(params, cfg.seed);
    return params;
}

// --- synth ------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
    // The observation/synthesis banks that generate the data are a seeded
    // draw; they are saved as a checkpoint so solve/infer can reuse them.
    NetworkParams<float> params = seeded_network(cfg);
    save_checkpoint(params, join(out_dir, "banks.ppn"));

    SynthConfig sc;
    sc.count = cfg.count;
    sc.height = cfg.height;
    sc.width = cfg.width;
    sc.ratio = cfg.ratio;
    sc.sparsity = cfg.sparsity;
    sc.seed = cfg.seed;
    const std::string data_dir = join(out_dir, "data");
    const DatasetManifest manifest = synth_dataset(sc, params.analysis, params.synthesis, data_dir);
    validate_manifest(manifest, data_dir);

    if (!manifest.entries.empty()) {
        const MultibandImage<float> gt0 = read_raster(join(data_dir, manifest.entries[0].gt));
        export_preview(gt0, preview_bands(gt0.bands), join(out_dir, "preview_gt0.ppm"));
    }
    std::cout << "synth: wrote " << manifest.entries.size() << " samples under " << data_dir
              << "\n";
    return 0;
}

// --- solve ------------------------------------------------------------------

template <std::floating_point T>
int run_solve(const RunConfig& cfg, const std::string& out_dir) {
    if (cfg.pan.empty() || cfg.ms_up.empty() || cfg.checkpoint.empty())
        throw ConfigError("solve needs io.pan, io.ms_up and io.checkpoint");
    const NetworkParams<float> bank_params = load_checkpoint(cfg.checkpoint);

    FusionPair<T> pair{read_raster_as<T>(cfg.pan), read_raster_as<T>(cfg.ms_up)};
    AnalysisBanks<T> analysis;
    SynthesisBanks<T> synthesis;
    if constexpr (std::is_same_v<T, float>) {
        analysis = bank_params.analysis;
        synthesis = bank_params.synthesis;
    } else {
        auto convert = [](const FilterBank<float>& b) {
            FilterBank<T> out(b.size, b.in_bands, b.out_bands);
            for (std::size_t i = 0; i < b.weights.size(); ++i)
                out.weights[i] = T(b.weights[i]);
            return out;
        };
        analysis = AnalysisBanks<T>{convert(bank_params.analysis.d_common),
                                    convert(bank_params.analysis.d_unique),
                                    convert(bank_params.analysis.h_common),
                                    convert(bank_params.analysis.h_unique)};
        synthesis = SynthesisBanks<T>{convert(bank_params.synthesis.g_common),
                                      convert(bank_params.synthesis.g_unique_pan),
                                      convert(bank_params.synthesis.g_unique_ms)};
    }

    SolverConfig<T> sc;
    sc.weights = PriorWeights<T>{T(cfg.lambda_u), T(cfg.lambda_v), T(cfg.lambda_c)};
    sc.step_u = cfg.step_u;
    sc.step_v = cfg.step_v;
    sc.step_c = cfg.step_c;
    sc.max_sweeps = cfg.max_sweeps;
    sc.rel_tol = cfg.rel_tol;
    sc.track_objective = cfg.track_objective;

    auto [features, trace] = solve(pair, analysis, sc);
    const MultibandImage<T> fused = reconstruct_hrms(features, synthesis);
    write_raster_as(fused, join(out_dir, "fused.mbt"));
    export_preview(convert_image<float>(fused), preview_bands(fused.bands),
                   join(out_dir, "fused.ppm"));

    std::ofstream csv(join(out_dir, "trace.csv"), std::ios::trunc);
    csv.precision(17);
    csv << "sweep,objective\n";
    for (std::size_t i = 0; i < trace.objective_per_sweep.size(); ++i)
        csv << i << "," << trace.objective_per_sweep[i] << "\n";
    if (!csv)
        throw IoError("write failed for trace.csv");
    std::cout << "solve: " << trace.sweeps_run << " sweeps, converged="
              << (trace.converged ? "yes" : "no") << "\n";
    return 0;
}

int cmd_solve(const RunConfig& cfg, const std::string& out_dir) {
    if (cfg.precision == "f64")
        return run_solve<double>(cfg, out_dir);
    return run_solve<float>(cfg, out_dir);
}

// --- train --------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
    if (cfg.precision != "f32")
        throw ConfigError("train runs in f32 (finite-difference audits use gradcheck in f64)");
    if (cfg.manifest.empty())
        throw ConfigError("train needs io.manifest");
    const DatasetManifest manifest = read_manifest(cfg.manifest);
    if (manifest.entries.empty())
        throw ConfigError("train manifest has no entries");
    const std::string base_dir = fs::path(cfg.manifest).parent_path().string();

    std::vector<TrainSample<float>> dataset;
    dataset.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        LoadedSample s = load_sample(e, base_dir);
        dataset.push_back(
            TrainSample<float>{FusionPair<float>{std::move(s.pan), std::move(s.ms_up)},
                               std::move(s.gt)});
    }

    NetworkParams<float> params = seeded_network(cfg);
    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.decay_factor = cfg.decay_factor;
    tc.decay_every = cfg.decay_every;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.seed = cfg.seed;

    const std::vector<EpochRecord> history = train(dataset, params, tc);
    save_checkpoint(params, join(out_dir, "model.ppn"));

    std::ofstream csv(join(out_dir, "history.csv"), std::ios::trunc);
    csv.precision(17);
    csv << "epoch,mean_loss,lr\n";
    for (const auto& rec : history)
        csv << rec.epoch << "," << rec.mean_loss << "," << rec.lr << "\n";
    if (!csv)
        throw IoError("write failed for history.csv");
    std::cout << "train: " << dataset.size() << " samples, " << history.size() << " epochs";
    if (!history.empty())
        std::cout << ", final mean loss " << history.back().mean_loss;
    std::cout << "\n";
    return 0;
}

// --- infer --------------------------------------------------------------

int cmd_infer(const RunConfig& cfg, const std::string& out_dir) {
    if (cfg.checkpoint.empty())
        throw ConfigError("infer needs io.checkpoint");
    const NetworkParams<float> params = load_checkpoint(cfg.checkpoint);

    if (!cfg.manifest.empty()) {
        const DatasetManifest manifest = read_manifest(cfg.manifest);
        const std::string base_dir = fs::path(cfg.manifest).parent_path().string();
        for (const auto& e : manifest.entries) {
            LoadedSample s = load_sample(e, base_dir);
            const auto [fused, features] = network_forward(
                FusionPair<float>{std::move(s.pan), std::move(s.ms_up)}, params);
            write_raster(fused, join(out_dir, "fused_" + e.id + ".mbt"));
        }
        std::cout << "infer: fused " << manifest.entries.size() << " samples\n";
        return 0;
    }

    if (cfg.pan.empty())
        throw ConfigError("infer needs io.pan (plus io.ms_up or io.ms)");
    MultibandImage<float> pan = read_raster(cfg.pan);
    MultibandImage<float> ms_up = [&] {
        if (!cfg.ms_up.empty())
            return read_raster(cfg.ms_up);
        if (cfg.ms.empty())
            throw ConfigError("infer needs io.ms_up or io.ms");
        return exp_upsample(read_raster(cfg.ms), cfg.ratio);
    }();
    const auto [fused, features] =
        network_forward(FusionPair<float>{std::move(pan), std::move(ms_up)}, params);
    write_raster(fused, join(out_dir, "fused.mbt"));
    export_preview(fused, preview_bands(fused.bands), join(out_dir, "fused.ppm"));
    std::cout << "infer: wrote fused " << fused.dims_str() << "\n";
    return 0;
}

// --- eval ---------------------------------------------------------------

void write_reports(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                   const std::string& out_dir) {
    std::ofstream csv(join(out_dir, "report.csv"), std::ios::trunc);
    std::ofstream jsonl(join(out_dir, "report.jsonl"), std::ios::trunc);
    csv << metrics_csv_header() << "\n";
    for (const auto& [id, rep] : rows) {
        csv << to_csv_row(id, rep) << "\n";
        jsonl << to_json_line(id, rep) << "\n";
    }
    if (!csv || !jsonl)
        throw IoError("write failed for evaluation reports");
}

int cmd_eval(const RunConfig& cfg, const std::string& out_dir) {
    std::vector<std::pair<std::string, MetricsReport>> rows;

    if (!cfg.manifest.empty()) {
        // Batch mode over a manifest: score the fused rasters (io.fused names
        // the directory written by `infer`) and the EXP interpolation
        // baseline against the reference, then append mean/std rows.
        if (cfg.fused.empty())
            throw ConfigError("manifest eval needs io.fused (directory of fused rasters)");
        const DatasetManifest manifest = read_manifest(cfg.manifest);
        if (manifest.entries.empty())
            throw ConfigError("eval manifest has no entries");
        const std::string base_dir = fs::path(cfg.manifest).parent_path().string();
        std::vector<MetricsReport> model_reports, exp_reports;
        for (const auto& e : manifest.entries) {
            LoadedSample s = load_sample(e, base_dir);
            const MultibandImage<float> fused =
                read_raster(join(cfg.fused, "fused_" + e.id + ".mbt"));
            const MultibandImage<float> exp = exp_upsample(s.ms, manifest.ratio);
            model_reports.push_back(evaluate_reduced(fused, s.gt, manifest.ratio));
            exp_reports.push_back(evaluate_reduced(exp, s.gt, manifest.ratio));
            rows.emplace_back(e.id + ":model", model_reports.back());
            rows.emplace_back(e.id + ":exp", exp_reports.back());
        }
        const MetricsAggregate am = aggregate_reports(model_reports);
        const MetricsAggregate ae = aggregate_reports(exp_reports);
        rows.emplace_back("mean:model", am.mean);
        rows.emplace_back("std:model", am.stddev);
        rows.emplace_back("mean:exp", ae.mean);
        rows.emplace_back("std:exp", ae.stddev);
        write_reports(rows, out_dir);
        std::cout << "eval: " << manifest.entries.size() << " samples"
                  << "; model sam=" << *am.mean.sam_degrees << " ergas=" << *am.mean.ergas_index
                  << " scc=" << *am.mean.scc_index << "; exp sam=" << *ae.mean.sam_degrees
                  << " ergas=" << *ae.mean.ergas_index << " scc=" << *ae.mean.scc_index << "\n";
        return 0;
    }

    if (cfg.fused.empty())
        throw ConfigError("eval needs io.fused");
    const MultibandImage<float> fused = read_raster(cfg.fused);
    if (!cfg.reference.empty()) {
        const MultibandImage<float> reference = read_raster(cfg.reference);
        rows.emplace_back("fused", evaluate_reduced(fused, reference, cfg.ratio));
    } else {
        if (cfg.ms_up.empty() || cfg.ms.empty() || cfg.pan.empty())
            throw ConfigError("full-resolution eval needs io.ms_up, io.ms and io.pan");
        const MultibandImage<float> ms_up = read_raster(cfg.ms_up);
        const MultibandImage<float> ms = read_raster(cfg.ms);
        const MultibandImage<float> pan = read_raster(cfg.pan);
        const MultibandImage<float> pan_lr = blur_decimate(pan, cfg.ratio);
        rows.emplace_back("fused", evaluate_full(fused, ms_up, ms, pan, pan_lr));
    }
    write_reports(rows, out_dir);
    std::cout << "eval: " << to_csv_row(rows[0].first, rows[0].second) << "\n";
    return 0;
}

// --- gradcheck ------------------------------------------------------------

int cmd_gradcheck(const RunConfig& cfg, const std::string& out_dir) {
    if (cfg.precision != "f64")
        throw ConfigError("gradcheck requires f64 (finite differences drown in f32 noise)");
    // Small fixed spatial dims keep the 2*samples forward re-evaluations fast
    // while exercising every parameter tensor.
    const int hgt = 12, wid = 12;
    NetworkParams<double> params = make_network_params<double>(
        cfg.kernel_size, cfg.feature_count, cfg.ms_bands, cfg.prox_kernel, cfg.stages);
    initialize_parameters(params, cfg.seed);

    Rng rng(substream_seed(cfg.seed, 1));
    FusionPair<double> pair{MultibandImage<double>(hgt, wid, 1),
                            MultibandImage<double>(hgt, wid, cfg.ms_bands)};
    MultibandImage<double> truth(hgt, wid, cfg.ms_bands);
    for (auto* img : {&pair.pan, &pair.ms_up, &truth})
        for (double& v : img->samples)
            v = rng.normal();

    const int samples = 200;
    const double h = 1e-5, threshold = 1e-4;
    const double worst = finite_diff_check(pair, truth, params, samples, h, cfg.seed);
    const bool pass = worst <= threshold;

    std::ofstream csv(join(out_dir, "gradcheck.csv"), std::ios::trunc);
    csv.precision(17);
    csv << "samples,perturbation,max_rel_error,threshold,pass\n"
        << samples << "," << h << "," << worst << "," << threshold << ","
        << (pass ? "true" : "false") << "\n";
    if (!csv)
        throw IoError("write failed for gradcheck.csv");
    std::cout << "gradcheck: max relative error " << worst << " over " << samples
              << " sampled parameters -> " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convolutional sparse fusion toolkit"};
    app.require_subcommand(1);

    CliOverrides cli;
    std::uint64_t seed_flag = 0;
    int threads_flag = 1;
    std::string precision_flag;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "run configuration file")->required();
        sub->add_option("--out-dir", cli.out_dir, "directory for all outputs")->required();
        sub->add_option("--seed", seed_flag, "override run.seed")->each([&](const std::string&) {
            cli.seed = seed_flag;
        });
        sub->add_option("--threads", threads_flag, "override run.threads")
            ->each([&](const std::string&) { cli.threads = threads_flag; });
        sub->add_option("--precision", precision_flag, "override run.precision (f32|f64)")
            ->each([&](const std::string&) { cli.precision = precision_flag; });
    };

    for (const char* name : {"synth", "solve", "train", "infer", "eval", "gradcheck"})
        add_common(app.add_subcommand(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // command-line problems are config errors
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        const RunConfig cfg = effective_config(cli);
        set_thread_count(cfg.threads);
        write_run_record(cfg, cli.out_dir, cmd);
        if (cmd == "synth")
            return cmd_synth(cfg, cli.out_dir);
        if (cmd == "solve")
            return cmd_solve(cfg, cli.out_dir);
        if (cmd == "train")
            return cmd_train(cfg, cli.out_dir);
        if (cmd == "infer")
            return cmd_infer(cfg, cli.out_dir);
        if (cmd == "eval")
            return cmd_eval(cfg, cli.out_dir);
        if (cmd == "gradcheck")
            return cmd_gradcheck(cfg, cli.out_dir);
        std::cerr << "unknown command " << cmd << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error (" << cmd << "): " << e.what() << "\n";
        return int(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error (" << cmd << "): " << e.what() << "\n";
        return 1;
    }
}
