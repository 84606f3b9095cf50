#include "pansharp/wald.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pansharp/raster_io.hpp"
#include "pansharp/rng.hpp"

namespace fs = std::filesystem;

namespace pansharp {

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    for (const auto& e : manifest.entries) {
        nlohmann::json rec = {
            {"id", e.id},       {"pan", e.pan},     {"ms", e.ms},
            {"ms_up", e.ms_up}, {"gt", e.gt},       {"split", e.split},
            {"ratio", manifest.ratio},              {"seed", manifest.seed},
        };
        out << rec.dump() << "\n";
    }
    if (!out)
        throw IoError("write failed for " + path);
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path + " for reading");
    DatasetManifest manifest;
    std::string line;
    int line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": malformed manifest line: " +
                          e.what());
        }
        try {
            ManifestEntry entry;
            entry.id = rec.at("id").get<std::string>();
            entry.pan = rec.at("pan").get<std::string>();
            entry.ms = rec.at("ms").get<std::string>();
            entry.ms_up = rec.at("ms_up").get<std::string>();
            entry.gt = rec.at("gt").get<std::string>();
            entry.split = rec.value("split", std::string());
            const int ratio = rec.at("ratio").get<int>();
            const std::uint64_t seed = rec.at("seed").get<std::uint64_t>();
            if (first) {
                manifest.ratio = ratio;
                manifest.seed = seed;
                first = false;
            } else if (ratio != manifest.ratio) {
                throw IoError(path + ":" + std::to_string(line_no) +
                              ": manifest mixes resolution ratios");
            }
            manifest.entries.push_back(std::move(entry));
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": manifest line missing fields: " +
                          e.what());
        }
    }
    return manifest;
}

void validate_manifest(const DatasetManifest& manifest, const std::string& base_dir) {
    for (const auto& e : manifest.entries) {
        const auto dims_of = [&](const std::string& rel) {
            return read_raster_dims((fs::path(base_dir) / rel).string());
        };
        const RasterDims pan = dims_of(e.pan);
        const RasterDims ms = dims_of(e.ms);
        const RasterDims ms_up = dims_of(e.ms_up);
        const RasterDims gt = dims_of(e.gt);
        if (pan.bands != 1)
            throw ShapeError("manifest entry " + e.id + ": pan is not single-band");
        if (pan.height != ms.height * manifest.ratio || pan.width != ms.width * manifest.ratio)
            throw ShapeError("manifest entry " + e.id + ": pan dims are not ratio x ms dims");
        if (ms_up.height != pan.height || ms_up.width != pan.width || ms_up.bands != ms.bands)
            throw ShapeError("manifest entry " + e.id + ": ms_up dims inconsistent");
        if (gt.height != pan.height || gt.width != pan.width || gt.bands != ms.bands)
            throw ShapeError("manifest entry " + e.id + ": gt dims inconsistent");
    }
}

DatasetManifest synth_dataset(const SynthConfig& cfg, const AnalysisBanks<float>& analysis,
                              const SynthesisBanks<float>& synthesis, const std::string& out_dir) {
    if (cfg.count < 0 || cfg.height < 1 || cfg.width < 1)
        throw ConfigError("synth_dataset requires count >= 0 and positive dims");
    if (cfg.ratio < 1 || cfg.height % cfg.ratio != 0 || cfg.width % cfg.ratio != 0)
        throw ConfigError("synth_dataset dims must be divisible by the ratio");
    if (!(cfg.sparsity > 0.0) || cfg.sparsity > 1.0)
        throw ConfigError("synth_dataset sparsity must be in (0, 1]");
    analysis.validate();
    synthesis.validate();

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create dataset directory " + out_dir + ": " + ec.message());

    DatasetManifest manifest;
    manifest.ratio = cfg.ratio;
    manifest.seed = cfg.seed;
    const int k = analysis.feature_count();
    for (int i = 0; i < cfg.count; ++i) {
        // Independent substream per sample: adding samples never reshuffles
        // the earlier ones.
        Rng rng(substream_seed(cfg.seed, std::uint64_t(i)));
        FeatureTriple<float> f = FeatureTriple<float>::zeros(cfg.height, cfg.width, k);
        for (FeatureStack<float>* stack : {&f.c, &f.u, &f.v})
            for (float& v : stack->maps)
                v = rng.bernoulli(cfg.sparsity) ? float(rng.normal()) : 0.0f;

        const MultibandImage<float> pan = synthesize_pan(f.c, f.u, analysis);
        const MultibandImage<float> ms_up = synthesize_ms(f.c, f.v, analysis);
        const MultibandImage<float> gt = reconstruct_hrms(f, synthesis);
        const MultibandImage<float> ms = blur_decimate(ms_up, cfg.ratio);

        ManifestEntry entry;
        entry.id = "sample" + std::to_string(i);
        entry.pan = entry.id + "_pan.mbt";
        entry.ms = entry.id + "_ms.mbt";
        entry.ms_up = entry.id + "_msup.mbt";
        entry.gt = entry.id + "_gt.mbt";
        write_raster(pan, (fs::path(out_dir) / entry.pan).string());
        write_raster(ms, (fs::path(out_dir) / entry.ms).string());
        write_raster(ms_up, (fs::path(out_dir) / entry.ms_up).string());
        write_raster(gt, (fs::path(out_dir) / entry.gt).string());
        manifest.entries.push_back(std::move(entry));
    }
    write_manifest(manifest, (fs::path(out_dir) / "manifest.jsonl").string());
    return manifest;
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          double fraction, std::uint64_t seed) {
    if (manifest.entries.empty())
        throw ConfigError("split_dataset: empty manifest");
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw ConfigError("split_dataset fraction must be in (0, 1)");
    std::vector<std::size_t> order(manifest.entries.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[std::size_t(rng.below(std::uint64_t(i)))]);

    const auto n_train = std::size_t(std::llround(fraction * double(order.size())));
    DatasetManifest train, test;
    train.ratio = test.ratio = manifest.ratio;
    train.seed = test.seed = manifest.seed;
    for (std::size_t i = 0; i < order.size(); ++i) {
        ManifestEntry e = manifest.entries[order[i]];
        e.split = i < n_train ? "train" : "test";
        (i < n_train ? train : test).entries.push_back(std::move(e));
    }
    return {std::move(train), std::move(test)};
}

} // namespace pansharp
