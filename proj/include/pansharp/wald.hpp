#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pansharp/errors.hpp"
#include "pansharp/model.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

namespace detail {

// Normalized 1-D Gaussian taps for the degradation filter; sigma follows the
// resolution ratio (1.7 at ratio 4, proportional otherwise).
inline std::vector<double> gaussian_taps(int ratio) {
    const double sigma = 1.7 * double(ratio) / 4.0;
    const int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> taps(std::size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-double(i) * i / (2.0 * sigma * sigma));
        taps[std::size_t(i + radius)] = w;
        sum += w;
    }
    for (double& w : taps)
        w /= sum;
    return taps;
}

} // namespace detail

// Wald-protocol degradation: separable normalized Gaussian blur (replicate
// boundary, so constants are preserved exactly) followed by taking every
// ratio-th sample starting at offset 0.
template <std::floating_point T>
MultibandImage<T> blur_decimate(const MultibandImage<T>& img, int ratio) {
    if (ratio < 1)
        throw ConfigError("blur_decimate requires ratio >= 1");
    if (img.height % ratio != 0 || img.width % ratio != 0)
        throw ShapeError("blur_decimate: dims " + img.dims_str() + " not divisible by ratio " +
                         std::to_string(ratio));
    const std::vector<double> taps = detail::gaussian_taps(ratio);
    const int radius = int(taps.size() / 2);

    // horizontal pass
    std::vector<double> tmp(img.samples.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int b = 0; b < img.bands; ++b) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, img.width - 1);
                    acc += taps[std::size_t(i + radius)] * double(img.at(y, xx, b));
                }
                tmp[(std::size_t(y) * img.width + std::size_t(x)) * std::size_t(img.bands) +
                    std::size_t(b)] = acc;
            }
    // vertical pass + decimation
    MultibandImage<T> out(img.height / ratio, img.width / ratio, img.bands);
    for (int oy = 0; oy < out.height; ++oy)
        for (int ox = 0; ox < out.width; ++ox)
            for (int b = 0; b < img.bands; ++b) {
                const int y = oy * ratio, x = ox * ratio;
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, img.height - 1);
                    acc += taps[std::size_t(i + radius)] *
                           tmp[(std::size_t(yy) * img.width + std::size_t(x)) *
                                   std::size_t(img.bands) +
                               std::size_t(b)];
                }
                out.at(oy, ox, b) = T(acc);
            }
    return out;
}

namespace detail {

// One dyadic upsampling stage along rows: even outputs copy the input, odd
// outputs interpolate with the 4-tap piecewise-cubic kernel (a = -0.5),
// boundary indices clamped. Tap sum is 1, so constants are preserved.
template <std::floating_point T>
MultibandImage<T> upsample_rows_2x(const MultibandImage<T>& img) {
    MultibandImage<T> out(img.height * 2, img.width, img.bands);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int b = 0; b < img.bands; ++b) {
                const auto sample = [&](int yy) {
                    return double(img.at(std::clamp(yy, 0, img.height - 1), x, b));
                };
                out.at(2 * y, x, b) = img.at(y, x, b);
                out.at(2 * y + 1, x, b) =
                    T(-0.0625 * sample(y - 1) + 0.5625 * sample(y) + 0.5625 * sample(y + 1) -
                      0.0625 * sample(y + 2));
            }
    return out;
}

template <std::floating_point T>
MultibandImage<T> upsample_cols_2x(const MultibandImage<T>& img) {
    MultibandImage<T> out(img.height, img.width * 2, img.bands);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int b = 0; b < img.bands; ++b) {
                const auto sample = [&](int xx) {
                    return double(img.at(y, std::clamp(xx, 0, img.width - 1), b));
                };
                out.at(y, 2 * x, b) = img.at(y, x, b);
                out.at(y, 2 * x + 1, b) =
                    T(-0.0625 * sample(x - 1) + 0.5625 * sample(x) + 0.5625 * sample(x + 1) -
                      0.0625 * sample(x + 2));
            }
    return out;
}

} // namespace detail

// EXP interpolation baseline: repeated dyadic piecewise-cubic doubling until
// the requested (power-of-two) ratio is reached.
template <std::floating_point T>
MultibandImage<T> exp_upsample(const MultibandImage<T>& ms, int ratio) {
    if (ratio < 1 || (ratio & (ratio - 1)) != 0)
        throw ConfigError("exp_upsample supports power-of-two ratios, got " +
                          std::to_string(ratio));
    MultibandImage<T> cur = ms;
    for (int r = ratio; r > 1; r /= 2)
        cur = detail::upsample_cols_2x(detail::upsample_rows_2x(cur));
    return cur;
}

// The four rasters of one reduced-resolution sample.
template <std::floating_point T>
struct ReducedPair {
    MultibandImage<T> pan;    // working-scale PAN input
    MultibandImage<T> ms;     // degraded MS at native (1/ratio) scale
    MultibandImage<T> ms_up;  // EXP-upsampled MS back at working scale
    MultibandImage<T> gt;     // reference the fusion should reproduce
};

// Wald-protocol sample construction: the supplied reference becomes the
// ground truth, its degraded version the MS input, and the supplied PAN is
// used as-is at the working scale.
template <std::floating_point T>
ReducedPair<T> make_reduced_pair(const MultibandImage<T>& hrms_gt, const MultibandImage<T>& pan_hr,
                                 int ratio) {
    if (pan_hr.bands != 1)
        throw ShapeError("make_reduced_pair: pan must be single-band, got " + pan_hr.dims_str());
    if (pan_hr.height != hrms_gt.height || pan_hr.width != hrms_gt.width)
        throw ShapeError("make_reduced_pair: pan " + pan_hr.dims_str() + " and reference " +
                         hrms_gt.dims_str() + " differ in spatial dims");
    ReducedPair<T> out;
    out.gt = hrms_gt;
    out.pan = pan_hr;
    out.ms = blur_decimate(hrms_gt, ratio);
    out.ms_up = exp_upsample(out.ms, ratio);
    return out;
}

// --- synthetic dataset ------------------------------------------------------

struct ManifestEntry {
    std::string id;
    std::string pan;
    std::string ms;
    std::string ms_up;
    std::string gt;
    std::string split;  // "train" / "test" / "" (unsplit)
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    int ratio = 4;
    std::uint64_t seed = 0;
};

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Checks that every referenced raster exists and that the spatial-dimension
// contract holds (PAN and ms_up at ratio x MS scale, band counts consistent).
void validate_manifest(const DatasetManifest& manifest, const std::string& base_dir);

struct SynthConfig {
    int count = 8;
    int height = 64;  // working-scale dims; must be divisible by ratio
    int width = 64;
    int ratio = 4;
    double sparsity = 0.3;  // probability of a nonzero feature entry
    std::uint64_t seed = 0;
};

// Draws Bernoulli-Gaussian feature triples, synthesizes PAN and the upsampled
// MS through the observation banks and the reference through the synthesis
// banks, derives the native-scale MS by degradation, writes all rasters under
// out_dir, and returns the manifest (also written as manifest.jsonl).
DatasetManifest synth_dataset(const SynthConfig& cfg, const AnalysisBanks<float>& analysis,
                              const SynthesisBanks<float>& synthesis, const std::string& out_dir);

// Seeded shuffle followed by a fraction split into (train, test); disjoint and
// exhaustive.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          double fraction, std::uint64_t seed);

} // namespace pansharp
