#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "pansharp/errors.hpp"

namespace pansharp {

/// Multiband raster: row-major, band-interleaved by pixel.
/// samples[(y * width + x) * bands + b]
template <std::floating_point T>
struct MultibandImage {
    int height = 0;
    int width = 0;
    int bands = 0;
    std::vector<T> samples;

    MultibandImage() = default;

    MultibandImage(int h, int w, int b, T fill = T(0)) : height(h), width(w), bands(b) {
        if (h < 1 || w < 1 || b < 1)
            throw ShapeError("MultibandImage: dims must be positive, got " + dims_str(h, w, b));
        samples.assign(static_cast<std::size_t>(h) * w * b, fill);
    }

    MultibandImage(int h, int w, int b, std::vector<T> data) : height(h), width(w), bands(b), samples(std::move(data)) {
        if (h < 1 || w < 1 || b < 1)
            throw ShapeError("MultibandImage: dims must be positive, got " + dims_str(h, w, b));
        if (samples.size() != static_cast<std::size_t>(h) * w * b)
            throw ShapeError("MultibandImage: sample count " + std::to_string(samples.size()) +
                             " does not match dims " + dims_str(h, w, b));
    }

    int channels() const { return bands; }
    std::size_t size() const { return samples.size(); }

    T& at(int y, int x, int b) { return samples[(static_cast<std::size_t>(y) * width + x) * bands + b]; }
    T at(int y, int x, int b) const { return samples[(static_cast<std::size_t>(y) * width + x) * bands + b]; }

    static std::string dims_str(int h, int w, int b) {
        return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(b);
    }
    std::string dims_str() const { return dims_str(height, width, bands); }
};

/// Stack of single-band feature maps sharing one spatial grid.
/// maps[(y * width + x) * count + k]
template <std::floating_point T>
struct FeatureStack {
    int height = 0;
    int width = 0;
    int count = 0;
    std::vector<T> maps;

    FeatureStack() = default;

    FeatureStack(int h, int w, int k, T fill = T(0)) : height(h), width(w), count(k) {
        if (h < 1 || w < 1 || k < 1)
            throw ShapeError("FeatureStack: dims must be positive");
        maps.assign(static_cast<std::size_t>(h) * w * k, fill);
    }

    FeatureStack(int h, int w, int k, std::vector<T> data) : height(h), width(w), count(k), maps(std::move(data)) {
        if (h < 1 || w < 1 || k < 1)
            throw ShapeError("FeatureStack: dims must be positive");
        if (maps.size() != static_cast<std::size_t>(h) * w * k)
            throw ShapeError("FeatureStack: map count does not match dims");
    }

    int channels() const { return count; }
    std::size_t size() const { return maps.size(); }

    std::string dims_str() const {
        return "(" + std::to_string(height) + "," + std::to_string(width) + "," +
               std::to_string(count) + ")";
    }

    T& at(int y, int x, int k) { return maps[(static_cast<std::size_t>(y) * width + x) * count + k]; }
    T at(int y, int x, int k) const { return maps[(static_cast<std::size_t>(y) * width + x) * count + k]; }
};

/// K stacked kernels, stored as a dense conv weight tensor.
/// Layout: weights[((o * in_bands + ci) * size + ky) * size + kx].
/// in_bands is the channel count of the grid the bank is applied to (the K of
/// an analysis/synthesis bank), out_bands the channel count it produces.
template <std::floating_point T>
struct FilterBank {
    int size = 0;
    int in_bands = 0;
    int out_bands = 0;
    std::vector<T> weights;

    FilterBank() = default;

    FilterBank(int s, int in, int out, T fill = T(0)) : size(s), in_bands(in), out_bands(out) {
        if (s < 1 || in < 1 || out < 1)
            throw ShapeError("FilterBank: size/in/out must be >= 1");
        weights.assign(static_cast<std::size_t>(s) * s * in * out, fill);
    }

    FilterBank(int s, int in, int out, std::vector<T> w) : size(s), in_bands(in), out_bands(out), weights(std::move(w)) {
        if (s < 1 || in < 1 || out < 1)
            throw ShapeError("FilterBank: size/in/out must be >= 1");
        if (weights.size() != static_cast<std::size_t>(s) * s * in * out)
            throw ShapeError("FilterBank: weight count does not match s*s*in*out");
    }

    /// Number of stacked kernels (the K of the bank).
    int count() const { return in_bands; }

    std::string dims_str() const {
        return "(" + std::to_string(size) + "," + std::to_string(size) + "," +
               std::to_string(in_bands) + "->" + std::to_string(out_bands) + ")";
    }

    T& at(int o, int ci, int ky, int kx) {
        return weights[((static_cast<std::size_t>(o) * in_bands + ci) * size + ky) * size + kx];
    }
    T at(int o, int ci, int ky, int kx) const {
        return weights[((static_cast<std::size_t>(o) * in_bands + ci) * size + ky) * size + kx];
    }
};

template <class G>
concept PixelGrid = requires(const G& g) {
    { g.height } -> std::convertible_to<int>;
    { g.width } -> std::convertible_to<int>;
    { g.channels() } -> std::convertible_to<int>;
};

template <std::floating_point T>
void require_same_dims(const MultibandImage<T>& a, const MultibandImage<T>& b, const char* what) {
    if (a.height != b.height || a.width != b.width || a.bands != b.bands)
        throw ShapeError(std::string(what) + ": dims " + a.dims_str() + " vs " + b.dims_str());
}

template <std::floating_point T>
void require_same_dims(const FeatureStack<T>& a, const FeatureStack<T>& b, const char* what) {
    if (a.height != b.height || a.width != b.width || a.count != b.count)
        throw ShapeError(std::string(what) + ": feature stack dims differ");
}

/// Plain Euclidean inner product over two identically shaped images.
template <std::floating_point T>
double inner_product(const MultibandImage<T>& a, const MultibandImage<T>& b) {
    require_same_dims(a, b, "inner_product");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        acc += static_cast<double>(a.samples[i]) * static_cast<double>(b.samples[i]);
    return acc;
}

template <std::floating_point T>
double inner_product(const FeatureStack<T>& a, const FeatureStack<T>& b) {
    if (a.height != b.height || a.width != b.width || a.count != b.count)
        throw ShapeError("inner_product: feature stack dims differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.maps.size(); ++i)
        acc += static_cast<double>(a.maps[i]) * static_cast<double>(b.maps[i]);
    return acc;
}

template <std::floating_point T>
double squared_norm(const std::vector<T>& v) {
    double acc = 0.0;
    for (T x : v) acc += static_cast<double>(x) * static_cast<double>(x);
    return acc;
}

template <std::floating_point T>
bool all_finite(const std::vector<T>& v) {
    for (T x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

// Elementwise helpers shared by the solver and the unfolded network.

template <std::floating_point T>
void vec_axpy(std::vector<T>& y, T alpha, const std::vector<T>& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

template <std::floating_point T>
void vec_sub_inplace(std::vector<T>& a, const std::vector<T>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
}

} // namespace pansharp
