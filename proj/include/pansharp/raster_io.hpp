#pragma once

#include <array>
#include <string>

#include "pansharp/tensor.hpp"

namespace pansharp {

// MBT raster container: "MBT1" magic, three u32 little-endian dims
// (height, width, bands), then height*width*bands little-endian f32 samples,
// band-interleaved by pixel.
MultibandImage<float> read_raster(const std::string& path);
void write_raster(const MultibandImage<float>& img, const std::string& path);

// Reads only the header; used for cheap manifest validation.
struct RasterDims {
    int height = 0;
    int width = 0;
    int bands = 0;
};
RasterDims read_raster_dims(const std::string& path);

/// 8-bit binary PPM (P6) preview of three selected bands, each min-max
/// stretched independently; a zero-span band maps to 0.
void export_preview(const MultibandImage<float>& img, const std::array<int, 3>& band_selection,
                    const std::string& path);

template <std::floating_point To, std::floating_point From>
MultibandImage<To> convert_image(const MultibandImage<From>& src) {
    MultibandImage<To> dst(src.height, src.width, src.bands);
    for (std::size_t i = 0; i < src.samples.size(); ++i)
        dst.samples[i] = static_cast<To>(src.samples[i]);
    return dst;
}

template <std::floating_point T>
MultibandImage<T> read_raster_as(const std::string& path) {
    if constexpr (std::is_same_v<T, float>)
        return read_raster(path);
    else
        return convert_image<T>(read_raster(path));
}

template <std::floating_point T>
void write_raster_as(const MultibandImage<T>& img, const std::string& path) {
    if constexpr (std::is_same_v<T, float>)
        write_raster(img, path);
    else
        write_raster(convert_image<float>(img), path);
}

} // namespace pansharp
