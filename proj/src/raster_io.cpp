#include "pansharp/raster_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "pansharp/errors.hpp"

namespace pansharp {

namespace {

constexpr char kMagic[4] = {'M', 'B', 'T', '1'};
// Hard cap on total sample count so corrupt headers fail fast instead of
// triggering a multi-gigabyte allocation.
constexpr std::uint64_t kMaxSamples = std::uint64_t(1) << 31;

std::uint32_t le32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

void put_le32(std::uint32_t v, unsigned char* p) {
    p[0] = static_cast<unsigned char>(v & 0xff);
    p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
    p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
    p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

struct Header {
    std::uint32_t height = 0, width = 0, bands = 0;
};

Header read_header(std::ifstream& in, const std::string& path) {
    unsigned char buf[16];
    in.read(reinterpret_cast<char*>(buf), 16);
    if (in.gcount() != 16)
        throw TruncatedFileError(path + ": file shorter than 16-byte header");
    if (std::memcmp(buf, kMagic, 4) != 0)
        throw BadMagicError(path + ": not an MBT raster (bad magic)");
    Header h;
    h.height = le32(buf + 4);
    h.width = le32(buf + 8);
    h.bands = le32(buf + 12);
    if (h.height == 0 || h.width == 0 || h.bands == 0)
        throw DimOverflowError(path + ": zero dimension in header");
    const std::uint64_t total = std::uint64_t(h.height) * h.width * h.bands;
    if (total > kMaxSamples || h.height > std::uint64_t(std::numeric_limits<int>::max()) ||
        h.width > std::uint64_t(std::numeric_limits<int>::max()) ||
        h.bands > std::uint64_t(std::numeric_limits<int>::max()))
        throw DimOverflowError(path + ": dimension product " + std::to_string(total) +
                               " exceeds supported range");
    return h;
}

} // namespace

MultibandImage<float> read_raster(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path + " for reading");
    const Header h = read_header(in, path);
    const std::size_t total = std::size_t(h.height) * h.width * h.bands;
    std::vector<unsigned char> raw(total * 4);
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (std::size_t(in.gcount()) != raw.size())
        throw TruncatedFileError(path + ": payload shorter than header promises (" +
                                 std::to_string(in.gcount()) + " of " + std::to_string(raw.size()) +
                                 " bytes)");
    MultibandImage<float> img(int(h.height), int(h.width), int(h.bands));
    for (std::size_t i = 0; i < total; ++i)
        img.samples[i] = std::bit_cast<float>(le32(raw.data() + i * 4));
    return img;
}

RasterDims read_raster_dims(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path + " for reading");
    const Header h = read_header(in, path);
    return RasterDims{int(h.height), int(h.width), int(h.bands)};
}

void write_raster(const MultibandImage<float>& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    unsigned char buf[16];
    std::memcpy(buf, kMagic, 4);
    put_le32(std::uint32_t(img.height), buf + 4);
    put_le32(std::uint32_t(img.width), buf + 8);
    put_le32(std::uint32_t(img.bands), buf + 12);
    out.write(reinterpret_cast<const char*>(buf), 16);
    std::vector<unsigned char> raw(img.samples.size() * 4);
    for (std::size_t i = 0; i < img.samples.size(); ++i)
        put_le32(std::bit_cast<std::uint32_t>(img.samples[i]), raw.data() + i * 4);
    out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    if (!out)
        throw IoError("write failed for " + path);
}

void export_preview(const MultibandImage<float>& img, const std::array<int, 3>& band_selection,
                    const std::string& path) {
    for (int b : band_selection)
        if (b < 0 || b >= img.bands)
            throw ShapeError("preview band " + std::to_string(b) + " out of range for " +
                             img.dims_str());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    // Per-band min-max stretch; a constant band has zero span and maps to 0.
    std::array<float, 3> lo{}, span{};
    for (int c = 0; c < 3; ++c) {
        float mn = std::numeric_limits<float>::infinity();
        float mx = -std::numeric_limits<float>::infinity();
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const float v = img.at(y, x, band_selection[std::size_t(c)]);
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
        lo[std::size_t(c)] = mn;
        span[std::size_t(c)] = mx - mn;
    }
    std::vector<unsigned char> row(std::size_t(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = img.at(y, x, band_selection[std::size_t(c)]);
                float t = span[std::size_t(c)] > 0.0f ? (v - lo[std::size_t(c)]) / span[std::size_t(c)] : 0.0f;
                t = std::clamp(t, 0.0f, 1.0f);
                row[std::size_t(x) * 3 + std::size_t(c)] =
                    static_cast<unsigned char>(t * 255.0f + 0.5f);
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!out)
        throw IoError("write failed for " + path);
}

} // namespace pansharp
