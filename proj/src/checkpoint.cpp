#include "pansharp/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "pansharp/errors.hpp"

namespace pansharp {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'N', '1'};

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

} // namespace

void save_checkpoint(const NetworkParams<float>& params, const std::string& path) {
    params.validate();
    nlohmann::json header = {
        {"kernel_size", params.analysis.kernel_size()},
        {"feature_count", params.feature_count()},
        {"ms_bands", params.ms_bands()},
        {"prox_kernel", params.stages[0].theta_u.kernel_size()},
        {"prox_channels", params.stages[0].theta_u.channels()},
        {"stages", params.stage_count()},
    };
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    unsigned char buf[8];
    std::memcpy(buf, kMagic, 4);
    put_le32(std::uint32_t(htext.size()), buf + 4);
    out.write(reinterpret_cast<const char*>(buf), 8);
    out.write(htext.data(), std::streamsize(htext.size()));

    std::vector<unsigned char> raw;
    for_each_parameter(params, [&](const std::string&, const float* data, std::size_t n) {
        const std::size_t base = raw.size();
        raw.resize(base + n * 4);
        for (std::size_t i = 0; i < n; ++i)
            put_le32(std::bit_cast<std::uint32_t>(data[i]), raw.data() + base + i * 4);
    });
    out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    if (!out)
        throw IoError("write failed for " + path);
}

NetworkParams<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path + " for reading");
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (in.gcount() != 8)
        throw TruncatedFileError(path + ": file shorter than 8-byte preamble");
    if (std::memcmp(buf, kMagic, 4) != 0)
        throw BadMagicError(path + ": not a PPN checkpoint (bad magic)");
    const std::uint32_t hlen = le32(buf + 4);
    if (hlen == 0 || hlen > (1u << 20))
        throw IoError(path + ": implausible header length " + std::to_string(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), std::streamsize(hlen));
    if (std::size_t(in.gcount()) != hlen)
        throw TruncatedFileError(path + ": header shorter than its declared length");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": malformed checkpoint header: " + e.what());
    }
    int s = 0, k = 0, b = 0, kp = 0, f = 0, t = 0;
    try {
        s = header.at("kernel_size").get<int>();
        k = header.at("feature_count").get<int>();
        b = header.at("ms_bands").get<int>();
        kp = header.at("prox_kernel").get<int>();
        f = header.at("prox_channels").get<int>();
        t = header.at("stages").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": checkpoint header missing fields: " + e.what());
    }
    if (f != k)
        throw IoError(path + ": prox_channels " + std::to_string(f) +
                      " != feature_count " + std::to_string(k) +
                      " (this build uses lifting-free prox nets)");

    NetworkParams<float> params;
    try {
        params = make_network_params<float>(s, k, b, kp, t);
    } catch (const ConfigError& e) {
        throw IoError(path + ": invalid checkpoint shape: " + std::string(e.what()));
    }
    for_each_parameter(params, [&](const std::string& name, float* data, std::size_t n) {
        std::vector<unsigned char> raw(n * 4);
        in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
        if (std::size_t(in.gcount()) != raw.size())
            throw TruncatedFileError(path + ": payload truncated in tensor " + name);
        for (std::size_t i = 0; i < n; ++i)
            data[i] = std::bit_cast<float>(le32(raw.data() + i * 4));
    });
    char extra = 0;
    if (in.read(&extra, 1); in.gcount() != 0)
        throw IoError(path + ": trailing bytes after final tensor");
    params.validate();
    return params;
}

} // namespace pansharp
