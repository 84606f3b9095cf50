#pragma once

#include <cstdint>
#include <string>

namespace pansharp {

// Flat sectioned key=value run configuration. Grammar:
//   - blank lines and lines starting with '#' are ignored
//   - '[section]' opens a section; 'key = value' assigns within it
//   - every (section, key) pair must be known; unknown ones are rejected
// Sections: [run], [model], [solver], [train], [synth], [io].
struct RunConfig {
    // [run]
    std::uint64_t seed = 0;
    int threads = 1;
    std::string precision = "f32";  // f32 | f64

    // [model] network / bank shapes
    int kernel_size = 3;
    int feature_count = 8;
    int ms_bands = 4;
    int prox_kernel = 3;
    int stages = 2;

    // [solver]
    double lambda_u = 1e-3;
    double lambda_v = 1e-3;
    double lambda_c = 1e-3;
    double step_u = 0.0;  // 0 = auto
    double step_v = 0.0;
    double step_c = 0.0;
    int max_sweeps = 100;
    double rel_tol = 0.0;
    bool track_objective = true;

    // [train]
    double learning_rate = 1e-4;
    double decay_factor = 0.9;
    int decay_every = 50;
    int epochs = 100;
    int batch_size = 64;

    // [synth]
    int count = 8;
    int height = 64;
    int width = 64;
    int ratio = 4;
    double sparsity = 0.3;

    // [io] input paths (outputs go under --out-dir)
    std::string manifest;
    std::string checkpoint;
    std::string pan;
    std::string ms;
    std::string ms_up;
    std::string reference;
    std::string fused;

    void validate() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin = "<string>");
RunConfig load_run_config(const std::string& path);

// Full round-trippable dump of every known key; written into each run
// directory as the reproducibility record.
std::string serialize_run_config(const RunConfig& cfg);

} // namespace pansharp
