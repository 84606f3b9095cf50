#include "pansharp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pansharp/errors.hpp"

namespace pansharp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& value, const std::string& where) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ConfigError(where + ": cannot parse '" + value + "'");
    return out;
}

// from_chars for doubles is not universally available; go through stod with
// full-consumption checking.
double parse_double(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size())
            throw ConfigError(where + ": trailing characters in '" + value + "'");
        return out;
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot parse '" + value + "' as a real number");
    }
}

bool parse_bool(const std::string& value, const std::string& where) {
    if (value == "true" || value == "1" || value == "yes" || value == "on")
        return true;
    if (value == "false" || value == "0" || value == "no" || value == "off")
        return false;
    throw ConfigError(where + ": cannot parse '" + value + "' as a boolean");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"run.seed",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.seed = parse_number<std::uint64_t>(v, w);
         }},
        {"run.threads",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.threads = parse_number<int>(v, w);
         }},
        {"run.precision",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             if (v != "f32" && v != "f64")
                 throw ConfigError(w + ": precision must be f32 or f64");
             c.precision = v;
         }},
        {"model.kernel_size",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.kernel_size = parse_number<int>(v, w);
         }},
        {"model.feature_count",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.feature_count = parse_number<int>(v, w);
         }},
        {"model.ms_bands",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.ms_bands = parse_number<int>(v, w);
         }},
        {"model.prox_kernel",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.prox_kernel = parse_number<int>(v, w);
         }},
        {"model.stages",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.stages = parse_number<int>(v, w);
         }},
        {"solver.lambda_u",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.lambda_u = parse_double(v, w);
         }},
        {"solver.lambda_v",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.lambda_v = parse_double(v, w);
         }},
        {"solver.lambda_c",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.lambda_c = parse_double(v, w);
         }},
        {"solver.step_u",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.step_u = v == "auto" ? 0.0 : parse_double(v, w);
         }},
        {"solver.step_v",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.step_v = v == "auto" ? 0.0 : parse_double(v, w);
         }},
        {"solver.step_c",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.step_c = v == "auto" ? 0.0 : parse_double(v, w);
         }},
        {"solver.max_sweeps",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.max_sweeps = parse_number<int>(v, w);
         }},
        {"solver.rel_tol",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.rel_tol = parse_double(v, w);
         }},
        {"solver.track_objective",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.track_objective = parse_bool(v, w);
         }},
        {"train.learning_rate",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.learning_rate = parse_double(v, w);
         }},
        {"train.decay_factor",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.decay_factor = parse_double(v, w);
         }},
        {"train.decay_every",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.decay_every = parse_number<int>(v, w);
         }},
        {"train.epochs",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.epochs = parse_number<int>(v, w);
         }},
        {"train.batch_size",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.batch_size = parse_number<int>(v, w);
         }},
        {"synth.count",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.count = parse_number<int>(v, w);
         }},
        {"synth.height",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.height = parse_number<int>(v, w);
         }},
        {"synth.width",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.width = parse_number<int>(v, w);
         }},
        {"synth.ratio",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.ratio = parse_number<int>(v, w);
         }},
        {"synth.sparsity",
         [](RunConfig& c, const std::string& v, const std::string& w) {
             c.sparsity = parse_double(v, w);
         }},
        {"io.manifest",
         [](RunConfig& c, const std::string& v, const std::string&) { c.manifest = v; }},
        {"io.checkpoint",
         [](RunConfig& c, const std::string& v, const std::string&) { c.checkpoint = v; }},
        {"io.pan", [](RunConfig& c, const std::string& v, const std::string&) { c.pan = v; }},
        {"io.ms", [](RunConfig& c, const std::string& v, const std::string&) { c.ms = v; }},
        {"io.ms_up", [](RunConfig& c, const std::string& v, const std::string&) { c.ms_up = v; }},
        {"io.reference",
         [](RunConfig& c, const std::string& v, const std::string&) { c.reference = v; }},
        {"io.fused", [](RunConfig& c, const std::string& v, const std::string&) { c.fused = v; }},
    };
    return table;
}

} // namespace

void RunConfig::validate() const {
    if (threads < 1)
        throw ConfigError("run.threads must be >= 1");
    if (precision != "f32" && precision != "f64")
        throw ConfigError("run.precision must be f32 or f64");
    if (kernel_size < 1 || feature_count < 1 || ms_bands < 1 || prox_kernel < 1 || stages < 1)
        throw ConfigError("model dimensions must be positive");
    if (lambda_u < 0 || lambda_v < 0 || lambda_c < 0)
        throw ConfigError("solver lambdas must be nonnegative");
    if (step_u < 0 || step_v < 0 || step_c < 0)
        throw ConfigError("solver steps must be positive or auto");
    if (max_sweeps < 0 || rel_tol < 0)
        throw ConfigError("solver.max_sweeps and rel_tol must be nonnegative");
    if (learning_rate <= 0 || decay_factor <= 0 || decay_every < 1 || epochs < 0 || batch_size < 1)
        throw ConfigError("train parameters must be positive");
    if (count < 0 || height < 1 || width < 1 || ratio < 1)
        throw ConfigError("synth parameters must be positive");
    if (!(sparsity > 0.0) || sparsity > 1.0)
        throw ConfigError("synth.sparsity must be in (0, 1]");
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3)
                throw ConfigError(where + ": malformed section header '" + t + "'");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value', got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty())
            throw ConfigError(where + ": key '" + key + "' outside any [section]");
        const std::string full = section + "." + key;
        const auto it = setters().find(full);
        if (it == setters().end())
            throw ConfigError(where + ": unknown key '" + full + "'");
        it->second(cfg, value, where + " (" + full + ")");
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path);
}

std::string serialize_run_config(const RunConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "[run]\n"
       << "seed = " << cfg.seed << "\n"
       << "threads = " << cfg.threads << "\n"
       << "precision = " << cfg.precision << "\n\n"
       << "[model]\n"
       << "kernel_size = " << cfg.kernel_size << "\n"
       << "feature_count = " << cfg.feature_count << "\n"
       << "ms_bands = " << cfg.ms_bands << "\n"
       << "prox_kernel = " << cfg.prox_kernel << "\n"
       << "stages = " << cfg.stages << "\n\n"
       << "[solver]\n"
       << "lambda_u = " << cfg.lambda_u << "\n"
       << "lambda_v = " << cfg.lambda_v << "\n"
       << "lambda_c = " << cfg.lambda_c << "\n"
       << "step_u = " << cfg.step_u << "\n"
       << "step_v = " << cfg.step_v << "\n"
       << "step_c = " << cfg.step_c << "\n"
       << "max_sweeps = " << cfg.max_sweeps << "\n"
       << "rel_tol = " << cfg.rel_tol << "\n"
       << "track_objective = " << (cfg.track_objective ? "true" : "false") << "\n\n"
       << "[train]\n"
       << "learning_rate = " << cfg.learning_rate << "\n"
       << "decay_factor = " << cfg.decay_factor << "\n"
       << "decay_every = " << cfg.decay_every << "\n"
       << "epochs = " << cfg.epochs << "\n"
       << "batch_size = " << cfg.batch_size << "\n\n"
       << "[synth]\n"
       << "count = " << cfg.count << "\n"
       << "height = " << cfg.height << "\n"
       << "width = " << cfg.width << "\n"
       << "ratio = " << cfg.ratio << "\n"
       << "sparsity = " << cfg.sparsity << "\n\n"
       << "[io]\n"
       << "manifest = " << cfg.manifest << "\n"
       << "checkpoint = " << cfg.checkpoint << "\n"
       << "pan = " << cfg.pan << "\n"
       << "ms = " << cfg.ms << "\n"
       << "ms_up = " << cfg.ms_up << "\n"
       << "reference = " << cfg.reference << "\n"
       << "fused = " << cfg.fused << "\n";
    return os.str();
}

} // namespace pansharp
