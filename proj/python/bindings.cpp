// Python bindings for the fusion toolkit. Images cross the boundary as
// C-contiguous numpy arrays shaped (H, W, B) — the same interleaved layout the
// core uses — feature stacks as (H, W, K), and conv weight tensors as
// (out, in, k, k). Heavy state (network parameters) stays opaque on the C++
// side and is manipulated through the exported functions.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "pansharp/checkpoint.hpp"
#include "pansharp/conv.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/model.hpp"
#include "pansharp/network.hpp"
#include "pansharp/parallel.hpp"
#include "pansharp/raster_io.hpp"
#include "pansharp/solver.hpp"
#include "pansharp/tensor.hpp"
#include "pansharp/train.hpp"
#include "pansharp/version.hpp"
#include "pansharp/wald.hpp"

namespace py = pybind11;
using namespace pansharp;

namespace {

template <typename T>
using ContiguousArray = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
MultibandImage<T> to_image(const py::array& raw) {
    const auto arr = ContiguousArray<T>::ensure(raw);
    if (!arr)
        throw ShapeError("expected a numeric array");
    if (arr.ndim() != 2 && arr.ndim() != 3)
        throw ShapeError("image array must be (H, W) or (H, W, bands)");
    const int h = int(arr.shape(0)), w = int(arr.shape(1));
    const int b = arr.ndim() == 3 ? int(arr.shape(2)) : 1;
    MultibandImage<T> img(h, w, b);
    std::memcpy(img.samples.data(), arr.data(), sizeof(T) * img.samples.size());
    return img;
}

template <typename T>
FeatureStack<T> to_stack(const py::array& raw) {
    const auto arr = ContiguousArray<T>::ensure(raw);
    if (!arr)
        throw ShapeError("expected a numeric array");
    if (arr.ndim() != 3)
        throw ShapeError("feature array must be (H, W, K)");
    FeatureStack<T> stack(int(arr.shape(0)), int(arr.shape(1)), int(arr.shape(2)));
    std::memcpy(stack.maps.data(), arr.data(), sizeof(T) * stack.maps.size());
    return stack;
}

template <typename T>
FilterBank<T> to_bank(const py::array& raw) {
    const auto arr = ContiguousArray<T>::ensure(raw);
    if (!arr)
        throw ShapeError("expected a numeric array");
    if (arr.ndim() != 4 || arr.shape(2) != arr.shape(3))
        throw ShapeError("weight array must be (out, in, k, k)");
    FilterBank<T> bank(int(arr.shape(2)), int(arr.shape(1)), int(arr.shape(0)));
    std::memcpy(bank.weights.data(), arr.data(), sizeof(T) * bank.weights.size());
    return bank;
}

template <typename T>
py::array_t<T> from_image(const MultibandImage<T>& img) {
    py::array_t<T> out(std::vector<py::ssize_t>{img.height, img.width, img.bands});
    std::memcpy(out.mutable_data(), img.samples.data(), sizeof(T) * img.samples.size());
    return out;
}

template <typename T>
py::array_t<T> from_stack(const FeatureStack<T>& stack) {
    py::array_t<T> out(std::vector<py::ssize_t>{stack.height, stack.width, stack.count});
    std::memcpy(out.mutable_data(), stack.maps.data(), sizeof(T) * stack.maps.size());
    return out;
}

py::dict report_to_dict(const MetricsReport& rep) {
    py::dict out;
    out["mode"] = rep.mode == MetricsReport::Mode::reduced ? "reduced" : "full";
    const auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            out[key] = *v;
    };
    put("q2n", rep.q2n_index);
    put("sam_degrees", rep.sam_degrees);
    put("ergas", rep.ergas_index);
    put("scc", rep.scc_index);
    put("d_lambda", rep.d_lambda_index);
    put("d_s", rep.d_s_index);
    put("qnr", rep.qnr_index);
    return out;
}

NetworkParams<float> make_network(int kernel_size, int feature_count, int ms_bands,
                                  int prox_kernel, int stages, std::uint64_t seed) {
    NetworkParams<float> params =
        make_network_params<float>(kernel_size, feature_count, ms_bands, prox_kernel, stages);
    initialize_parameters(params, seed);
    return params;
}

py::dict forward_py(const NetworkParams<float>& params, const py::array& pan,
                    const py::array& ms_up) {
    FusionPair<float> pair{to_image<float>(pan), to_image<float>(ms_up)};
    auto [fused, features] = network_forward(pair, params);
    py::dict out;
    out["fused"] = from_image(fused);
    out["c"] = from_stack(features.c);
    out["u"] = from_stack(features.u);
    out["v"] = from_stack(features.v);
    return out;
}

py::dict solve_py(const NetworkParams<float>& params, const py::array& pan,
                  const py::array& ms_up, double lambda_u, double lambda_v, double lambda_c,
                  double step_u, double step_v, double step_c, int max_sweeps, double rel_tol) {
    FusionPair<float> pair{to_image<float>(pan), to_image<float>(ms_up)};
    SolverConfig<float> cfg;
    cfg.weights = PriorWeights<float>{float(lambda_u), float(lambda_v), float(lambda_c)};
    cfg.step_u = step_u;
    cfg.step_v = step_v;
    cfg.step_c = step_c;
    cfg.max_sweeps = max_sweeps;
    cfg.rel_tol = rel_tol;
    auto [features, trace] = solve(pair, params.analysis, cfg);
    py::dict out;
    out["fused"] = from_image(reconstruct_hrms(features, params.synthesis));
    out["c"] = from_stack(features.c);
    out["u"] = from_stack(features.u);
    out["v"] = from_stack(features.v);
    out["objective"] = py::cast(trace.objective_per_sweep);
    out["sweeps"] = trace.sweeps_run;
    out["converged"] = trace.converged;
    return out;
}

std::vector<py::dict> train_py(NetworkParams<float>& params, const py::list& samples,
                               double learning_rate, double decay_factor, int decay_every,
                               int epochs, int batch_size, std::uint64_t seed) {
    std::vector<TrainSample<float>> dataset;
    dataset.reserve(samples.size());
    for (const auto& item : samples) {
        const auto tup = item.cast<py::tuple>();
        if (tup.size() != 3)
            throw ConfigError("each training sample must be a (pan, ms_up, truth) tuple");
        dataset.push_back(TrainSample<float>{
            FusionPair<float>{to_image<float>(tup[0].cast<py::array>()),
                              to_image<float>(tup[1].cast<py::array>())},
            to_image<float>(tup[2].cast<py::array>())});
    }
    TrainConfig cfg;
    cfg.learning_rate = learning_rate;
    cfg.decay_factor = decay_factor;
    cfg.decay_every = decay_every;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    const std::vector<EpochRecord> history = train(dataset, params, cfg);
    std::vector<py::dict> out;
    out.reserve(history.size());
    for (const EpochRecord& rec : history) {
        py::dict row;
        row["epoch"] = rec.epoch;
        row["mean_loss"] = rec.mean_loss;
        row["lr"] = rec.lr;
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Convolutional sparse fusion toolkit (C++ core)";
    m.attr("__version__") = kVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", PyExc_ValueError);

    py::class_<NetworkParams<float>>(m, "NetworkParams")
        .def_property_readonly(
            "kernel_size",
            [](const NetworkParams<float>& p) { return p.analysis.kernel_size(); })
        .def_property_readonly("feature_count", &NetworkParams<float>::feature_count)
        .def_property_readonly("ms_bands", &NetworkParams<float>::ms_bands)
        .def_property_readonly("stage_count", &NetworkParams<float>::stage_count)
        .def_property_readonly("parameter_count",
                               [](const NetworkParams<float>& p) { return count_parameters(p); })
        .def("__repr__", [](const NetworkParams<float>& p) {
            return "<NetworkParams stages=" + std::to_string(p.stage_count()) +
                   " parameters=" + std::to_string(count_parameters(p)) + ">";
        });

    m.def("make_network", &make_network, py::arg("kernel_size") = 3,
          py::arg("feature_count") = 8, py::arg("ms_bands") = 4, py::arg("prox_kernel") = 3,
          py::arg("stages") = 2, py::arg("seed") = 0,
          "Create a network with seeded parameter initialization.");
    m.def("save_checkpoint",
          [](const NetworkParams<float>& p, const std::string& path) { save_checkpoint(p, path); },
          py::arg("params"), py::arg("path"));
    m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); },
          py::arg("path"));

    m.def("network_forward", &forward_py, py::arg("params"), py::arg("pan"), py::arg("ms_up"),
          "Run the unfolded network; returns dict with fused image and feature stacks.");
    m.def("solve", &solve_py, py::arg("params"), py::arg("pan"), py::arg("ms_up"),
          py::arg("lambda_u") = 1e-3, py::arg("lambda_v") = 1e-3, py::arg("lambda_c") = 1e-3,
          py::arg("step_u") = 0.0, py::arg("step_v") = 0.0, py::arg("step_c") = 0.0,
          py::arg("max_sweeps") = 100, py::arg("rel_tol") = 0.0,
          "Classical proximal-gradient solver; step 0 means automatic step sizing.");
    m.def("train", &train_py, py::arg("params"), py::arg("samples"),
          py::arg("learning_rate") = 1e-4, py::arg("decay_factor") = 0.9,
          py::arg("decay_every") = 50, py::arg("epochs") = 100, py::arg("batch_size") = 64,
          py::arg("seed") = 0,
          "Train params in place on (pan, ms_up, truth) tuples; returns epoch records.");

    m.def("conv2d_same",
          [](const py::array& x, const py::array& weights) {
              return from_image(conv2d_same(to_stack<float>(x), to_bank<float>(weights)));
          },
          py::arg("features"), py::arg("weights"),
          "Zero-padded same-size convolution of a (H, W, K) stack with (out, K, k, k) weights.");
    m.def("conv2d_adjoint",
          [](const py::array& y, const py::array& weights) {
              return from_stack(conv2d_adjoint(to_image<float>(y), to_bank<float>(weights)));
          },
          py::arg("image"), py::arg("weights"),
          "Exact adjoint of conv2d_same; maps (H, W, out) back to (H, W, K).");
    m.def("soft_threshold", [](double x, double tau) { return soft_threshold(x, tau); },
          py::arg("x"), py::arg("tau"));
    m.def("estimate_step_size",
          [](const py::array& weights, int iters, int probe_h, int probe_w) {
              return estimate_step_size(to_bank<float>(weights), iters, probe_h, probe_w);
          },
          py::arg("weights"), py::arg("iters") = 20, py::arg("probe_h") = 32,
          py::arg("probe_w") = 32,
          "Safe gradient step 0.9 / ||A||^2 from power iteration on the conv operator.");

    m.def("synthesize_pan",
          [](const NetworkParams<float>& p, const py::array& c, const py::array& u) {
              return from_image(synthesize_pan(to_stack<float>(c), to_stack<float>(u), p.analysis));
          },
          py::arg("params"), py::arg("c"), py::arg("u"));
    m.def("synthesize_ms",
          [](const NetworkParams<float>& p, const py::array& c, const py::array& v) {
              return from_image(synthesize_ms(to_stack<float>(c), to_stack<float>(v), p.analysis));
          },
          py::arg("params"), py::arg("c"), py::arg("v"));
    m.def("reconstruct",
          [](const NetworkParams<float>& p, const py::array& c, const py::array& u,
             const py::array& v) {
              FeatureTriple<float> f{to_stack<float>(c), to_stack<float>(u), to_stack<float>(v)};
              return from_image(reconstruct_hrms(f, p.synthesis));
          },
          py::arg("params"), py::arg("c"), py::arg("u"), py::arg("v"));

    m.def("sam", [](const py::array& f, const py::array& r) {
        return sam(to_image<double>(f), to_image<double>(r));
    });
    m.def("ergas",
          [](const py::array& f, const py::array& r, int ratio) {
              return ergas(to_image<double>(f), to_image<double>(r), ratio);
          },
          py::arg("fused"), py::arg("reference"), py::arg("ratio") = 4);
    m.def("scc", [](const py::array& f, const py::array& r) {
        return scc(to_image<double>(f), to_image<double>(r));
    });
    m.def("q2n",
          [](const py::array& f, const py::array& r, int block) {
              return q2n(to_image<double>(f), to_image<double>(r), block);
          },
          py::arg("fused"), py::arg("reference"), py::arg("block") = 32);
    m.def("d_lambda",
          [](const py::array& fused, const py::array& ms_up, int block) {
              return d_lambda(to_image<double>(fused), to_image<double>(ms_up), block);
          },
          py::arg("fused"), py::arg("ms_up"), py::arg("block") = 32);
    m.def("d_s",
          [](const py::array& fused, const py::array& ms, const py::array& pan,
             const py::array& pan_lr, int block) {
              return d_s(to_image<double>(fused), to_image<double>(ms), to_image<double>(pan),
                         to_image<double>(pan_lr), block);
          },
          py::arg("fused"), py::arg("ms"), py::arg("pan"), py::arg("pan_lr"),
          py::arg("block") = 32);
    m.def("qnr", &qnr, py::arg("d_lambda"), py::arg("d_s"));
    m.def("evaluate_reduced",
          [](const py::array& fused, const py::array& reference, int ratio) {
              return report_to_dict(
                  evaluate_reduced(to_image<double>(fused), to_image<double>(reference), ratio));
          },
          py::arg("fused"), py::arg("reference"), py::arg("ratio") = 4);
    m.def("evaluate_full",
          [](const py::array& fused, const py::array& ms_up, const py::array& ms,
             const py::array& pan, const py::array& pan_lr) {
              return report_to_dict(evaluate_full(to_image<double>(fused),
                                                  to_image<double>(ms_up), to_image<double>(ms),
                                                  to_image<double>(pan),
                                                  to_image<double>(pan_lr)));
          },
          py::arg("fused"), py::arg("ms_up"), py::arg("ms"), py::arg("pan"), py::arg("pan_lr"));

    m.def("blur_decimate",
          [](const py::array& img, int ratio) {
              return from_image(blur_decimate(to_image<float>(img), ratio));
          },
          py::arg("image"), py::arg("ratio") = 4,
          "Gaussian degradation followed by decimation (reduced-resolution protocol).");
    m.def("exp_upsample",
          [](const py::array& img, int ratio) {
              return from_image(exp_upsample(to_image<float>(img), ratio));
          },
          py::arg("image"), py::arg("ratio") = 4,
          "Piecewise-cubic dyadic interpolation to a power-of-two ratio.");

    m.def("read_raster", [](const std::string& path) { return from_image(read_raster(path)); },
          py::arg("path"));
    m.def("write_raster",
          [](const py::array& img, const std::string& path) {
              write_raster(to_image<float>(img), path);
          },
          py::arg("image"), py::arg("path"));

    m.def("set_thread_count", &set_thread_count, py::arg("count"));
    m.def("thread_count", [] { return thread_count(); });
}
