#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pansharp/autodiff.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/network.hpp"
#include "pansharp/rng.hpp"

namespace pansharp {

// Seeded parameter initialization: every conv tensor is drawn from a zero-
// mean uniform with half-width 1/sqrt(fan-in) (fan-in = in_channels * kernel
// area); the three step scalars start at 0.1. Banks are filled in the fixed
// parameter-enumeration order, so a seed pins the whole parameter vector.
template <std::floating_point T>
void initialize_parameters(NetworkParams<T>& params, std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](FilterBank<T>& bank) {
        const double half = 1.0 / std::sqrt(double(bank.in_bands) * bank.size * bank.size);
        for (T& w : bank.weights)
            w = T(rng.uniform(-half, half));
    };
    fill(params.analysis.d_common);
    fill(params.analysis.d_unique);
    fill(params.analysis.h_common);
    fill(params.analysis.h_unique);
    fill(params.synthesis.g_common);
    fill(params.synthesis.g_unique_pan);
    fill(params.synthesis.g_unique_ms);
    for (auto& st : params.stages)
        for (ProxNetParams<T>* net : {&st.theta_u, &st.theta_v, &st.theta_c})
            for (auto& blk : net->blocks) {
                fill(blk.conv1);
                fill(blk.conv2);
            }
    params.eta1 = T(0.1);
    params.eta2 = T(0.1);
    params.eta3 = T(0.1);
}

// Adam optimizer state: per-tensor first/second moment buffers (kept in
// double for stable, reproducible accumulation) plus the step counter.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    template <std::floating_point T>
    static AdamState init_like(const NetworkParams<T>& params) {
        AdamState st;
        for_each_parameter(params, [&](const std::string&, const T*, std::size_t n) {
            st.m.emplace_back(n, 0.0);
            st.v.emplace_back(n, 0.0);
        });
        return st;
    }
};

// One Adam step with bias correction over the flat parameter enumeration.
template <std::floating_point T>
void adam_update(NetworkParams<T>& params, const GradientAccumulator<T>& grads, AdamState& state,
                 double lr) {
    std::size_t slot = 0;
    for_each_parameter(params, [&](const std::string&, T*, std::size_t n) {
        if (slot >= grads.slots.size() || grads.slots[slot].size() != n)
            throw ShapeError("gradient accumulator does not match parameter shapes");
        ++slot;
    });
    if (slot != grads.slots.size() || state.m.size() != grads.slots.size())
        throw ShapeError("optimizer state does not match parameter shapes");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    slot = 0;
    for_each_parameter(params, [&](const std::string&, T* data, std::size_t n) {
        auto& m = state.m[slot];
        auto& v = state.v[slot];
        const auto& g = grads.slots[slot];
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = double(g[i]);
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] = T(double(data[i]) - lr * mhat / (std::sqrt(vhat) + state.epsilon));
        }
        ++slot;
    });
}

struct TrainConfig {
    double learning_rate = 1e-4;
    double decay_factor = 0.9;
    int decay_every = 50;  // epochs between learning-rate decays
    int epochs = 100;
    int batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0 || decay_factor <= 0 || decay_every < 1 || epochs < 0 ||
            batch_size < 1)
            throw ConfigError("train config requires positive rates and counts");
    }
};

// One supervised example: the degraded inputs plus the reference image the
// network should reproduce.
template <std::floating_point T>
struct TrainSample {
    FusionPair<T> pair;
    MultibandImage<T> truth;
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;  // mean per-sample squared error over the epoch
    double lr = 0.0;
};

// Mini-batch training of the unfolded network: per epoch, a seeded shuffle
// partitions the dataset into batches; each batch accumulates summed
// squared-error gradients over its samples and applies one Adam step.
// Deterministic for a fixed seed under single-threaded execution.
template <std::floating_point T>
std::vector<EpochRecord> train(std::vector<TrainSample<T>>& dataset, NetworkParams<T>& params,
                               const TrainConfig& cfg) {
    cfg.validate();
    params.validate();
    if (dataset.empty())
        throw ConfigError("training dataset is empty");
    for (const auto& s : dataset) {
        s.pair.validate();
        require_same_dims(s.truth, s.pair.ms_up, "truth/ms_up");
    }

    AdamState state = AdamState::init_like(params);
    GradientAccumulator<T> grads = GradientAccumulator<T>::init_like(params);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;

    std::vector<EpochRecord> history;
    history.reserve(std::size_t(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr =
            cfg.learning_rate * std::pow(cfg.decay_factor, double(epoch / cfg.decay_every));
        // Fisher-Yates shuffle driven by the training RNG stream.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = std::size_t(rng.below(std::uint64_t(i)));
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch_size));
            grads.zero();
            for (std::size_t i = start; i < stop; ++i) {
                const TrainSample<T>& sample = dataset[order[i]];
                Tape<T> tape;
                const TapeForward fw = tape_network_forward(tape, sample.pair, sample.truth, params);
                const double loss = tape.scalar_value(fw.loss);
                if (!std::isfinite(loss))
                    throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                          ", batch starting at sample " + std::to_string(start));
                epoch_loss += loss;
                tape.backward(fw.loss, grads);
            }
            adam_update(params, grads, state, lr);
            // The unfolding interpretation needs positive step scalars; keep
            // Adam from crossing zero (projection, effectively inactive at
            // the default learning rate).
            params.eta1 = std::max(params.eta1, T(1e-6));
            params.eta2 = std::max(params.eta2, T(1e-6));
            params.eta3 = std::max(params.eta3, T(1e-6));
        }
        history.push_back(EpochRecord{epoch, epoch_loss / double(dataset.size()), lr});
    }
    return history;
}

// Central-difference audit of the tape gradients: samples `num_samples`
// parameter scalars (seeded, spread over all tensors), perturbs each by
// +/- h while re-evaluating the exact forward loss, and reports the worst
// relative disagreement with the tape gradient. Meant to run in double
// precision; single-precision FD noise would swamp the comparison.
template <std::floating_point T>
double finite_diff_check(const FusionPair<T>& pair, const MultibandImage<T>& truth,
                         NetworkParams<T>& params, int num_samples, double h, std::uint64_t seed) {
    if (!(h > 0))
        throw ConfigError("finite_diff_check requires a positive perturbation");
    if (num_samples < 1)
        throw ConfigError("finite_diff_check requires num_samples >= 1");

    GradientAccumulator<T> grads = GradientAccumulator<T>::init_like(params);
    {
        Tape<T> tape;
        const TapeForward fw = tape_network_forward(tape, pair, truth, params);
        tape.backward(fw.loss, grads);
    }

    struct View {
        T* data;
        std::size_t size;
    };
    std::vector<View> views;
    for_each_parameter(params, [&](const std::string&, T* data, std::size_t n) {
        views.push_back(View{data, n});
    });

    auto loss_now = [&]() {
        Tape<T> tape;
        const TapeForward fw = tape_network_forward(tape, pair, truth, params);
        return tape.scalar_value(fw.loss);
    };

    Rng rng(seed);
    double worst = 0.0;
    for (int sample = 0; sample < num_samples; ++sample) {
        const std::size_t slot = std::size_t(rng.below(views.size()));
        const std::size_t idx = std::size_t(rng.below(views[slot].size));
        T* target = views[slot].data + idx;
        const T saved = *target;
        *target = T(double(saved) + h);
        const double plus = loss_now();
        *target = T(double(saved) - h);
        const double minus = loss_now();
        *target = saved;
        const double fd = (plus - minus) / (2.0 * h);
        const double ad = double(grads.slots[slot][idx]);
        const double err = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-8});
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace pansharp
