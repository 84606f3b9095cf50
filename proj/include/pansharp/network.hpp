#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "pansharp/conv.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/model.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

// A learned proximal operator: three bias-free residual blocks, each
// x + conv2(relu(conv1(x))), acting on an F-channel feature stack.
template <std::floating_point T>
struct ResBlockParams {
    FilterBank<T> conv1;  // (k_p, k_p, F->F)
    FilterBank<T> conv2;  // (k_p, k_p, F->F)
};

template <std::floating_point T>
struct ProxNetParams {
    static constexpr int kBlocks = 3;
    std::vector<ResBlockParams<T>> blocks;  // exactly kBlocks entries

    int channels() const { return blocks.empty() ? 0 : blocks[0].conv1.in_bands; }
    int kernel_size() const { return blocks.empty() ? 0 : blocks[0].conv1.size; }

    void validate() const {
        if (int(blocks.size()) != kBlocks)
            throw ShapeError("prox net must have exactly " + std::to_string(kBlocks) +
                             " residual blocks, got " + std::to_string(blocks.size()));
        const int f = channels(), kp = kernel_size();
        for (const auto& blk : blocks)
            for (const FilterBank<T>* c : {&blk.conv1, &blk.conv2})
                if (c->size != kp || c->in_bands != f || c->out_bands != f)
                    throw ShapeError("prox block conv is " + c->dims_str() + ", expected (" +
                                     std::to_string(kp) + "," + std::to_string(kp) + "," +
                                     std::to_string(f) + "->" + std::to_string(f) + ")");
    }
};

// Per-stage learned proximal operators for the three feature updates.
template <std::floating_point T>
struct StageParams {
    ProxNetParams<T> theta_u;
    ProxNetParams<T> theta_v;
    ProxNetParams<T> theta_c;

    void validate() const {
        theta_u.validate();
        theta_v.validate();
        theta_c.validate();
        if (theta_u.channels() != theta_v.channels() || theta_u.channels() != theta_c.channels())
            throw ShapeError("stage prox nets disagree on channel count");
    }
};

// Everything the unfolded network learns: the shared filter banks, the
// synthesis banks, per-stage proximal operators, and the three step scalars
// (banks and steps are shared across stages; only the prox nets vary by stage).
template <std::floating_point T>
struct NetworkParams {
    AnalysisBanks<T> analysis;
    SynthesisBanks<T> synthesis;
    std::vector<StageParams<T>> stages;
    T eta1 = T(0.1);
    T eta2 = T(0.1);
    T eta3 = T(0.1);

    int stage_count() const { return int(stages.size()); }
    int feature_count() const { return analysis.feature_count(); }
    int ms_bands() const { return analysis.ms_bands(); }

    void validate() const {
        analysis.validate();
        synthesis.validate();
        if (synthesis.g_common.in_bands != analysis.feature_count() ||
            synthesis.g_common.out_bands != analysis.ms_bands())
            throw ShapeError("synthesis banks " + synthesis.g_common.dims_str() +
                             " inconsistent with analysis banks");
        if (stages.empty())
            throw ShapeError("network needs at least one stage");
        for (const auto& st : stages) {
            st.validate();
            if (st.theta_u.channels() != analysis.feature_count())
                throw ShapeError("prox net channels " + std::to_string(st.theta_u.channels()) +
                                 " != feature count " + std::to_string(analysis.feature_count()));
        }
        if (!(eta1 > T(0)) || !(eta2 > T(0)) || !(eta3 > T(0)))
            throw ConfigError("network step scalars must be positive");
    }
};

template <std::floating_point T>
FeatureStack<T> relu(FeatureStack<T> x) {
    for (T& v : x.maps)
        v = std::max(v, T(0));
    return x;
}

// y = x through 3 residual blocks; zero conv weights make this the identity.
template <std::floating_point T>
FeatureStack<T> prox_net_apply(const FeatureStack<T>& x, const ProxNetParams<T>& p) {
    p.validate();
    if (x.count != p.channels())
        throw ShapeError("prox net expects " + std::to_string(p.channels()) + " channels, got " +
                         std::to_string(x.count));
    FeatureStack<T> cur = x;
    for (const auto& blk : p.blocks) {
        const FeatureStack<T> inner = conv2d_same_features(relu(conv2d_same_features(cur, blk.conv1)),
                                                           blk.conv2);
        vec_axpy(cur.maps, T(1), inner.maps);
    }
    return cur;
}

// One unfolded U update: synthesize the PAN estimate from the previous
// features, take a gradient step on the PAN data term, then apply the learned
// proximal operator of stage t.
template <std::floating_point T>
FeatureStack<T> u_net_stage(const FusionPair<T>& pair, const FeatureStack<T>& c_prev,
                            const FeatureStack<T>& u_prev, const NetworkParams<T>& params, int t) {
    const MultibandImage<T> p_c = conv2d_same(c_prev, params.analysis.d_common);
    const MultibandImage<T> p_u = conv2d_same(u_prev, params.analysis.d_unique);
    MultibandImage<T> eps = p_c;
    vec_axpy(eps.samples, T(1), p_u.samples);
    require_same_dims(eps, pair.pan, "synthesized pan/pan");
    vec_sub_inplace(eps.samples, pair.pan.samples);
    const FeatureStack<T> grad = conv2d_adjoint(eps, params.analysis.d_unique);
    FeatureStack<T> half = u_prev;
    vec_axpy(half.maps, -params.eta1, grad.maps);
    return prox_net_apply(half, params.stages.at(std::size_t(t)).theta_u);
}

// One unfolded V update against the MS data term.
template <std::floating_point T>
FeatureStack<T> v_net_stage(const FusionPair<T>& pair, const FeatureStack<T>& c_prev,
                            const FeatureStack<T>& v_prev, const NetworkParams<T>& params, int t) {
    const MultibandImage<T> m_c = conv2d_same(c_prev, params.analysis.h_common);
    const MultibandImage<T> m_v = conv2d_same(v_prev, params.analysis.h_unique);
    MultibandImage<T> eps = m_c;
    vec_axpy(eps.samples, T(1), m_v.samples);
    require_same_dims(eps, pair.ms_up, "synthesized ms/ms_up");
    vec_sub_inplace(eps.samples, pair.ms_up.samples);
    const FeatureStack<T> grad = conv2d_adjoint(eps, params.analysis.h_unique);
    FeatureStack<T> half = v_prev;
    vec_axpy(half.maps, -params.eta2, grad.maps);
    return prox_net_apply(half, params.stages.at(std::size_t(t)).theta_v);
}

// One unfolded C update on the joint operands built from the stage-t U and V.
template <std::floating_point T>
FeatureStack<T> c_net_stage(const FusionPair<T>& pair, const FeatureStack<T>& c_prev,
                            const FeatureStack<T>& u_new, const FeatureStack<T>& v_new,
                            const NetworkParams<T>& params, int t) {
    const JointOperands<T> joint =
        build_joint(pair, FeatureTriple<T>{c_prev, u_new, v_new}, params.analysis);
    MultibandImage<T> residual = conv2d_same(c_prev, joint.l_common);
    vec_sub_inplace(residual.samples, joint.n.samples);
    const FeatureStack<T> grad = conv2d_adjoint(residual, joint.l_common);
    FeatureStack<T> half = c_prev;
    vec_axpy(half.maps, -params.eta3, grad.maps);
    return prox_net_apply(half, params.stages.at(std::size_t(t)).theta_c);
}

// Full forward pass: zero features through T stages (U, V, C order), then the
// synthesis banks produce the fused image.
template <std::floating_point T>
std::pair<MultibandImage<T>, FeatureTriple<T>> network_forward(const FusionPair<T>& pair,
                                                               const NetworkParams<T>& params) {
    pair.validate();
    params.validate();
    if (pair.ms_up.bands != params.ms_bands())
        throw ShapeError("ms_up has " + std::to_string(pair.ms_up.bands) + " bands, network expects " +
                         std::to_string(params.ms_bands()));
    FeatureTriple<T> f =
        FeatureTriple<T>::zeros(pair.pan.height, pair.pan.width, params.feature_count());
    for (int t = 0; t < params.stage_count(); ++t) {
        FeatureStack<T> u_new = u_net_stage(pair, f.c, f.u, params, t);
        FeatureStack<T> v_new = v_net_stage(pair, f.c, f.v, params, t);
        FeatureStack<T> c_new = c_net_stage(pair, f.c, u_new, v_new, params, t);
        f.u = std::move(u_new);
        f.v = std::move(v_new);
        f.c = std::move(c_new);
        if (!all_finite(f.u.maps) || !all_finite(f.v.maps) || !all_finite(f.c.maps))
            throw DivergenceError("non-finite activations in forward stage " + std::to_string(t));
    }
    MultibandImage<T> o = reconstruct_hrms(f, params.synthesis);
    return {std::move(o), std::move(f)};
}

// Sum of squared errors over a batch of predictions (no averaging).
template <std::floating_point T>
double mse_loss(const std::vector<MultibandImage<T>>& predicted,
                const std::vector<MultibandImage<T>>& truth) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw ShapeError("mse_loss needs equal-sized nonempty batches, got " +
                         std::to_string(predicted.size()) + " vs " + std::to_string(truth.size()));
    double acc = 0.0;
    for (std::size_t j = 0; j < predicted.size(); ++j) {
        require_same_dims(predicted[j], truth[j], "mse_loss batch entry");
        for (std::size_t i = 0; i < predicted[j].samples.size(); ++i) {
            const double d = double(predicted[j].samples[i]) - double(truth[j].samples[i]);
            acc += d * d;
        }
    }
    return acc;
}

// Visits every learnable tensor in a documented fixed order; this single
// definition drives parameter counting, checkpoint layout, initialization,
// and the optimizer's flat parameter view.
//   1. analysis banks: d_common, d_unique, h_common, h_unique
//   2. synthesis banks: g_common, g_unique_pan, g_unique_ms
//   3. stage 0..T-1: theta_u blocks 0..2 (conv1 then conv2 each),
//      then theta_v likewise, then theta_c
//   4. scalars eta1, eta2, eta3
template <std::floating_point T, typename Fn>
void for_each_parameter(NetworkParams<T>& params, Fn&& fn) {
    auto bank = [&](FilterBank<T>& b, const std::string& name) {
        fn(name, b.weights.data(), b.weights.size());
    };
    bank(params.analysis.d_common, "analysis.d_common");
    bank(params.analysis.d_unique, "analysis.d_unique");
    bank(params.analysis.h_common, "analysis.h_common");
    bank(params.analysis.h_unique, "analysis.h_unique");
    bank(params.synthesis.g_common, "synthesis.g_common");
    bank(params.synthesis.g_unique_pan, "synthesis.g_unique_pan");
    bank(params.synthesis.g_unique_ms, "synthesis.g_unique_ms");
    for (std::size_t t = 0; t < params.stages.size(); ++t) {
        auto net = [&](ProxNetParams<T>& p, const std::string& which) {
            for (std::size_t b = 0; b < p.blocks.size(); ++b) {
                const std::string prefix =
                    "stage" + std::to_string(t) + "." + which + ".block" + std::to_string(b);
                bank(p.blocks[b].conv1, prefix + ".conv1");
                bank(p.blocks[b].conv2, prefix + ".conv2");
            }
        };
        net(params.stages[t].theta_u, "theta_u");
        net(params.stages[t].theta_v, "theta_v");
        net(params.stages[t].theta_c, "theta_c");
    }
    fn("eta1", &params.eta1, std::size_t(1));
    fn("eta2", &params.eta2, std::size_t(1));
    fn("eta3", &params.eta3, std::size_t(1));
}

template <std::floating_point T, typename Fn>
void for_each_parameter(const NetworkParams<T>& params, Fn&& fn) {
    for_each_parameter(const_cast<NetworkParams<T>&>(params),
                       [&](const std::string& name, T* data, std::size_t n) {
                           fn(name, const_cast<const T*>(data), n);
                       });
}

// Exact number of learnable scalars, by enumeration of the parameter tensors.
template <std::floating_point T>
std::int64_t count_parameters(const NetworkParams<T>& params) {
    std::int64_t total = 0;
    for_each_parameter(params,
                       [&](const std::string&, const T*, std::size_t n) { total += std::int64_t(n); });
    return total;
}

// Builds an all-zero parameter set with the given shape configuration.
template <std::floating_point T>
NetworkParams<T> make_network_params(int kernel_size, int feature_count, int ms_bands,
                                     int prox_kernel, int stages) {
    if (kernel_size < 1 || feature_count < 1 || ms_bands < 1 || prox_kernel < 1 || stages < 1)
        throw ConfigError("network shape parameters must be positive");
    NetworkParams<T> p;
    p.analysis.d_common = FilterBank<T>(kernel_size, feature_count, 1);
    p.analysis.d_unique = FilterBank<T>(kernel_size, feature_count, 1);
    p.analysis.h_common = FilterBank<T>(kernel_size, feature_count, ms_bands);
    p.analysis.h_unique = FilterBank<T>(kernel_size, feature_count, ms_bands);
    p.synthesis.g_common = FilterBank<T>(kernel_size, feature_count, ms_bands);
    p.synthesis.g_unique_pan = FilterBank<T>(kernel_size, feature_count, ms_bands);
    p.synthesis.g_unique_ms = FilterBank<T>(kernel_size, feature_count, ms_bands);
    p.stages.resize(std::size_t(stages));
    for (auto& st : p.stages)
        for (ProxNetParams<T>* net : {&st.theta_u, &st.theta_v, &st.theta_c}) {
            net->blocks.resize(ProxNetParams<T>::kBlocks);
            for (auto& blk : net->blocks) {
                blk.conv1 = FilterBank<T>(prox_kernel, feature_count, feature_count);
                blk.conv2 = FilterBank<T>(prox_kernel, feature_count, feature_count);
            }
        }
    return p;
}

} // namespace pansharp
