#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pansharp/conv.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/model.hpp"
#include "pansharp/network.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

// Per-tensor gradient buffers, one slot per entry of the for_each_parameter
// enumeration (same order).
template <std::floating_point T>
struct GradientAccumulator {
    std::vector<std::vector<T>> slots;

    static GradientAccumulator init_like(const NetworkParams<T>& params) {
        GradientAccumulator g;
        for_each_parameter(params, [&](const std::string&, const T*, std::size_t n) {
            g.slots.emplace_back(n, T(0));
        });
        return g;
    }

    void zero() {
        for (auto& s : slots)
            std::fill(s.begin(), s.end(), T(0));
    }
};

// Flat slot ids of the fixed parameter enumeration. Kept in sync with
// for_each_parameter by construction (a unit test pins the correspondence).
struct ParamSlots {
    static constexpr int d_common = 0;
    static constexpr int d_unique = 1;
    static constexpr int h_common = 2;
    static constexpr int h_unique = 3;
    static constexpr int g_common = 4;
    static constexpr int g_unique_pan = 5;
    static constexpr int g_unique_ms = 6;
    static constexpr int kPerNet = 6;    // 3 blocks x 2 convs
    static constexpr int kPerStage = 18; // theta_u, theta_v, theta_c

    // net: 0 = theta_u, 1 = theta_v, 2 = theta_c; conv_idx: 0 = conv1, 1 = conv2
    static int prox_conv(int stage, int net, int block, int conv_idx) {
        return 7 + stage * kPerStage + net * kPerNet + block * 2 + conv_idx;
    }
    static int eta1(int stage_count) { return 7 + stage_count * kPerStage; }
    static int eta2(int stage_count) { return eta1(stage_count) + 1; }
    static int eta3(int stage_count) { return eta1(stage_count) + 2; }
    static int total(int stage_count) { return eta1(stage_count) + 3; }
};

// Reverse-mode tape over pixel-grid values. Nodes own their forward values;
// backward walks the node list in reverse and accumulates parameter gradients
// into a GradientAccumulator.
template <std::floating_point T>
class Tape {
public:
    // Describes where a conv node's weight gradient goes. A stacked bank
    // (built by concatenating two banks along output channels) routes its
    // first `split_out` output channels to slot_a and the rest to slot_b.
    struct DwRoute {
        int slot_a = -1;
        int slot_b = -1;
        int split_out = 0;
    };

    int leaf(const T* data, int h, int w, int c) {
        Node n;
        n.kind = Op::leaf;
        n.h = h;
        n.w = w;
        n.c = c;
        n.value.assign(data, data + std::size_t(h) * w * c);
        n.requires_grad = false;
        return push(std::move(n));
    }

    int leaf_zeros(int h, int w, int c) {
        Node n;
        n.kind = Op::leaf;
        n.h = h;
        n.w = w;
        n.c = c;
        n.value.assign(std::size_t(h) * w * c, T(0));
        n.requires_grad = false;
        return push(std::move(n));
    }

    int conv(int x, const FilterBank<T>& bank, DwRoute route) {
        const Node& in = at(x);
        if (in.c != bank.in_bands)
            throw ShapeError("tape conv: input channels " + std::to_string(in.c) +
                             " != bank in_bands " + std::to_string(bank.in_bands));
        Node n;
        n.kind = Op::conv;
        n.a = x;
        n.h = in.h;
        n.w = in.w;
        n.c = bank.out_bands;
        n.bank = bank;
        n.route = route;
        n.value.resize(std::size_t(n.h) * n.w * n.c);
        conv2d_same_raw(in.value.data(), in.h, in.w, in.c, bank.weights.data(), bank.size,
                        bank.out_bands, n.value.data());
        n.requires_grad = true;
        return push(std::move(n));
    }

    int adjoint(int y, const FilterBank<T>& bank, DwRoute route) {
        const Node& in = at(y);
        if (in.c != bank.out_bands)
            throw ShapeError("tape adjoint: input channels " + std::to_string(in.c) +
                             " != bank out_bands " + std::to_string(bank.out_bands));
        Node n;
        n.kind = Op::adjoint;
        n.a = y;
        n.h = in.h;
        n.w = in.w;
        n.c = bank.in_bands;
        n.bank = bank;
        n.route = route;
        n.value.resize(std::size_t(n.h) * n.w * n.c);
        conv2d_adjoint_raw(in.value.data(), in.h, in.w, in.c, bank.weights.data(), bank.size,
                           bank.in_bands, n.value.data());
        n.requires_grad = true;
        return push(std::move(n));
    }

    int add(int a, int b) { return binary(Op::add, a, b); }
    int sub(int a, int b) { return binary(Op::sub, a, b); }

    // out = factor * x; scalar_slot receives d loss / d factor.
    int scale(int x, T factor, int scalar_slot) {
        const Node& in = at(x);
        Node n;
        n.kind = Op::scale;
        n.a = x;
        n.h = in.h;
        n.w = in.w;
        n.c = in.c;
        n.factor = factor;
        n.route.slot_a = scalar_slot;
        n.value.resize(in.value.size());
        for (std::size_t i = 0; i < in.value.size(); ++i)
            n.value[i] = factor * in.value[i];
        n.requires_grad = true;
        return push(std::move(n));
    }

    int relu(int x) {
        const Node& in = at(x);
        Node n;
        n.kind = Op::relu;
        n.a = x;
        n.h = in.h;
        n.w = in.w;
        n.c = in.c;
        n.value.resize(in.value.size());
        for (std::size_t i = 0; i < in.value.size(); ++i)
            n.value[i] = in.value[i] > T(0) ? in.value[i] : T(0);
        n.requires_grad = in.requires_grad;
        return push(std::move(n));
    }

    // Concatenate along channels (pixel-interleaved layout).
    int concat(int a, int b) {
        const Node& na = at(a);
        const Node& nb = at(b);
        if (na.h != nb.h || na.w != nb.w)
            throw ShapeError("tape concat: spatial dims differ");
        Node n;
        n.kind = Op::concat;
        n.a = a;
        n.b = b;
        n.h = na.h;
        n.w = na.w;
        n.c = na.c + nb.c;
        n.value.resize(std::size_t(n.h) * n.w * n.c);
        const std::size_t pixels = std::size_t(n.h) * n.w;
        for (std::size_t p = 0; p < pixels; ++p) {
            for (int j = 0; j < na.c; ++j)
                n.value[p * std::size_t(n.c) + std::size_t(j)] =
                    na.value[p * std::size_t(na.c) + std::size_t(j)];
            for (int j = 0; j < nb.c; ++j)
                n.value[p * std::size_t(n.c) + std::size_t(na.c + j)] =
                    nb.value[p * std::size_t(nb.c) + std::size_t(j)];
        }
        n.requires_grad = na.requires_grad || nb.requires_grad;
        return push(std::move(n));
    }

    // Scalar node: sum of squares of all entries (double accumulation).
    int sumsq(int x) {
        const Node& in = at(x);
        Node n;
        n.kind = Op::sumsq;
        n.a = x;
        n.h = 1;
        n.w = 1;
        n.c = 1;
        double acc = 0.0;
        for (T v : in.value)
            acc += double(v) * double(v);
        n.value.assign(1, T(acc));
        n.requires_grad = in.requires_grad;
        return push(std::move(n));
    }

    const std::vector<T>& value(int id) const { return at(id).value; }
    double scalar_value(int id) const {
        const Node& n = at(id);
        if (n.value.size() != 1)
            throw ShapeError("tape node is not scalar");
        return double(n.value[0]);
    }

    // Seeds d loss / d loss = 1 and accumulates parameter gradients.
    void backward(int loss_id, GradientAccumulator<T>& grads) {
        for (auto& n : nodes_)
            n.grad.assign(n.value.size(), T(0));
        at_mut(loss_id).grad[0] = T(1);

        for (int id = loss_id; id >= 0; --id) {
            Node& n = at_mut(id);
            if (!n.requires_grad && n.kind != Op::conv && n.kind != Op::adjoint)
                continue;
            switch (n.kind) {
            case Op::leaf:
                break;
            case Op::conv: {
                const Node& in = at(n.a);
                if (in.requires_grad) {
                    std::vector<T> dx(in.value.size());
                    conv2d_adjoint_raw(n.grad.data(), n.h, n.w, n.c, n.bank.weights.data(),
                                       n.bank.size, n.bank.in_bands, dx.data());
                    accumulate(at_mut(n.a).grad, dx);
                }
                route_weight_grad(conv_weight_grad_raw(n.grad.data(), n.bank.out_bands,
                                                       in.value.data(), n.bank.in_bands, n.h, n.w,
                                                       n.bank.size),
                                  n, grads);
                break;
            }
            case Op::adjoint: {
                const Node& in = at(n.a);
                if (in.requires_grad) {
                    std::vector<T> dy(in.value.size());
                    conv2d_same_raw(n.grad.data(), n.h, n.w, n.c, n.bank.weights.data(),
                                    n.bank.size, n.bank.out_bands, dy.data());
                    accumulate(at_mut(n.a).grad, dy);
                }
                route_weight_grad(conv_weight_grad_raw(in.value.data(), n.bank.out_bands,
                                                       n.grad.data(), n.bank.in_bands, n.h, n.w,
                                                       n.bank.size),
                                  n, grads);
                break;
            }
            case Op::add:
                if (at(n.a).requires_grad)
                    accumulate(at_mut(n.a).grad, n.grad);
                if (at(n.b).requires_grad)
                    accumulate(at_mut(n.b).grad, n.grad);
                break;
            case Op::sub:
                if (at(n.a).requires_grad)
                    accumulate(at_mut(n.a).grad, n.grad);
                if (at(n.b).requires_grad) {
                    Node& nb = at_mut(n.b);
                    for (std::size_t i = 0; i < n.grad.size(); ++i)
                        nb.grad[i] -= n.grad[i];
                }
                break;
            case Op::scale: {
                const Node& in = at(n.a);
                if (in.requires_grad) {
                    Node& na = at_mut(n.a);
                    for (std::size_t i = 0; i < n.grad.size(); ++i)
                        na.grad[i] += n.factor * n.grad[i];
                }
                double dfac = 0.0;
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    dfac += double(n.grad[i]) * double(in.value[i]);
                grads.slots.at(std::size_t(n.route.slot_a))[0] += T(dfac);
                break;
            }
            case Op::relu: {
                const Node& in = at(n.a);
                if (in.requires_grad) {
                    Node& na = at_mut(n.a);
                    for (std::size_t i = 0; i < n.grad.size(); ++i)
                        if (in.value[i] > T(0))
                            na.grad[i] += n.grad[i];
                }
                break;
            }
            case Op::concat: {
                const Node& na = at(n.a);
                const Node& nb = at(n.b);
                const std::size_t pixels = std::size_t(n.h) * n.w;
                if (na.requires_grad) {
                    Node& ga = at_mut(n.a);
                    for (std::size_t p = 0; p < pixels; ++p)
                        for (int j = 0; j < na.c; ++j)
                            ga.grad[p * std::size_t(na.c) + std::size_t(j)] +=
                                n.grad[p * std::size_t(n.c) + std::size_t(j)];
                }
                if (nb.requires_grad) {
                    Node& gb = at_mut(n.b);
                    for (std::size_t p = 0; p < pixels; ++p)
                        for (int j = 0; j < nb.c; ++j)
                            gb.grad[p * std::size_t(nb.c) + std::size_t(j)] +=
                                n.grad[p * std::size_t(n.c) + std::size_t(na.c + j)];
                }
                break;
            }
            case Op::sumsq: {
                const Node& in = at(n.a);
                if (in.requires_grad) {
                    Node& na = at_mut(n.a);
                    const T g = n.grad[0];
                    for (std::size_t i = 0; i < in.value.size(); ++i)
                        na.grad[i] += T(2) * in.value[i] * g;
                }
                break;
            }
            default:
                throw Error(ErrorCode::generic, "unsupported op on tape during backward");
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op { leaf, conv, adjoint, add, sub, scale, relu, concat, sumsq };

    struct Node {
        Op kind = Op::leaf;
        int a = -1, b = -1;
        int h = 0, w = 0, c = 0;
        std::vector<T> value;
        std::vector<T> grad;
        FilterBank<T> bank;  // conv/adjoint only
        DwRoute route;       // conv/adjoint weight slots; scale scalar slot
        T factor = T(0);     // scale only
        bool requires_grad = true;
    };

    std::vector<Node> nodes_;

    int push(Node&& n) {
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }
    const Node& at(int id) const { return nodes_.at(std::size_t(id)); }
    Node& at_mut(int id) { return nodes_.at(std::size_t(id)); }

    int binary(Op kind, int a, int b) {
        const Node& na = at(a);
        const Node& nb = at(b);
        if (na.h != nb.h || na.w != nb.w || na.c != nb.c)
            throw ShapeError("tape binary op: operand shapes differ");
        Node n;
        n.kind = kind;
        n.a = a;
        n.b = b;
        n.h = na.h;
        n.w = na.w;
        n.c = na.c;
        n.value.resize(na.value.size());
        if (kind == Op::add)
            for (std::size_t i = 0; i < n.value.size(); ++i)
                n.value[i] = na.value[i] + nb.value[i];
        else
            for (std::size_t i = 0; i < n.value.size(); ++i)
                n.value[i] = na.value[i] - nb.value[i];
        n.requires_grad = na.requires_grad || nb.requires_grad;
        return push(std::move(n));
    }

    static void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] += src[i];
    }

    // dw arrives in OIHW for the node's (possibly stacked) bank; split by
    // leading output-channel blocks, which are contiguous in OIHW.
    void route_weight_grad(const std::vector<T>& dw, const Node& n, GradientAccumulator<T>& grads) {
        const std::size_t per_out = std::size_t(n.bank.in_bands) * n.bank.size * n.bank.size;
        if (n.route.slot_b < 0) {
            auto& slot = grads.slots.at(std::size_t(n.route.slot_a));
            for (std::size_t i = 0; i < dw.size(); ++i)
                slot[i] += dw[i];
            return;
        }
        const std::size_t head = per_out * std::size_t(n.route.split_out);
        auto& sa = grads.slots.at(std::size_t(n.route.slot_a));
        auto& sb = grads.slots.at(std::size_t(n.route.slot_b));
        for (std::size_t i = 0; i < head; ++i)
            sa[i] += dw[i];
        for (std::size_t i = head; i < dw.size(); ++i)
            sb[i - head] += dw[i];
    }
};

// Builds the stacked common bank [d_common; h_common] -> (s,s,K->B+1),
// PAN output channel first (same construction as build_joint).
template <std::floating_point T>
FilterBank<T> stack_common(const AnalysisBanks<T>& banks) {
    const int s = banks.kernel_size(), k = banks.feature_count(), b = banks.ms_bands();
    FilterBank<T> l(s, k, b + 1);
    for (int ci = 0; ci < k; ++ci)
        for (int ky = 0; ky < s; ++ky)
            for (int kx = 0; kx < s; ++kx) {
                l.at(0, ci, ky, kx) = banks.d_common.at(0, ci, ky, kx);
                for (int j = 0; j < b; ++j)
                    l.at(j + 1, ci, ky, kx) = banks.h_common.at(j, ci, ky, kx);
            }
    return l;
}

// Handles to the recorded forward pass of one training sample.
struct TapeForward {
    int pred = -1;
    int loss = -1;
};

// Records network_forward + per-sample squared-error loss on the tape,
// mirroring the plain forward pass operation by operation so both compute
// identical values.
template <std::floating_point T>
TapeForward tape_network_forward(Tape<T>& tape, const FusionPair<T>& pair,
                                 const MultibandImage<T>& truth, const NetworkParams<T>& params) {
    pair.validate();
    params.validate();
    require_same_dims(truth, pair.ms_up, "truth/ms_up");
    const int hgt = pair.pan.height, wid = pair.pan.width;
    const int k = params.feature_count(), stages = params.stage_count();

    const int pan = tape.leaf(pair.pan.samples.data(), hgt, wid, 1);
    const int ms = tape.leaf(pair.ms_up.samples.data(), hgt, wid, pair.ms_up.bands);
    int c = tape.leaf_zeros(hgt, wid, k);
    int u = tape.leaf_zeros(hgt, wid, k);
    int v = tape.leaf_zeros(hgt, wid, k);

    using Route = typename Tape<T>::DwRoute;
    auto plain = [](int slot) { return Route{slot, -1, 0}; };
    const Route stacked{ParamSlots::d_common, ParamSlots::h_common, 1};
    const FilterBank<T> l_common = stack_common(params.analysis);

    auto prox_chain = [&](int x, int stage, int net, const ProxNetParams<T>& p) {
        int cur = x;
        for (int blk = 0; blk < int(p.blocks.size()); ++blk) {
            const int t1 = tape.conv(cur, p.blocks[std::size_t(blk)].conv1,
                                     plain(ParamSlots::prox_conv(stage, net, blk, 0)));
            const int t2 = tape.relu(t1);
            const int t3 = tape.conv(t2, p.blocks[std::size_t(blk)].conv2,
                                     plain(ParamSlots::prox_conv(stage, net, blk, 1)));
            cur = tape.add(cur, t3);
        }
        return cur;
    };

    for (int t = 0; t < stages; ++t) {
        const StageParams<T>& st = params.stages[std::size_t(t)];
        // u update
        const int p_c = tape.conv(c, params.analysis.d_common, plain(ParamSlots::d_common));
        const int p_u = tape.conv(u, params.analysis.d_unique, plain(ParamSlots::d_unique));
        const int eps_p = tape.sub(tape.add(p_c, p_u), pan);
        const int grad_u = tape.adjoint(eps_p, params.analysis.d_unique, plain(ParamSlots::d_unique));
        const int u_half = tape.sub(u, tape.scale(grad_u, params.eta1, ParamSlots::eta1(stages)));
        const int u_new = prox_chain(u_half, t, 0, st.theta_u);
        // v update
        const int m_c = tape.conv(c, params.analysis.h_common, plain(ParamSlots::h_common));
        const int m_v = tape.conv(v, params.analysis.h_unique, plain(ParamSlots::h_unique));
        const int eps_m = tape.sub(tape.add(m_c, m_v), ms);
        const int grad_v = tape.adjoint(eps_m, params.analysis.h_unique, plain(ParamSlots::h_unique));
        const int v_half = tape.sub(v, tape.scale(grad_v, params.eta2, ParamSlots::eta2(stages)));
        const int v_new = prox_chain(v_half, t, 1, st.theta_v);
        // c update on joint operands built from the fresh u, v
        const int du = tape.conv(u_new, params.analysis.d_unique, plain(ParamSlots::d_unique));
        const int hv = tape.conv(v_new, params.analysis.h_unique, plain(ParamSlots::h_unique));
        const int n_joint = tape.concat(tape.sub(pan, du), tape.sub(ms, hv));
        const int res = tape.sub(tape.conv(c, l_common, stacked), n_joint);
        const int grad_c = tape.adjoint(res, l_common, stacked);
        const int c_half = tape.sub(c, tape.scale(grad_c, params.eta3, ParamSlots::eta3(stages)));
        const int c_new = prox_chain(c_half, t, 2, st.theta_c);
        u = u_new;
        v = v_new;
        c = c_new;
    }

    const int oc = tape.conv(c, params.synthesis.g_common, plain(ParamSlots::g_common));
    const int ou = tape.conv(u, params.synthesis.g_unique_pan, plain(ParamSlots::g_unique_pan));
    const int ov = tape.conv(v, params.synthesis.g_unique_ms, plain(ParamSlots::g_unique_ms));
    const int o = tape.add(tape.add(oc, ou), ov);

    const int truth_leaf = tape.leaf(truth.samples.data(), truth.height, truth.width, truth.bands);
    const int diff = tape.sub(o, truth_leaf);
    const int loss = tape.sumsq(diff);
    return TapeForward{o, loss};
}

} // namespace pansharp
