#pragma once

#include <cstddef>
#include <vector>

#include "pansharp/errors.hpp"
#include "pansharp/parallel.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

// All convolutions are zero-padded cross-correlations with "same" output size.
// For kernel size s the input is padded (s-1)/2 on top/left and s/2 on
// bottom/right, so even kernels stay aligned and every map keeps its M x N grid.
inline int pad_lo(int s) { return (s - 1) / 2; }

namespace detail {

// Repack OIHW weights as [ky][kx][ci][o] so the pixel loops below run over
// contiguous memory in both operands.
template <std::floating_point T>
std::vector<T> pack_kkio(const T* w, int s, int in, int out) {
    std::vector<T> p(static_cast<std::size_t>(s) * s * in * out);
    for (int o = 0; o < out; ++o)
        for (int ci = 0; ci < in; ++ci)
            for (int ky = 0; ky < s; ++ky)
                for (int kx = 0; kx < s; ++kx)
                    p[((static_cast<std::size_t>(ky) * s + kx) * in + ci) * out + o] =
                        w[((static_cast<std::size_t>(o) * in + ci) * s + ky) * s + kx];
    return p;
}

} // namespace detail

/// out[y,x,o] = sum_{ci,ky,kx} w[o,ci,ky,kx] * in[y+ky-pad, x+kx-pad, ci]
/// (zero outside the grid). in: (H,W,Cin) interleaved, w: OIHW, out: (H,W,Cout).
template <std::floating_point T>
void conv2d_same_raw(const T* in, int H, int W, int Cin, const T* w, int s, int Cout, T* out) {
    const int p = pad_lo(s);
    const std::vector<T> wk = detail::pack_kkio(w, s, Cin, Cout);
    parallel_for_rows(H, [&](int y0, int y1) {
        std::vector<T> acc(static_cast<std::size_t>(Cout));
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < W; ++x) {
                std::fill(acc.begin(), acc.end(), T(0));
                for (int ky = 0; ky < s; ++ky) {
                    const int yy = y + ky - p;
                    if (yy < 0 || yy >= H) continue;
                    for (int kx = 0; kx < s; ++kx) {
                        const int xx = x + kx - p;
                        if (xx < 0 || xx >= W) continue;
                        const T* px = in + (static_cast<std::size_t>(yy) * W + xx) * Cin;
                        const T* ws = wk.data() + (static_cast<std::size_t>(ky) * s + kx) * Cin * Cout;
                        for (int ci = 0; ci < Cin; ++ci) {
                            const T v = px[ci];
                            const T* wo = ws + static_cast<std::size_t>(ci) * Cout;
                            for (int o = 0; o < Cout; ++o) acc[o] += v * wo[o];
                        }
                    }
                }
                T* op = out + (static_cast<std::size_t>(y) * W + x) * Cout;
                for (int o = 0; o < Cout; ++o) op[o] = acc[o];
            }
        }
    });
}

/// Exact adjoint of conv2d_same_raw under the Euclidean inner product:
/// out[y,x,ci] = sum_{o,ky,kx} w[o,ci,ky,kx] * g[y-ky+pad, x-kx+pad, o].
template <std::floating_point T>
void conv2d_adjoint_raw(const T* g, int H, int W, int Cout, const T* w, int s, int Cin, T* out) {
    const int p = pad_lo(s);
    const std::vector<T> wk = detail::pack_kkio(w, s, Cin, Cout);
    parallel_for_rows(H, [&](int y0, int y1) {
        std::vector<T> acc(static_cast<std::size_t>(Cin));
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < W; ++x) {
                std::fill(acc.begin(), acc.end(), T(0));
                for (int ky = 0; ky < s; ++ky) {
                    const int yy = y - ky + p;
                    if (yy < 0 || yy >= H) continue;
                    for (int kx = 0; kx < s; ++kx) {
                        const int xx = x - kx + p;
                        if (xx < 0 || xx >= W) continue;
                        const T* gp = g + (static_cast<std::size_t>(yy) * W + xx) * Cout;
                        const T* ws = wk.data() + (static_cast<std::size_t>(ky) * s + kx) * Cin * Cout;
                        for (int ci = 0; ci < Cin; ++ci) {
                            const T* wo = ws + static_cast<std::size_t>(ci) * Cout;
                            T a = T(0);
                            for (int o = 0; o < Cout; ++o) a += wo[o] * gp[o];
                            acc[ci] += a;
                        }
                    }
                }
                T* op = out + (static_cast<std::size_t>(y) * W + x) * Cin;
                for (int ci = 0; ci < Cin; ++ci) op[ci] = acc[ci];
            }
        }
    });
}

/// Gradient of a conv2d_same output w.r.t. the bank weights, in OIHW layout:
/// dw[o,ci,ky,kx] = sum_{y,x} a[y,x,o] * b[y+ky-pad, x+kx-pad, ci],
/// where (a, b) = (output grad, saved input) for a forward conv node and
/// (saved input, output grad) for an adjoint node.
template <std::floating_point T>
std::vector<T> conv_weight_grad_raw(const T* a, int Co, const T* b, int Ci, int H, int W, int s) {
    const int p = pad_lo(s);
    std::vector<T> dw(static_cast<std::size_t>(s) * s * Ci * Co, T(0));
    // accumulate in [ky][kx][ci][o], then unpack
    std::vector<T> acc(static_cast<std::size_t>(s) * s * Ci * Co, T(0));
    for (int ky = 0; ky < s; ++ky) {
        for (int kx = 0; kx < s; ++kx) {
            T* slab = acc.data() + (static_cast<std::size_t>(ky) * s + kx) * Ci * Co;
            const int ylo = std::max(0, p - ky);
            const int yhi = std::min(H, H + p - ky);
            for (int y = ylo; y < yhi; ++y) {
                const int yy = y + ky - p;
                const int xlo = std::max(0, p - kx);
                const int xhi = std::min(W, W + p - kx);
                for (int x = xlo; x < xhi; ++x) {
                    const int xx = x + kx - p;
                    const T* ap = a + (static_cast<std::size_t>(y) * W + x) * Co;
                    const T* bp = b + (static_cast<std::size_t>(yy) * W + xx) * Ci;
                    for (int ci = 0; ci < Ci; ++ci) {
                        const T bv = bp[ci];
                        T* row = slab + static_cast<std::size_t>(ci) * Co;
                        for (int o = 0; o < Co; ++o) row[o] += bv * ap[o];
                    }
                }
            }
        }
    }
    for (int o = 0; o < Co; ++o)
        for (int ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < s; ++ky)
                for (int kx = 0; kx < s; ++kx)
                    dw[((static_cast<std::size_t>(o) * Ci + ci) * s + ky) * s + kx] =
                        acc[((static_cast<std::size_t>(ky) * s + kx) * Ci + ci) * Co + o];
    return dw;
}

template <PixelGrid G, std::floating_point T>
void check_conv_dims(const G& input, const FilterBank<T>& bank, const char* what) {
    if (input.channels() != bank.in_bands)
        throw ShapeError(std::string(what) + ": input has " + std::to_string(input.channels()) +
                         " channels but bank expects " + std::to_string(bank.in_bands));
}

template <std::floating_point T>
MultibandImage<T> conv2d_same(const MultibandImage<T>& input, const FilterBank<T>& bank) {
    check_conv_dims(input, bank, "conv2d_same");
    MultibandImage<T> out(input.height, input.width, bank.out_bands);
    conv2d_same_raw(input.samples.data(), input.height, input.width, input.bands,
                    bank.weights.data(), bank.size, bank.out_bands, out.samples.data());
    return out;
}

template <std::floating_point T>
MultibandImage<T> conv2d_same(const FeatureStack<T>& input, const FilterBank<T>& bank) {
    check_conv_dims(input, bank, "conv2d_same");
    MultibandImage<T> out(input.height, input.width, bank.out_bands);
    conv2d_same_raw(input.maps.data(), input.height, input.width, input.count,
                    bank.weights.data(), bank.size, bank.out_bands, out.samples.data());
    return out;
}

// Stack-to-stack variant used by the learned proximal blocks, whose convs map
// feature channels to feature channels.
template <std::floating_point T>
FeatureStack<T> conv2d_same_features(const FeatureStack<T>& input, const FilterBank<T>& bank) {
    check_conv_dims(input, bank, "conv2d_same_features");
    FeatureStack<T> out(input.height, input.width, bank.out_bands);
    conv2d_same_raw(input.maps.data(), input.height, input.width, input.count,
                    bank.weights.data(), bank.size, bank.out_bands, out.maps.data());
    return out;
}

template <std::floating_point T>
FeatureStack<T> conv2d_adjoint(const MultibandImage<T>& input, const FilterBank<T>& bank) {
    if (input.bands != bank.out_bands)
        throw ShapeError("conv2d_adjoint: input has " + std::to_string(input.bands) +
                         " bands but bank produces " + std::to_string(bank.out_bands));
    FeatureStack<T> out(input.height, input.width, bank.in_bands);
    conv2d_adjoint_raw(input.samples.data(), input.height, input.width, input.bands,
                       bank.weights.data(), bank.size, bank.in_bands, out.maps.data());
    return out;
}

} // namespace pansharp
