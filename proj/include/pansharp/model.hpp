#pragma once

#include <cmath>
#include <string>

#include "pansharp/conv.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

// Filter banks of the observation model. The common banks couple the PAN and
// MS images through shared features; the unique banks carry the modality-
// specific detail. All banks share kernel size s and feature count K; the
// MS-side banks share the band count B.
template <std::floating_point T>
struct AnalysisBanks {
    FilterBank<T> d_common;  // (s,s,K->1) PAN from shared features
    FilterBank<T> d_unique;  // (s,s,K->1) PAN from PAN-only features
    FilterBank<T> h_common;  // (s,s,K->B) MS from shared features
    FilterBank<T> h_unique;  // (s,s,K->B) MS from MS-only features

    int kernel_size() const { return d_common.size; }
    int feature_count() const { return d_common.in_bands; }
    int ms_bands() const { return h_common.out_bands; }

    void validate() const {
        const int s = d_common.size, k = d_common.in_bands, b = h_common.out_bands;
        auto check = [&](const FilterBank<T>& f, int out, const char* name) {
            if (f.size != s || f.in_bands != k || f.out_bands != out)
                throw ShapeError(std::string("analysis bank ") + name + " is " + f.dims_str() +
                                 ", expected (" + std::to_string(s) + "," + std::to_string(s) +
                                 "," + std::to_string(k) + "->" + std::to_string(out) + ")");
        };
        check(d_common, 1, "d_common");
        check(d_unique, 1, "d_unique");
        check(h_common, b, "h_common");
        check(h_unique, b, "h_unique");
    }
};

// Banks that synthesize the fused high-resolution MS image from the three
// recovered feature stacks.
template <std::floating_point T>
struct SynthesisBanks {
    FilterBank<T> g_common;      // (s,s,K->B) from shared features
    FilterBank<T> g_unique_pan;  // (s,s,K->B) from PAN-only features
    FilterBank<T> g_unique_ms;   // (s,s,K->B) from MS-only features

    void validate() const {
        const int s = g_common.size, k = g_common.in_bands, b = g_common.out_bands;
        auto check = [&](const FilterBank<T>& f, const char* name) {
            if (f.size != s || f.in_bands != k || f.out_bands != b)
                throw ShapeError(std::string("synthesis bank ") + name + " is " + f.dims_str() +
                                 ", expected " + g_common.dims_str());
        };
        check(g_unique_pan, "g_unique_pan");
        check(g_unique_ms, "g_unique_ms");
    }
};

// The three unknowns of the fusion model: c is shared between PAN and MS,
// u is PAN-only, v is MS-only. All stacks have identical dims.
template <std::floating_point T>
struct FeatureTriple {
    FeatureStack<T> c;
    FeatureStack<T> u;
    FeatureStack<T> v;

    void validate() const {
        require_same_dims(c, u, "feature stacks c/u");
        require_same_dims(c, v, "feature stacks c/v");
    }

    static FeatureTriple zeros(int height, int width, int count) {
        return FeatureTriple{FeatureStack<T>(height, width, count),
                             FeatureStack<T>(height, width, count),
                             FeatureStack<T>(height, width, count)};
    }
};

// One fusion problem instance: the PAN image and the MS image upsampled to
// PAN resolution. Equal spatial dims; pan has exactly one band.
template <std::floating_point T>
struct FusionPair {
    MultibandImage<T> pan;
    MultibandImage<T> ms_up;

    void validate() const {
        if (pan.bands != 1)
            throw ShapeError("pan image must have one band, got " + pan.dims_str());
        if (pan.height != ms_up.height || pan.width != ms_up.width)
            throw ShapeError("pan " + pan.dims_str() + " and ms_up " + ms_up.dims_str() +
                             " differ in spatial dims");
    }
};

// Trade-off weights of the three sparsity terms.
template <std::floating_point T>
struct PriorWeights {
    T lambda_u = T(0);
    T lambda_v = T(0);
    T lambda_c = T(0);

    void validate() const {
        if (lambda_u < T(0) || lambda_v < T(0) || lambda_c < T(0))
            throw ConfigError("prior weights must be nonnegative");
    }
};

// P_hat = sum_k d_common_k (*) c_k + sum_k d_unique_k (*) u_k, one band.
template <std::floating_point T>
MultibandImage<T> synthesize_pan(const FeatureStack<T>& c, const FeatureStack<T>& u,
                                 const AnalysisBanks<T>& banks) {
    banks.validate();
    require_same_dims(c, u, "feature stacks c/u");
    MultibandImage<T> out = conv2d_same(c, banks.d_common);
    const MultibandImage<T> uu = conv2d_same(u, banks.d_unique);
    vec_axpy(out.samples, T(1), uu.samples);
    return out;
}

// M_hat = sum_k h_common_k (*) c_k + sum_k h_unique_k (*) v_k, B bands.
template <std::floating_point T>
MultibandImage<T> synthesize_ms(const FeatureStack<T>& c, const FeatureStack<T>& v,
                                const AnalysisBanks<T>& banks) {
    banks.validate();
    require_same_dims(c, v, "feature stacks c/v");
    MultibandImage<T> out = conv2d_same(c, banks.h_common);
    const MultibandImage<T> vv = conv2d_same(v, banks.h_unique);
    vec_axpy(out.samples, T(1), vv.samples);
    return out;
}

// Fused high-resolution MS image from the recovered features.
template <std::floating_point T>
MultibandImage<T> reconstruct_hrms(const FeatureTriple<T>& features, const SynthesisBanks<T>& g) {
    g.validate();
    features.validate();
    MultibandImage<T> out = conv2d_same(features.c, g.g_common);
    const MultibandImage<T> uu = conv2d_same(features.u, g.g_unique_pan);
    const MultibandImage<T> vv = conv2d_same(features.v, g.g_unique_ms);
    vec_axpy(out.samples, T(1), uu.samples);
    vec_axpy(out.samples, T(1), vv.samples);
    return out;
}

// Operands of the joint shared-feature subproblem: the two data residuals that
// depend only on c are merged into a single (B+1)-band image n (PAN residual
// is band 0) matched by a stacked bank l_common = [d_common; h_common].
template <std::floating_point T>
struct JointOperands {
    MultibandImage<T> n;
    FilterBank<T> l_common;
};

template <std::floating_point T>
JointOperands<T> build_joint(const FusionPair<T>& pair, const FeatureTriple<T>& features,
                             const AnalysisBanks<T>& banks) {
    pair.validate();
    features.validate();
    banks.validate();
    const int hgt = pair.pan.height, wid = pair.pan.width;
    if (features.c.height != hgt || features.c.width != wid)
        throw ShapeError("features " + features.c.dims_str() + " do not match images " +
                         pair.pan.dims_str());
    const int b = banks.ms_bands();
    if (pair.ms_up.bands != b)
        throw ShapeError("ms_up has " + std::to_string(pair.ms_up.bands) + " bands, banks expect " +
                         std::to_string(b));

    const MultibandImage<T> du = conv2d_same(features.u, banks.d_unique);
    const MultibandImage<T> hv = conv2d_same(features.v, banks.h_unique);

    JointOperands<T> out;
    out.n = MultibandImage<T>(hgt, wid, b + 1);
    for (int y = 0; y < hgt; ++y)
        for (int x = 0; x < wid; ++x) {
            out.n.at(y, x, 0) = pair.pan.at(y, x, 0) - du.at(y, x, 0);
            for (int j = 0; j < b; ++j)
                out.n.at(y, x, j + 1) = pair.ms_up.at(y, x, j) - hv.at(y, x, j);
        }

    const int s = banks.kernel_size(), k = banks.feature_count();
    out.l_common = FilterBank<T>(s, k, b + 1);
    for (int ci = 0; ci < k; ++ci)
        for (int ky = 0; ky < s; ++ky)
            for (int kx = 0; kx < s; ++kx) {
                out.l_common.at(0, ci, ky, kx) = banks.d_common.at(0, ci, ky, kx);
                for (int j = 0; j < b; ++j)
                    out.l_common.at(j + 1, ci, ky, kx) = banks.h_common.at(j, ci, ky, kx);
            }
    return out;
}

// Full variational objective: two quadratic data terms (with the 1/2 factor
// carried so their gradients are exactly the adjoint-of-residual expressions
// used by the solver) plus weighted l1 penalties on the three feature stacks.
template <std::floating_point T>
double objective_value(const FusionPair<T>& pair, const FeatureTriple<T>& features,
                       const AnalysisBanks<T>& banks, const PriorWeights<T>& w) {
    pair.validate();
    features.validate();
    banks.validate();
    w.validate();
    const MultibandImage<T> p_hat = synthesize_pan(features.c, features.u, banks);
    const MultibandImage<T> m_hat = synthesize_ms(features.c, features.v, banks);
    require_same_dims(pair.pan, p_hat, "pan/synthesized pan");
    require_same_dims(pair.ms_up, m_hat, "ms_up/synthesized ms");

    double data = 0.0;
    for (std::size_t i = 0; i < pair.pan.samples.size(); ++i) {
        const double r = double(pair.pan.samples[i]) - double(p_hat.samples[i]);
        data += r * r;
    }
    for (std::size_t i = 0; i < pair.ms_up.samples.size(); ++i) {
        const double r = double(pair.ms_up.samples[i]) - double(m_hat.samples[i]);
        data += r * r;
    }

    auto l1 = [](const FeatureStack<T>& f) {
        double acc = 0.0;
        for (T v : f.maps)
            acc += std::abs(double(v));
        return acc;
    };
    return 0.5 * data + double(w.lambda_u) * l1(features.u) + double(w.lambda_v) * l1(features.v) +
           double(w.lambda_c) * l1(features.c);
}

} // namespace pansharp
