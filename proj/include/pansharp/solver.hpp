#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pansharp/conv.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/model.hpp"
#include "pansharp/rng.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

// Alternating proximal-gradient solver configuration. A step of 0 requests
// automatic sizing via power iteration on the corresponding operator.
template <std::floating_point T>
struct SolverConfig {
    PriorWeights<T> weights;
    double step_u = 0.0;  // 0 = auto
    double step_v = 0.0;  // 0 = auto
    double step_c = 0.0;  // 0 = auto
    int max_sweeps = 100;
    double rel_tol = 0.0;
    bool track_objective = true;

    void validate() const {
        weights.validate();
        if (step_u < 0 || step_v < 0 || step_c < 0)
            throw ConfigError("solver steps must be positive or 0 (auto)");
        if (max_sweeps < 0)
            throw ConfigError("max_sweeps must be nonnegative");
        if (rel_tol < 0)
            throw ConfigError("rel_tol must be nonnegative");
    }
};

struct SolverTrace {
    // When objective tracking is on: initial value followed by one entry per
    // sweep actually run (length sweeps_run + 1).
    std::vector<double> objective_per_sweep;
    int sweeps_run = 0;
    bool converged = false;
};

// Gradient of the PAN data term 1/2 ||synthesize_pan(c,u) - P||^2 in u:
// the adjoint of d_unique applied to the synthesis residual.
template <std::floating_point T>
FeatureStack<T> gradient_u(const FeatureStack<T>& c, const FeatureStack<T>& u,
                           const FusionPair<T>& pair, const AnalysisBanks<T>& banks) {
    MultibandImage<T> residual = synthesize_pan(c, u, banks);
    require_same_dims(residual, pair.pan, "synthesized pan/pan");
    vec_sub_inplace(residual.samples, pair.pan.samples);
    return conv2d_adjoint(residual, banks.d_unique);
}

// Gradient of the MS data term 1/2 ||synthesize_ms(c,v) - M||^2 in v.
template <std::floating_point T>
FeatureStack<T> gradient_v(const FeatureStack<T>& c, const FeatureStack<T>& v,
                           const FusionPair<T>& pair, const AnalysisBanks<T>& banks) {
    MultibandImage<T> residual = synthesize_ms(c, v, banks);
    require_same_dims(residual, pair.ms_up, "synthesized ms/ms_up");
    vec_sub_inplace(residual.samples, pair.ms_up.samples);
    return conv2d_adjoint(residual, banks.h_unique);
}

// Gradient of the joint shared-feature data term 1/2 ||l_common (*) c - n||^2,
// with n and l_common produced by build_joint.
template <std::floating_point T>
FeatureStack<T> gradient_c(const FeatureStack<T>& c, const MultibandImage<T>& n,
                           const FilterBank<T>& l_common) {
    MultibandImage<T> residual = conv2d_same(c, l_common);
    require_same_dims(residual, n, "synthesized joint/joint target");
    vec_sub_inplace(residual.samples, n.samples);
    return conv2d_adjoint(residual, l_common);
}

// Elementwise l1 prox: sign(x) * max(|x| - tau, 0), the exact minimizer of
// 1/2 (z - x)^2 + tau*|z|.
template <std::floating_point T>
T soft_threshold(T x, T tau) {
    if (tau < T(0))
        throw ConfigError("soft_threshold requires tau >= 0");
    const T mag = std::abs(x) - tau;
    if (mag <= T(0))
        return T(0);
    return x > T(0) ? mag : -mag;
}

template <std::floating_point T>
FeatureStack<T> soft_threshold(const FeatureStack<T>& x, T tau) {
    if (tau < T(0))
        throw ConfigError("soft_threshold requires tau >= 0");
    FeatureStack<T> out = x;
    for (T& v : out.maps)
        v = soft_threshold(v, tau);
    return out;
}

// Returned by estimate_step_size for an all-zero bank: the operator is zero,
// so any step size is safe.
inline double unbounded_step() { return std::numeric_limits<double>::infinity(); }

// Safe gradient step 1/sigma_hat^2 for the operator f -> bank (*) f, where
// sigma_hat estimates the largest singular value by power iteration on the
// normal operator (adjoint-of-conv after conv). The probe starts from a fixed
// seeded Gaussian stack, so the estimate is reproducible; the Rayleigh
// quotient sequence is non-decreasing in iters, so more iterations can only
// tighten (shrink) the returned step.
template <std::floating_point T>
double estimate_step_size(const FilterBank<T>& bank, int iters, int probe_height,
                          int probe_width) {
    if (iters < 1)
        throw ConfigError("estimate_step_size requires iters >= 1");
    if (probe_height < 1 || probe_width < 1)
        throw ConfigError("estimate_step_size requires positive probe dims");

    Rng rng(0x9e3779b97f4a7c15ull);
    FeatureStack<T> z(probe_height, probe_width, bank.in_bands);
    for (T& v : z.maps)
        v = T(rng.normal());
    double zn = std::sqrt(squared_norm(z.maps));
    if (zn == 0.0)
        return unbounded_step();
    for (T& v : z.maps)
        v = T(double(v) / zn);

    double sigma_sq = 0.0;
    for (int it = 0; it < iters; ++it) {
        const MultibandImage<T> az = conv2d_same(z, bank);
        sigma_sq = squared_norm(az.samples);  // Rayleigh quotient of A'A at unit z
        if (sigma_sq == 0.0)
            return unbounded_step();
        const FeatureStack<T> mz = conv2d_adjoint(az, bank);
        const double mn = std::sqrt(squared_norm(mz.maps));
        if (mn == 0.0)
            return unbounded_step();
        for (std::size_t i = 0; i < z.maps.size(); ++i)
            z.maps[i] = T(double(mz.maps[i]) / mn);
    }
    return 1.0 / sigma_sq;
}

namespace detail {

// Power-iteration estimates approach the true norm from below, so raw 1/sigma^2
// steps can slightly overshoot; auto mode shrinks them by this margin.
constexpr double kAutoStepSafety = 0.9;
constexpr int kAutoStepIters = 20;

inline double resolve_auto_step(double requested, double estimated) {
    if (requested > 0.0)
        return requested;
    if (std::isinf(estimated))
        return 1.0;  // zero operator: gradient is always zero, step is moot
    return kAutoStepSafety * estimated;
}

} // namespace detail

// Alternating proximal gradient over the three feature stacks, zero-
// initialized, sweeping u then v then c (the c sweep sees the just-updated
// u and v through rebuilt joint operands).
template <std::floating_point T>
std::pair<FeatureTriple<T>, SolverTrace> solve(const FusionPair<T>& pair,
                                               const AnalysisBanks<T>& banks,
                                               const SolverConfig<T>& cfg) {
    pair.validate();
    banks.validate();
    cfg.validate();
    const int hgt = pair.pan.height, wid = pair.pan.width;
    const int k = banks.feature_count();
    if (pair.ms_up.bands != banks.ms_bands())
        throw ShapeError("ms_up has " + std::to_string(pair.ms_up.bands) + " bands, banks expect " +
                         std::to_string(banks.ms_bands()));

    FeatureTriple<T> f = FeatureTriple<T>::zeros(hgt, wid, k);

    double eta_u = cfg.step_u, eta_v = cfg.step_v, eta_c = cfg.step_c;
    if (eta_u == 0.0)
        eta_u = detail::resolve_auto_step(
            0.0, estimate_step_size(banks.d_unique, detail::kAutoStepIters, hgt, wid));
    if (eta_v == 0.0)
        eta_v = detail::resolve_auto_step(
            0.0, estimate_step_size(banks.h_unique, detail::kAutoStepIters, hgt, wid));
    if (eta_c == 0.0) {
        const JointOperands<T> joint0 = build_joint(pair, f, banks);
        eta_c = detail::resolve_auto_step(
            0.0, estimate_step_size(joint0.l_common, detail::kAutoStepIters, hgt, wid));
    }

    const bool need_objective = cfg.track_objective || cfg.rel_tol > 0.0;
    SolverTrace trace;
    double prev_obj = 0.0;
    if (need_objective) {
        prev_obj = objective_value(pair, f, banks, cfg.weights);
        if (cfg.track_objective)
            trace.objective_per_sweep.push_back(prev_obj);
    }

    auto prox_step = [](FeatureStack<T>& x, const FeatureStack<T>& grad, double eta, double tau) {
        for (std::size_t i = 0; i < x.maps.size(); ++i)
            x.maps[i] = soft_threshold(T(double(x.maps[i]) - eta * double(grad.maps[i])), T(tau));
    };

    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        prox_step(f.u, gradient_u(f.c, f.u, pair, banks), eta_u, eta_u * double(cfg.weights.lambda_u));
        prox_step(f.v, gradient_v(f.c, f.v, pair, banks), eta_v, eta_v * double(cfg.weights.lambda_v));
        const JointOperands<T> joint = build_joint(pair, f, banks);
        prox_step(f.c, gradient_c(f.c, joint.n, joint.l_common), eta_c,
                  eta_c * double(cfg.weights.lambda_c));

        trace.sweeps_run = sweep + 1;
        if (!all_finite(f.u.maps) || !all_finite(f.v.maps) || !all_finite(f.c.maps))
            throw DivergenceError("non-finite feature values after sweep " +
                                  std::to_string(sweep + 1));

        if (need_objective) {
            const double obj = objective_value(pair, f, banks, cfg.weights);
            if (!std::isfinite(obj))
                throw DivergenceError("non-finite objective after sweep " +
                                      std::to_string(sweep + 1));
            if (cfg.track_objective)
                trace.objective_per_sweep.push_back(obj);
            if (cfg.rel_tol > 0.0) {
                const double denom = std::max(std::abs(prev_obj), 1e-30);
                if ((prev_obj - obj) / denom < cfg.rel_tol) {
                    trace.converged = true;
                    prev_obj = obj;
                    break;
                }
            }
            prev_obj = obj;
        }
    }
    return {std::move(f), trace};
}

} // namespace pansharp
