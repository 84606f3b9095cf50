#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pansharp/errors.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

// Mean spectral angle (degrees) between corresponding pixel vectors. Pixels
// with a zero-norm spectrum in either image are excluded from the mean.
template <std::floating_point T>
double sam(const MultibandImage<T>& fused, const MultibandImage<T>& reference) {
    require_same_dims(fused, reference, "sam operands");
    if (fused.bands < 2)
        throw ShapeError("sam needs >= 2 bands, got " + std::to_string(fused.bands));
    const int pixels = fused.height * fused.width;
    double acc = 0.0;
    int counted = 0;
    for (int p = 0; p < pixels; ++p) {
        const T* f = fused.samples.data() + std::size_t(p) * fused.bands;
        const T* r = reference.samples.data() + std::size_t(p) * fused.bands;
        double dot = 0.0, nf = 0.0, nr = 0.0;
        for (int b = 0; b < fused.bands; ++b) {
            dot += double(f[b]) * double(r[b]);
            nf += double(f[b]) * double(f[b]);
            nr += double(r[b]) * double(r[b]);
        }
        if (nf == 0.0 || nr == 0.0)
            continue;
        const double c = std::clamp(dot / std::sqrt(nf * nr), -1.0, 1.0);
        acc += std::acos(c);
        ++counted;
    }
    if (counted == 0)
        throw UndefinedMetricError("sam: every pixel has a zero-norm spectrum");
    return acc / double(counted) * 180.0 / std::numbers::pi;
}

// Relative dimensionless global error: 100/ratio * sqrt(mean_b (RMSE_b/mu_b)^2)
// with mu_b the reference band mean.
template <std::floating_point T>
double ergas(const MultibandImage<T>& fused, const MultibandImage<T>& reference, int ratio) {
    require_same_dims(fused, reference, "ergas operands");
    if (ratio < 1)
        throw ConfigError("ergas requires ratio >= 1");
    const int pixels = fused.height * fused.width;
    double acc = 0.0;
    for (int b = 0; b < fused.bands; ++b) {
        double se = 0.0, mean = 0.0;
        for (int p = 0; p < pixels; ++p) {
            const double f = double(fused.samples[std::size_t(p) * fused.bands + b]);
            const double r = double(reference.samples[std::size_t(p) * fused.bands + b]);
            se += (f - r) * (f - r);
            mean += r;
        }
        mean /= double(pixels);
        if (mean == 0.0)
            throw UndefinedMetricError("ergas: reference band " + std::to_string(b) +
                                       " has zero mean");
        const double rmse = std::sqrt(se / double(pixels));
        acc += (rmse / mean) * (rmse / mean);
    }
    return 100.0 / double(ratio) * std::sqrt(acc / double(fused.bands));
}

namespace detail {

// Zero-padded 3x3 Laplacian [[0,-1,0],[-1,4,-1],[0,-1,0]] of one band.
template <std::floating_point T>
std::vector<double> laplacian_band(const MultibandImage<T>& img, int band) {
    std::vector<double> out(std::size_t(img.height) * img.width);
    auto px = [&](int y, int x) -> double {
        if (y < 0 || y >= img.height || x < 0 || x >= img.width)
            return 0.0;
        return double(img.at(y, x, band));
    };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out[std::size_t(y) * img.width + std::size_t(x)] =
                4.0 * px(y, x) - px(y - 1, x) - px(y + 1, x) - px(y, x - 1) - px(y, x + 1);
    return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b,
                      const char* what) {
    const double n = double(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0)
        throw UndefinedMetricError(std::string(what) + ": zero-variance operand");
    // Pearson is bounded by [-1, 1] in exact arithmetic; guard the few-ulp
    // round-off excess that identical inputs can produce.
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

} // namespace detail

// Spatial correlation: per-band Pearson correlation of Laplacian-filtered
// images, averaged over bands.
template <std::floating_point T>
double scc(const MultibandImage<T>& fused, const MultibandImage<T>& reference) {
    require_same_dims(fused, reference, "scc operands");
    double acc = 0.0;
    for (int b = 0; b < fused.bands; ++b)
        acc += detail::pearson(detail::laplacian_band(fused, b),
                               detail::laplacian_band(reference, b), "scc");
    return acc / double(fused.bands);
}

// Universal image quality index of two single-band windows:
// (4*cov*ma*mb) / ((va+vb)(ma^2+mb^2)), population moments. A zero
// denominator (constant equal-magnitude means or both windows constant)
// returns the designated neutral value 0.
inline double uiqi_block(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ShapeError("uiqi_block needs equal windows of >= 2 pixels");
    const double n = double(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    cov /= n;
    va /= n;
    vb /= n;
    const double denom = (va + vb) * (ma * ma + mb * mb);
    if (denom == 0.0)
        return 0.0;
    return 4.0 * cov * ma * mb / denom;
}

namespace detail {

// Cayley-Dickson product of two hypercomplex numbers of power-of-two length:
// (a,b)(c,d) = (ac - d*b, da + bc*), with conjugation (a,b)* = (a*, -b).
inline void hc_conj(std::vector<double>& x) {
    for (std::size_t i = 1; i < x.size(); ++i)
        x[i] = -x[i];
}

inline std::vector<double> hc_mul(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t d = x.size();
    if (d == 1)
        return {x[0] * y[0]};
    const std::size_t h = d / 2;
    const std::vector<double> a(x.begin(), x.begin() + std::ptrdiff_t(h));
    const std::vector<double> b(x.begin() + std::ptrdiff_t(h), x.end());
    const std::vector<double> c(y.begin(), y.begin() + std::ptrdiff_t(h));
    const std::vector<double> e(y.begin() + std::ptrdiff_t(h), y.end());
    std::vector<double> e_conj = e;
    hc_conj(e_conj);
    std::vector<double> c_conj = c;
    hc_conj(c_conj);
    const std::vector<double> first_a = hc_mul(a, c);
    const std::vector<double> first_b = hc_mul(e_conj, b);
    const std::vector<double> second_a = hc_mul(e, a);
    const std::vector<double> second_b = hc_mul(b, c_conj);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < h; ++i) {
        out[i] = first_a[i] - first_b[i];
        out[h + i] = second_a[i] + second_b[i];
    }
    return out;
}

inline std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v)
        p *= 2;
    return p;
}

} // namespace detail

// Hypercomplex generalization of UIQI: pixels are 2^n-dimensional Cayley-
// Dickson numbers (bands zero-padded up to 2^n), the index is computed on
// non-overlapping block x block windows and averaged. Degenerate windows
// contribute the neutral 0, matching uiqi_block.
template <std::floating_point T>
double q2n(const MultibandImage<T>& fused, const MultibandImage<T>& reference, int block = 32) {
    require_same_dims(fused, reference, "q2n operands");
    if (block < 2)
        throw ConfigError("q2n block must be >= 2");
    if (fused.height < block || fused.width < block)
        throw UndefinedMetricError("q2n: image " + fused.dims_str() +
                                   " smaller than one " + std::to_string(block) + "x" +
                                   std::to_string(block) + " block");
    const std::size_t dim = detail::next_pow2(std::size_t(fused.bands));

    auto hyper = [&](const MultibandImage<T>& img, int y, int x) {
        std::vector<double> z(dim, 0.0);
        for (int b = 0; b < img.bands; ++b)
            z[std::size_t(b)] = double(img.at(y, x, b));
        return z;
    };

    const int by = fused.height / block, bx = fused.width / block;
    double acc = 0.0;
    int windows = 0;
    std::vector<double> mu_f(dim), mu_r(dim), cov(dim), zf(dim), zr(dim);
    for (int wy = 0; wy < by; ++wy)
        for (int wx = 0; wx < bx; ++wx) {
            const int y0 = wy * block, x0 = wx * block;
            const double n = double(block) * block;
            std::fill(mu_f.begin(), mu_f.end(), 0.0);
            std::fill(mu_r.begin(), mu_r.end(), 0.0);
            for (int y = y0; y < y0 + block; ++y)
                for (int x = x0; x < x0 + block; ++x)
                    for (int b = 0; b < fused.bands; ++b) {
                        mu_f[std::size_t(b)] += double(fused.at(y, x, b));
                        mu_r[std::size_t(b)] += double(reference.at(y, x, b));
                    }
            for (std::size_t i = 0; i < dim; ++i) {
                mu_f[i] /= n;
                mu_r[i] /= n;
            }
            std::fill(cov.begin(), cov.end(), 0.0);
            double var_f = 0.0, var_r = 0.0;
            for (int y = y0; y < y0 + block; ++y)
                for (int x = x0; x < x0 + block; ++x) {
                    zf = hyper(fused, y, x);
                    zr = hyper(reference, y, x);
                    for (std::size_t i = 0; i < dim; ++i) {
                        zf[i] -= mu_f[i];
                        zr[i] -= mu_r[i];
                        var_f += zf[i] * zf[i];
                        var_r += zr[i] * zr[i];
                    }
                    detail::hc_conj(zr);
                    const std::vector<double> prod = detail::hc_mul(zf, zr);
                    for (std::size_t i = 0; i < dim; ++i)
                        cov[i] += prod[i];
                }
            var_f /= n;
            var_r /= n;
            double cov_mod = 0.0, mf = 0.0, mr = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                cov_mod += cov[i] / n * (cov[i] / n);
                mf += mu_f[i] * mu_f[i];
                mr += mu_r[i] * mu_r[i];
            }
            cov_mod = std::sqrt(cov_mod);
            const double denom = (var_f + var_r) * (mf + mr);
            acc += denom == 0.0 ? 0.0 : 4.0 * cov_mod * std::sqrt(mf) * std::sqrt(mr) / denom;
            ++windows;
        }
    // The index is bounded by 1 in exact arithmetic; round-off on
    // near-identical inputs can push the mean a few ulps past it.
    return std::min(acc / double(windows), 1.0);
}

namespace detail {

// Scalar blockwise UIQI between two single-band images, used by the
// no-reference indexes. Windows are non-overlapping block x block tiles;
// when an image is smaller than the block in either dimension the whole
// image forms a single window (native-scale MS operands are typically
// smaller than the default block).
template <std::floating_point T>
double blockwise_q(const MultibandImage<T>& a, int band_a, const MultibandImage<T>& b, int band_b,
                   int block) {
    // Spatial dims must agree; band counts may differ (a fused band is
    // routinely paired with the single PAN band), so bands are checked as
    // indices rather than for equality.
    if (a.height != b.height || a.width != b.width)
        throw ShapeError("blockwise q operands: dims " + a.dims_str() + " vs " + b.dims_str());
    if (band_a < 0 || band_a >= a.bands || band_b < 0 || band_b >= b.bands)
        throw ShapeError("blockwise q: band index out of range");
    const int win_h = std::min(block, a.height), win_w = std::min(block, a.width);
    const int by = a.height / win_h, bx = a.width / win_w;
    double acc = 0.0;
    int windows = 0;
    std::vector<double> va, vb;
    va.reserve(std::size_t(win_h) * win_w);
    vb.reserve(std::size_t(win_h) * win_w);
    for (int wy = 0; wy < by; ++wy)
        for (int wx = 0; wx < bx; ++wx) {
            va.clear();
            vb.clear();
            for (int y = wy * win_h; y < (wy + 1) * win_h; ++y)
                for (int x = wx * win_w; x < (wx + 1) * win_w; ++x) {
                    va.push_back(double(a.at(y, x, band_a)));
                    vb.push_back(double(b.at(y, x, band_b)));
                }
            acc += uiqi_block(va, vb);
            ++windows;
        }
    return acc / double(windows);
}

} // namespace detail

// Spectral distortion: mean absolute difference between the inter-band Q
// matrices of the fused image and of the upsampled MS image.
template <std::floating_point T>
double d_lambda(const MultibandImage<T>& fused, const MultibandImage<T>& ms_up, int block = 32) {
    require_same_dims(fused, ms_up, "d_lambda operands");
    const int bands = fused.bands;
    if (bands < 2)
        throw ShapeError("d_lambda needs >= 2 bands");
    double acc = 0.0;
    for (int b = 0; b < bands; ++b)
        for (int c = 0; c < bands; ++c) {
            if (b == c)
                continue;
            acc += std::abs(detail::blockwise_q(fused, b, fused, c, block) -
                            detail::blockwise_q(ms_up, b, ms_up, c, block));
        }
    return acc / double(bands * (bands - 1));
}

// Spatial distortion: for each band, |Q(fused_b, PAN) - Q(ms_b, PAN_LR)|,
// averaged; the low-resolution term pairs the native-scale MS with the PAN
// degraded to the same scale.
template <std::floating_point T>
double d_s(const MultibandImage<T>& fused, const MultibandImage<T>& ms,
           const MultibandImage<T>& pan, const MultibandImage<T>& pan_lr, int block = 32) {
    if (fused.height != pan.height || fused.width != pan.width)
        throw ShapeError("d_s: fused " + fused.dims_str() + " and pan " + pan.dims_str() +
                         " differ in spatial dims");
    if (ms.height != pan_lr.height || ms.width != pan_lr.width)
        throw ShapeError("d_s: ms " + ms.dims_str() + " and pan_lr " + pan_lr.dims_str() +
                         " differ in spatial dims");
    if (fused.bands != ms.bands)
        throw ShapeError("d_s: fused and ms band counts differ");
    if (pan.bands != 1 || pan_lr.bands != 1)
        throw ShapeError("d_s: pan operands must be single-band");
    double acc = 0.0;
    for (int b = 0; b < fused.bands; ++b)
        acc += std::abs(detail::blockwise_q(fused, b, pan, 0, block) -
                        detail::blockwise_q(ms, b, pan_lr, 0, block));
    return acc / double(fused.bands);
}

inline double qnr(double dl, double ds) { return (1.0 - dl) * (1.0 - ds); }

// One evaluation result; reduced-reference fields and no-reference fields are
// mutually exclusive per mode.
struct MetricsReport {
    enum class Mode { reduced, full };
    Mode mode = Mode::reduced;
    std::optional<double> q2n_index;
    std::optional<double> sam_degrees;
    std::optional<double> ergas_index;
    std::optional<double> scc_index;
    std::optional<double> d_lambda_index;
    std::optional<double> d_s_index;
    std::optional<double> qnr_index;

    void validate() const {
        auto in = [](const std::optional<double>& v, double lo, double hi) {
            return !v.has_value() || (*v >= lo && *v <= hi);
        };
        // |Q| <= 1 pointwise, so the distortion means live in [0,2] and their
        // product form in [-1,1]; anything outside is a computation bug.
        if (!in(sam_degrees, 0.0, 180.0) || !in(q2n_index, -1.0, 1.0) ||
            !in(scc_index, -1.0, 1.0) || !(ergas_index.value_or(0.0) >= 0.0) ||
            !in(d_lambda_index, 0.0, 2.0) || !in(d_s_index, 0.0, 2.0) ||
            !in(qnr_index, -1.0, 1.0))
            throw Error(ErrorCode::generic, "metrics report violates bound constraints");
        const bool reduced = mode == Mode::reduced;
        const bool has_reduced = q2n_index || sam_degrees || ergas_index || scc_index;
        const bool has_full = d_lambda_index || d_s_index || qnr_index;
        if (reduced ? has_full : has_reduced)
            throw Error(ErrorCode::generic, "metrics report mixes reduced and full fields");
    }
};

template <std::floating_point T>
MetricsReport evaluate_reduced(const MultibandImage<T>& fused, const MultibandImage<T>& reference,
                               int ratio) {
    MetricsReport r;
    r.mode = MetricsReport::Mode::reduced;
    r.q2n_index = q2n(fused, reference);
    r.sam_degrees = sam(fused, reference);
    r.ergas_index = ergas(fused, reference, ratio);
    r.scc_index = scc(fused, reference);
    r.validate();
    return r;
}

// Full-resolution (no-reference) evaluation; needs the native-scale MS for
// the low-resolution Q terms of d_s alongside the upsampled MS for d_lambda.
template <std::floating_point T>
MetricsReport evaluate_full(const MultibandImage<T>& fused, const MultibandImage<T>& ms_up,
                            const MultibandImage<T>& ms, const MultibandImage<T>& pan,
                            const MultibandImage<T>& pan_lr) {
    MetricsReport r;
    r.mode = MetricsReport::Mode::full;
    r.d_lambda_index = d_lambda(fused, ms_up);
    r.d_s_index = d_s(fused, ms, pan, pan_lr);
    r.qnr_index = qnr(*r.d_lambda_index, *r.d_s_index);
    r.validate();
    return r;
}

// --- report serialization -------------------------------------------------

inline std::string metrics_csv_header() {
    return "id,mode,q2n,sam_degrees,ergas,scc,d_lambda,d_s,qnr";
}

namespace detail {

inline std::string fmt_opt(const std::optional<double>& v) {
    if (!v)
        return "";
    std::ostringstream os;
    os.precision(9);
    os << *v;
    return os.str();
}

} // namespace detail

inline std::string to_csv_row(const std::string& id, const MetricsReport& r) {
    using detail::fmt_opt;
    std::ostringstream os;
    os << id << ',' << (r.mode == MetricsReport::Mode::reduced ? "reduced" : "full") << ','
       << fmt_opt(r.q2n_index) << ',' << fmt_opt(r.sam_degrees) << ',' << fmt_opt(r.ergas_index)
       << ',' << fmt_opt(r.scc_index) << ',' << fmt_opt(r.d_lambda_index) << ','
       << fmt_opt(r.d_s_index) << ',' << fmt_opt(r.qnr_index);
    return os.str();
}

inline std::string to_json_line(const std::string& id, const MetricsReport& r) {
    std::ostringstream os;
    os.precision(9);
    os << "{\"id\":\"" << id << "\",\"mode\":\""
       << (r.mode == MetricsReport::Mode::reduced ? "reduced" : "full") << "\"";
    auto field = [&](const char* name, const std::optional<double>& v) {
        if (v)
            os << ",\"" << name << "\":" << *v;
    };
    field("q2n", r.q2n_index);
    field("sam_degrees", r.sam_degrees);
    field("ergas", r.ergas_index);
    field("scc", r.scc_index);
    field("d_lambda", r.d_lambda_index);
    field("d_s", r.d_s_index);
    field("qnr", r.qnr_index);
    os << "}";
    return os.str();
}

// Fieldwise mean and population standard deviation over a batch of reports of
// one mode; absent fields stay absent.
struct MetricsAggregate {
    MetricsReport mean;
    MetricsReport stddev;
    int count = 0;
};

inline MetricsAggregate aggregate_reports(const std::vector<MetricsReport>& reports) {
    if (reports.empty())
        throw ConfigError("aggregate_reports needs at least one report");
    MetricsAggregate agg;
    agg.count = int(reports.size());
    agg.mean.mode = agg.stddev.mode = reports[0].mode;
    auto field = [&](std::optional<double> MetricsReport::* member) {
        if (!(reports[0].*member).has_value())
            return;
        double m = 0.0;
        for (const auto& r : reports) {
            if (!(r.*member).has_value())
                throw ConfigError("aggregate_reports: field present in some reports only");
            m += *(r.*member);
        }
        m /= double(reports.size());
        double var = 0.0;
        for (const auto& r : reports)
            var += (*(r.*member) - m) * (*(r.*member) - m);
        var /= double(reports.size());
        agg.mean.*member = m;
        agg.stddev.*member = std::sqrt(var);
    };
    field(&MetricsReport::q2n_index);
    field(&MetricsReport::sam_degrees);
    field(&MetricsReport::ergas_index);
    field(&MetricsReport::scc_index);
    field(&MetricsReport::d_lambda_index);
    field(&MetricsReport::d_s_index);
    field(&MetricsReport::qnr_index);
    return agg;
}

} // namespace pansharp
