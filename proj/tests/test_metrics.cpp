#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "pansharp/errors.hpp"
#include "pansharp/metrics.hpp"
#include "pansharp/rng.hpp"
#include "pansharp/tensor.hpp"

using namespace pansharp;

namespace {

MultibandImage<double> random_image(Rng& rng, int h, int w, int b, double lo = 1.0,
                                    double hi = 2.0) {
    MultibandImage<double> img(h, w, b);
    for (double& v : img.samples)
        v = rng.uniform(lo, hi);
    return img;
}

// Independent UIQI realization used by the distortion-index oracles.
double uiqi_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = double(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    cov /= n;
    va /= n;
    vb /= n;
    const double denom = (va + vb) * (ma * ma + mb * mb);
    return denom == 0.0 ? 0.0 : 4.0 * cov * ma * mb / denom;
}

double blockwise_q_oracle(const MultibandImage<double>& a, int ba, const MultibandImage<double>& b,
                          int bb, int block) {
    const int wh = std::min(block, a.height), ww = std::min(block, a.width);
    const int by = a.height / wh, bx = a.width / ww;
    double acc = 0;
    int n = 0;
    for (int wy = 0; wy < by; ++wy)
        for (int wx = 0; wx < bx; ++wx) {
            std::vector<double> va, vb;
            for (int y = wy * wh; y < (wy + 1) * wh; ++y)
                for (int x = wx * ww; x < (wx + 1) * ww; ++x) {
                    va.push_back(a.at(y, x, ba));
                    vb.push_back(b.at(y, x, bb));
                }
            acc += uiqi_oracle(va, vb);
            ++n;
        }
    return acc / n;
}

// Complex-arithmetic oracle of the two-band hypercomplex index.
double q2_complex_oracle(const MultibandImage<double>& f, const MultibandImage<double>& r,
                         int block) {
    using C = std::complex<double>;
    const int by = f.height / block, bx = f.width / block;
    const double n = double(block) * block;
    double acc = 0;
    int windows = 0;
    for (int wy = 0; wy < by; ++wy)
        for (int wx = 0; wx < bx; ++wx) {
            C mf{0, 0}, mr{0, 0};
            for (int y = wy * block; y < (wy + 1) * block; ++y)
                for (int x = wx * block; x < (wx + 1) * block; ++x) {
                    mf += C(f.at(y, x, 0), f.at(y, x, 1));
                    mr += C(r.at(y, x, 0), r.at(y, x, 1));
                }
            mf /= n;
            mr /= n;
            C cov{0, 0};
            double vf = 0, vr = 0;
            for (int y = wy * block; y < (wy + 1) * block; ++y)
                for (int x = wx * block; x < (wx + 1) * block; ++x) {
                    const C zf = C(f.at(y, x, 0), f.at(y, x, 1)) - mf;
                    const C zr = C(r.at(y, x, 0), r.at(y, x, 1)) - mr;
                    cov += zf * std::conj(zr);
                    vf += std::norm(zf);
                    vr += std::norm(zr);
                }
            cov /= n;
            vf /= n;
            vr /= n;
            const double denom = (vf + vr) * (std::norm(mf) + std::norm(mr));
            acc += denom == 0.0 ? 0.0 : 4.0 * std::abs(cov) * std::abs(mf) * std::abs(mr) / denom;
            ++windows;
        }
    return acc / windows;
}

} // namespace

TEST_CASE("sam: closed-form angles, scale invariance, exclusions") {
    MultibandImage<double> f(1, 1, 2), r(1, 1, 2);
    f.samples = {1.0, 0.0};
    r.samples = {0.0, 1.0};
    CHECK(sam(f, r) == doctest::Approx(90.0));
    r.samples = {1.0, 1.0};
    CHECK(sam(f, r) == doctest::Approx(45.0));
    r.samples = {3.0, 0.0};
    CHECK(sam(f, r) == doctest::Approx(0.0));

    Rng rng(501);
    const auto a = random_image(rng, 6, 5, 4);
    const auto b = random_image(rng, 6, 5, 4);
    auto scaled = a;
    for (double& v : scaled.samples)
        v *= 7.5;
    CHECK(sam(scaled, b) == doctest::Approx(sam(a, b)).epsilon(1e-12));

    // Pixel 0 has a zero fused spectrum: only pixel 1 counts.
    MultibandImage<double> f2(1, 2, 2), r2(1, 2, 2);
    f2.samples = {0.0, 0.0, 1.0, 0.0};
    r2.samples = {5.0, 2.0, 1.0, 1.0};
    CHECK(sam(f2, r2) == doctest::Approx(45.0));

    MultibandImage<double> zeros(2, 2, 2);
    CHECK_THROWS_AS(sam(zeros, zeros), UndefinedMetricError);
    MultibandImage<double> mono(2, 2, 1);
    CHECK_THROWS_AS(sam(mono, mono), ShapeError);
    MultibandImage<double> other(2, 3, 2);
    CHECK_THROWS_AS(sam(f2, other), ShapeError);
}

TEST_CASE("sam matches a direct per-pixel arccos oracle") {
    Rng rng(503);
    const auto f = random_image(rng, 7, 6, 3);
    const auto r = random_image(rng, 7, 6, 3);
    double acc = 0.0;
    for (int p = 0; p < 42; ++p) {
        double dot = 0, nf = 0, nr = 0;
        for (int b = 0; b < 3; ++b) {
            const double fv = f.samples[std::size_t(p * 3 + b)];
            const double rv = r.samples[std::size_t(p * 3 + b)];
            dot += fv * rv;
            nf += fv * fv;
            nr += rv * rv;
        }
        acc += std::acos(dot / std::sqrt(nf * nr));
    }
    CHECK(sam(f, r) == doctest::Approx(acc / 42.0 * 180.0 / std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("ergas: exact value for constant relative offsets") {
    // Four constant bands with 10% error each at ratio 4: 100/4 * 0.1 = 2.5.
    MultibandImage<double> r(4, 4, 4), f(4, 4, 4);
    for (int p = 0; p < 16; ++p)
        for (int b = 0; b < 4; ++b) {
            const double base = double(b + 1) * 10.0;
            r.samples[std::size_t(p * 4 + b)] = base;
            f.samples[std::size_t(p * 4 + b)] = base * 1.1;
        }
    CHECK(ergas(f, r, 4) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(ergas(r, r, 4) == 0.0);
    CHECK_THROWS_AS(ergas(f, r, 0), ConfigError);

    MultibandImage<double> zero_mean(2, 2, 1);
    zero_mean.samples = {1.0, -1.0, 1.0, -1.0};
    CHECK_THROWS_AS(ergas(zero_mean, zero_mean, 4), UndefinedMetricError);
}

TEST_CASE("ergas matches a direct recomputation on random data") {
    Rng rng(509);
    const auto f = random_image(rng, 9, 8, 3);
    const auto r = random_image(rng, 9, 8, 3);
    double acc = 0.0;
    for (int b = 0; b < 3; ++b) {
        double se = 0, mean = 0;
        for (int p = 0; p < 72; ++p) {
            const double fv = f.samples[std::size_t(p * 3 + b)];
            const double rv = r.samples[std::size_t(p * 3 + b)];
            se += (fv - rv) * (fv - rv);
            mean += rv;
        }
        mean /= 72.0;
        acc += se / 72.0 / (mean * mean);
    }
    const double want = 100.0 / 2.0 * std::sqrt(acc / 3.0);
    CHECK(ergas(f, r, 2) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("scc: perfect correlation, anti-correlation, and an oracle") {
    Rng rng(521);
    const auto img = random_image(rng, 10, 9, 2);
    CHECK(scc(img, img) == doctest::Approx(1.0).epsilon(1e-12));
    auto neg = img;
    for (double& v : neg.samples)
        v = -v;
    CHECK(scc(img, neg) == doctest::Approx(-1.0).epsilon(1e-12));

    const auto other = random_image(rng, 10, 9, 2);
    // Oracle: zero-padded Laplacian then Pearson, written out longhand.
    double mean_corr = 0.0;
    for (int b = 0; b < 2; ++b) {
        std::vector<double> la, lb;
        auto px = [&](const MultibandImage<double>& m, int y, int x) {
            return (y < 0 || y >= m.height || x < 0 || x >= m.width) ? 0.0 : m.at(y, x, b);
        };
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 9; ++x) {
                la.push_back(4 * px(img, y, x) - px(img, y - 1, x) - px(img, y + 1, x) -
                             px(img, y, x - 1) - px(img, y, x + 1));
                lb.push_back(4 * px(other, y, x) - px(other, y - 1, x) - px(other, y + 1, x) -
                             px(other, y, x - 1) - px(other, y, x + 1));
            }
        const double n = double(la.size());
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < la.size(); ++i) {
            ma += la[i];
            mb += lb[i];
        }
        ma /= n;
        mb /= n;
        double sab = 0, saa = 0, sbb = 0;
        for (std::size_t i = 0; i < la.size(); ++i) {
            sab += (la[i] - ma) * (lb[i] - mb);
            saa += (la[i] - ma) * (la[i] - ma);
            sbb += (lb[i] - mb) * (lb[i] - mb);
        }
        mean_corr += sab / std::sqrt(saa * sbb);
    }
    CHECK(scc(img, other) == doctest::Approx(mean_corr / 2.0).epsilon(1e-12));

    MultibandImage<double> flat(4, 4, 1);  // all-zero Laplacian
    CHECK_THROWS_AS(scc(flat, img), ShapeError);  // dims differ
    MultibandImage<double> zeros(10, 9, 2);
    CHECK_THROWS_AS(scc(zeros, img), UndefinedMetricError);
}

TEST_CASE("uiqi_block: hand values and neutral degenerate windows") {
    CHECK(uiqi_block({1.0, 3.0}, {3.0, 5.0}) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(uiqi_block({1.0, 3.0}, {1.0, 3.0}) == doctest::Approx(1.0).epsilon(1e-12));
    // Negating both windows flips cov and the mean product together: still 1.
    CHECK(uiqi_block({1.0, 3.0}, {-1.0, -3.0}) == doctest::Approx(1.0).epsilon(1e-12));
    // Anti-correlated windows with matching positive means: -1.
    CHECK(uiqi_block({1.0, 3.0}, {3.0, 1.0}) == doctest::Approx(-1.0).epsilon(1e-12));
    // Both windows constant: zero variance and cov, neutral 0.
    CHECK(uiqi_block({2.0, 2.0}, {7.0, 7.0}) == 0.0);
    // Zero means: denominator vanishes, neutral 0.
    CHECK(uiqi_block({-1.0, 1.0}, {-2.0, 2.0}) == 0.0);
    CHECK_THROWS_AS(uiqi_block({1.0}, {2.0}), ShapeError);
    CHECK_THROWS_AS(uiqi_block({1.0, 2.0}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("q2n is 1 for identical non-constant images") {
    Rng rng(523);
    const auto img = random_image(rng, 32, 32, 3);
    CHECK(q2n(img, img) == doctest::Approx(1.0).epsilon(1e-12));
    const auto img5 = random_image(rng, 64, 32, 5);
    CHECK(q2n(img5, img5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("q2n reduces to |UIQI| for one band") {
    Rng rng(527);
    const auto a = random_image(rng, 32, 32, 1);
    const auto b = random_image(rng, 32, 32, 1);
    std::vector<double> va(a.samples.begin(), a.samples.end());
    std::vector<double> vb(b.samples.begin(), b.samples.end());
    CHECK(q2n(a, b) == doctest::Approx(std::abs(uiqi_oracle(va, vb))).epsilon(1e-12));
}

TEST_CASE("q2n matches a complex-number oracle for two bands") {
    Rng rng(529);
    const auto f = random_image(rng, 64, 32, 2, -1.0, 3.0);
    const auto r = random_image(rng, 64, 32, 2, -1.0, 3.0);
    CHECK(q2n(f, r) == doctest::Approx(q2_complex_oracle(f, r, 32)).epsilon(1e-12));
}

TEST_CASE("q2n rejects undersized images and bad blocks") {
    Rng rng(531);
    const auto small = random_image(rng, 31, 40, 2);
    CHECK_THROWS_AS(q2n(small, small), UndefinedMetricError);
    const auto ok = random_image(rng, 32, 32, 2);
    CHECK_THROWS_AS(q2n(ok, ok, 1), ConfigError);
    // Custom smaller blocks are allowed.
    CHECK(q2n(ok, ok, 8) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("d_lambda: zero on self and oracle on random data") {
    Rng rng(541);
    const auto ms_up = random_image(rng, 16, 16, 3);
    CHECK(d_lambda(ms_up, ms_up, 8) == doctest::Approx(0.0).scale(1.0));

    const auto fused = random_image(rng, 16, 16, 3);
    double acc = 0.0;
    for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) {
            if (b == c)
                continue;
            acc += std::abs(blockwise_q_oracle(fused, b, fused, c, 8) -
                            blockwise_q_oracle(ms_up, b, ms_up, c, 8));
        }
    CHECK(d_lambda(fused, ms_up, 8) == doctest::Approx(acc / 6.0).epsilon(1e-12));

    MultibandImage<double> mono(16, 16, 1);
    CHECK_THROWS_AS(d_lambda(mono, mono, 8), ShapeError);
}

TEST_CASE("d_s: zero when fused tracks pan exactly as ms tracks pan_lr") {
    Rng rng(547);
    const auto pan = random_image(rng, 32, 32, 1);
    const auto pan_lr = random_image(rng, 8, 8, 1);
    MultibandImage<double> fused(32, 32, 3), ms(8, 8, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int b = 0; b < 3; ++b)
                fused.at(y, x, b) = pan.at(y, x, 0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int b = 0; b < 3; ++b)
                ms.at(y, x, b) = pan_lr.at(y, x, 0);
    CHECK(d_s(fused, ms, pan, pan_lr, 8) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("d_s matches its definition on random data") {
    Rng rng(557);
    const auto fused = random_image(rng, 16, 16, 3);
    const auto pan = random_image(rng, 16, 16, 1);
    const auto ms = random_image(rng, 4, 4, 3);
    const auto pan_lr = random_image(rng, 4, 4, 1);
    double acc = 0.0;
    for (int b = 0; b < 3; ++b)
        acc += std::abs(blockwise_q_oracle(fused, b, pan, 0, 8) -
                        blockwise_q_oracle(ms, b, pan_lr, 0, 8));
    CHECK(d_s(fused, ms, pan, pan_lr, 8) == doctest::Approx(acc / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(d_s(fused, ms, random_image(rng, 16, 16, 2), pan_lr, 8), ShapeError);
    CHECK_THROWS_AS(d_s(fused, random_image(rng, 4, 4, 2), pan, pan_lr, 8), ShapeError);
    CHECK_THROWS_AS(d_s(fused, ms, pan, random_image(rng, 5, 4, 1), 8), ShapeError);
}

TEST_CASE("qnr composes the two distortions") {
    CHECK(qnr(0.0, 0.0) == 1.0);
    CHECK(qnr(0.2, 0.5) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(qnr(1.0, 0.3) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("evaluate_reduced fills exactly the reference-based fields") {
    Rng rng(563);
    const auto ref = random_image(rng, 32, 32, 3);
    const auto report = evaluate_reduced(ref, ref, 4);
    CHECK(report.mode == MetricsReport::Mode::reduced);
    REQUIRE(report.q2n_index.has_value());
    REQUIRE(report.sam_degrees.has_value());
    REQUIRE(report.ergas_index.has_value());
    REQUIRE(report.scc_index.has_value());
    CHECK_FALSE(report.d_lambda_index.has_value());
    CHECK_FALSE(report.d_s_index.has_value());
    CHECK_FALSE(report.qnr_index.has_value());
    CHECK(*report.q2n_index == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*report.sam_degrees == doctest::Approx(0.0).scale(1.0));
    CHECK(*report.ergas_index == doctest::Approx(0.0).scale(1.0));
    CHECK(*report.scc_index == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate_full fills exactly the no-reference fields") {
    Rng rng(569);
    const auto fused = random_image(rng, 64, 64, 3);
    const auto ms_up = random_image(rng, 64, 64, 3);
    const auto ms = random_image(rng, 16, 16, 3);
    const auto pan = random_image(rng, 64, 64, 1);
    const auto pan_lr = random_image(rng, 16, 16, 1);
    const auto report = evaluate_full(fused, ms_up, ms, pan, pan_lr);
    CHECK(report.mode == MetricsReport::Mode::full);
    CHECK_FALSE(report.q2n_index.has_value());
    CHECK_FALSE(report.sam_degrees.has_value());
    REQUIRE(report.d_lambda_index.has_value());
    REQUIRE(report.d_s_index.has_value());
    REQUIRE(report.qnr_index.has_value());
    CHECK(*report.qnr_index ==
          doctest::Approx((1.0 - *report.d_lambda_index) * (1.0 - *report.d_s_index))
              .epsilon(1e-12));
    CHECK(*report.d_lambda_index == doctest::Approx(d_lambda(fused, ms_up)).epsilon(1e-12));
    CHECK(*report.d_s_index == doctest::Approx(d_s(fused, ms, pan, pan_lr)).epsilon(1e-12));
}

TEST_CASE("metrics report validation rejects mixed or out-of-range fields") {
    MetricsReport r;
    r.mode = MetricsReport::Mode::reduced;
    r.q2n_index = 0.9;
    r.d_s_index = 0.1;
    CHECK_THROWS_AS(r.validate(), Error);

    MetricsReport bad;
    bad.mode = MetricsReport::Mode::reduced;
    bad.sam_degrees = 181.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.sam_degrees = -0.1;
    CHECK_THROWS_AS(bad.validate(), Error);

    MetricsReport ok;
    ok.mode = MetricsReport::Mode::full;
    ok.d_lambda_index = 0.3;
    ok.d_s_index = 0.2;
    ok.qnr_index = qnr(0.3, 0.2);
    ok.validate();
}

TEST_CASE("aggregation takes fieldwise mean and population stddev") {
    MetricsReport a, b;
    a.mode = b.mode = MetricsReport::Mode::reduced;
    a.q2n_index = 0.2;
    b.q2n_index = 0.4;
    a.sam_degrees = 10.0;
    b.sam_degrees = 30.0;
    a.ergas_index = 1.0;
    b.ergas_index = 3.0;
    a.scc_index = 0.5;
    b.scc_index = 0.5;
    const auto agg = aggregate_reports({a, b});
    CHECK(agg.count == 2);
    CHECK(*agg.mean.q2n_index == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(*agg.stddev.q2n_index == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(*agg.mean.sam_degrees == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(*agg.stddev.sam_degrees == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(*agg.mean.ergas_index == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(*agg.stddev.scc_index == doctest::Approx(0.0).scale(1.0));
    CHECK_FALSE(agg.mean.d_lambda_index.has_value());

    MetricsReport c;
    c.mode = MetricsReport::Mode::reduced;
    c.q2n_index = 0.5;  // missing the other fields
    CHECK_THROWS_AS(aggregate_reports({a, c}), ConfigError);
    CHECK_THROWS_AS(aggregate_reports({}), ConfigError);
}

TEST_CASE("csv and json rows serialize present fields only") {
    CHECK(metrics_csv_header() == "id,mode,q2n,sam_degrees,ergas,scc,d_lambda,d_s,qnr");
    MetricsReport r;
    r.mode = MetricsReport::Mode::reduced;
    r.q2n_index = 0.5;
    r.sam_degrees = 12.25;
    r.ergas_index = 1.5;
    r.scc_index = 0.875;
    CHECK(to_csv_row("img1", r) == "img1,reduced,0.5,12.25,1.5,0.875,,,");
    CHECK(to_json_line("img1", r) ==
          "{\"id\":\"img1\",\"mode\":\"reduced\",\"q2n\":0.5,\"sam_degrees\":12.25,"
          "\"ergas\":1.5,\"scc\":0.875}");

    MetricsReport f;
    f.mode = MetricsReport::Mode::full;
    f.d_lambda_index = 0.125;
    f.d_s_index = 0.25;
    f.qnr_index = 0.65625;
    CHECK(to_csv_row("x", f) == "x,full,,,,,0.125,0.25,0.65625");
    CHECK(to_json_line("x", f) ==
          "{\"id\":\"x\",\"mode\":\"full\",\"d_lambda\":0.125,\"d_s\":0.25,\"qnr\":0.65625}");
}
