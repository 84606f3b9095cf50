#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pansharp/conv.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/parallel.hpp"
#include "pansharp/rng.hpp"
#include "pansharp/tensor.hpp"

using namespace pansharp;

// ---------------------------------------------------------------------------
// Independent oracles, written against the documented operator definitions
// (zero padding, top-left pad (s-1)/2, cross-correlation), not the library
// loops.
// ---------------------------------------------------------------------------

namespace {

template <typename T>
std::vector<double> oracle_conv(const std::vector<T>& in, int H, int W, int Cin,
                                const std::vector<T>& w, int s, int Cout) {
    const int plo = (s - 1) / 2;
    std::vector<double> out(std::size_t(H) * W * Cout, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int o = 0; o < Cout; ++o) {
                double acc = 0.0;
                for (int ci = 0; ci < Cin; ++ci)
                    for (int ky = 0; ky < s; ++ky)
                        for (int kx = 0; kx < s; ++kx) {
                            const int yy = y + ky - plo, xx = x + kx - plo;
                            if (yy < 0 || yy >= H || xx < 0 || xx >= W)
                                continue;
                            acc += double(w[std::size_t(((o * Cin + ci) * s + ky) * s + kx)]) *
                                   double(in[std::size_t((yy * W + xx) * Cin + ci)]);
                        }
                out[std::size_t((y * W + x) * Cout + o)] = acc;
            }
    return out;
}

// Adjoint realized as the scatter transpose of the oracle conv.
template <typename T>
std::vector<double> oracle_adjoint(const std::vector<T>& g, int H, int W, int Cout,
                                   const std::vector<T>& w, int s, int Cin) {
    const int plo = (s - 1) / 2;
    std::vector<double> out(std::size_t(H) * W * Cin, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int o = 0; o < Cout; ++o) {
                const double gv = double(g[std::size_t((y * W + x) * Cout + o)]);
                for (int ci = 0; ci < Cin; ++ci)
                    for (int ky = 0; ky < s; ++ky)
                        for (int kx = 0; kx < s; ++kx) {
                            const int yy = y + ky - plo, xx = x + kx - plo;
                            if (yy < 0 || yy >= H || xx < 0 || xx >= W)
                                continue;
                            out[std::size_t((yy * W + xx) * Cin + ci)] +=
                                double(w[std::size_t(((o * Cin + ci) * s + ky) * s + kx)]) * gv;
                        }
            }
    return out;
}

// dL/dw[o,ci,ky,kx] = sum_pixels a[(y,x),o] * b[(y+ky-plo, x+kx-plo),ci]
template <typename T>
std::vector<double> oracle_weight_grad(const std::vector<T>& a, int Co, const std::vector<T>& b,
                                       int Ci, int H, int W, int s) {
    const int plo = (s - 1) / 2;
    std::vector<double> dw(std::size_t(s) * s * Ci * Co, 0.0);
    for (int o = 0; o < Co; ++o)
        for (int ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < s; ++ky)
                for (int kx = 0; kx < s; ++kx) {
                    double acc = 0.0;
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x) {
                            const int yy = y + ky - plo, xx = x + kx - plo;
                            if (yy < 0 || yy >= H || xx < 0 || xx >= W)
                                continue;
                            acc += double(a[std::size_t((y * W + x) * Co + o)]) *
                                   double(b[std::size_t((yy * W + xx) * Ci + ci)]);
                        }
                    dw[std::size_t(((o * Ci + ci) * s + ky) * s + kx)] = acc;
                }
    return dw;
}

template <typename T>
FeatureStack<T> random_stack(Rng& rng, int h, int w, int k) {
    FeatureStack<T> f(h, w, k);
    for (T& v : f.maps)
        v = T(rng.normal());
    return f;
}

template <typename T>
MultibandImage<T> random_image(Rng& rng, int h, int w, int b) {
    MultibandImage<T> img(h, w, b);
    for (T& v : img.samples)
        v = T(rng.normal());
    return img;
}

template <typename T>
FilterBank<T> random_bank(Rng& rng, int s, int in, int out) {
    FilterBank<T> bank(s, in, out);
    for (T& v : bank.weights)
        v = T(rng.normal());
    return bank;
}

} // namespace

TEST_CASE("containers validate their dimensions") {
    CHECK_THROWS_AS(MultibandImage<float>(0, 3, 1), ShapeError);
    CHECK_THROWS_AS(FeatureStack<float>(3, 0, 1), ShapeError);
    CHECK_THROWS_AS(FilterBank<float>(0, 1, 1), ShapeError);
    MultibandImage<float> img(2, 3, 4);
    CHECK(img.samples.size() == 24);
    img.at(1, 2, 3) = 7.0f;
    CHECK(img.samples[(1 * 3 + 2) * 4 + 3] == 7.0f);
    FilterBank<float> bank(3, 2, 5);
    CHECK(bank.weights.size() == std::size_t(3 * 3 * 2 * 5));
    CHECK(bank.count() == 2);
    bank.at(4, 1, 2, 0) = 1.5f;
    CHECK(bank.weights[std::size_t(((4 * 2 + 1) * 3 + 2) * 3 + 0)] == 1.5f);
}

TEST_CASE("inner_product basics and oracle") {
    MultibandImage<double> a(1, 2, 1), b(1, 2, 1);
    a.samples = {1.0, 2.0};
    b.samples = {3.0, 4.0};
    CHECK(inner_product(a, b) == doctest::Approx(11.0));
    MultibandImage<double> z(1, 2, 1);
    CHECK(inner_product(a, z) == 0.0);

    Rng rng(7);
    auto x = random_image<double>(rng, 8, 8, 1);
    auto y = random_image<double>(rng, 8, 8, 1);
    double direct = 0.0;
    for (std::size_t i = 0; i < x.samples.size(); ++i)
        direct += x.samples[i] * y.samples[i];
    CHECK(inner_product(x, y) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("conv2d_same: 1x1 scalar case and delta identity") {
    MultibandImage<float> img(1, 1, 1);
    img.samples = {2.0f};
    FilterBank<float> k(1, 1, 1);
    k.weights = {3.0f};
    CHECK(conv2d_same(img, k).samples[0] == doctest::Approx(6.0f));

    Rng rng(3);
    auto x = random_image<float>(rng, 6, 5, 1);
    FilterBank<float> delta(3, 1, 1);
    delta.at(0, 0, 1, 1) = 1.0f;
    const auto y = conv2d_same(x, delta);
    for (std::size_t i = 0; i < x.samples.size(); ++i)
        CHECK(y.samples[i] == x.samples[i]);

    FilterBank<float> zero(3, 1, 1);
    const auto z = conv2d_same(x, zero);
    for (float v : z.samples)
        CHECK(v == 0.0f);
}

TEST_CASE("conv2d_same matches the naive quadruple-loop oracle") {
    Rng rng(11);
    for (auto [h, w, cin, s, cout] : {std::array<int, 5>{4, 4, 1, 3, 1},
                                      std::array<int, 5>{7, 5, 3, 3, 2},
                                      std::array<int, 5>{6, 6, 2, 8, 3},
                                      std::array<int, 5>{9, 4, 4, 5, 4},
                                      std::array<int, 5>{5, 9, 3, 1, 2}}) {
        auto x = random_image<double>(rng, h, w, cin);
        auto bank = random_bank<double>(rng, s, cin, cout);
        const auto got = conv2d_same(x, bank);
        const auto want = oracle_conv(x.samples, h, w, cin, bank.weights, s, cout);
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(got.samples[i] == doctest::Approx(want[i]).epsilon(1e-9));
    }
}

TEST_CASE("conv2d_same accepts feature stacks") {
    Rng rng(12);
    auto f = random_stack<double>(rng, 5, 6, 3);
    auto bank = random_bank<double>(rng, 3, 3, 2);
    const auto got = conv2d_same(f, bank);
    const auto want = oracle_conv(f.maps, 5, 6, 3, bank.weights, 3, 2);
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(got.samples[i] == doctest::Approx(want[i]).epsilon(1e-9));
}

TEST_CASE("conv2d_adjoint: scalar case, delta identity, oracle match") {
    MultibandImage<float> g(1, 1, 1);
    g.samples = {6.0f};
    FilterBank<float> k(1, 1, 1);
    k.weights = {3.0f};
    CHECK(conv2d_adjoint(g, k).maps[0] == doctest::Approx(18.0f));

    Rng rng(13);
    auto y = random_image<double>(rng, 6, 7, 1);
    FilterBank<double> delta(3, 1, 1);
    delta.at(0, 0, 1, 1) = 1.0;
    const auto idp = conv2d_adjoint(y, delta);
    for (std::size_t i = 0; i < y.samples.size(); ++i)
        CHECK(idp.maps[i] == y.samples[i]);

    auto g2 = random_image<double>(rng, 6, 6, 3);
    auto bank = random_bank<double>(rng, 8, 2, 3);
    const auto got = conv2d_adjoint(g2, bank);
    const auto want = oracle_adjoint(g2.samples, 6, 6, 3, bank.weights, 8, 2);
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(got.maps[i] == doctest::Approx(want[i]).epsilon(1e-9));
}

TEST_CASE("linearity of conv2d_same") {
    Rng rng(17);
    auto x = random_image<double>(rng, 6, 6, 2);
    auto y = random_image<double>(rng, 6, 6, 2);
    auto bank = random_bank<double>(rng, 3, 2, 3);
    const double alpha = 1.7, beta = -0.4;
    MultibandImage<double> mix(6, 6, 2);
    for (std::size_t i = 0; i < mix.samples.size(); ++i)
        mix.samples[i] = alpha * x.samples[i] + beta * y.samples[i];
    const auto lhs = conv2d_same(mix, bank);
    const auto cx = conv2d_same(x, bank);
    const auto cy = conv2d_same(y, bank);
    for (std::size_t i = 0; i < lhs.samples.size(); ++i)
        CHECK(lhs.samples[i] ==
              doctest::Approx(alpha * cx.samples[i] + beta * cy.samples[i]).epsilon(1e-9));
}

template <typename T>
static void adjoint_trials(int h, int w, int cin, int s, double tol) {
    Rng rng(0xadu + std::uint64_t(h * 131 + s));
    const int outs[3] = {1, 2, 4};
    for (int trial = 0; trial < 100; ++trial) {
        const int cout = outs[trial % 3];
        auto x = random_stack<T>(rng, h, w, cin);
        auto bank = random_bank<T>(rng, s, cin, cout);
        auto y = random_image<T>(rng, h, w, cout);
        const auto ax = conv2d_same(x, bank);
        const auto aty = conv2d_adjoint(y, bank);
        const double lhs = inner_product(ax, y);
        double rhs = 0.0;
        for (std::size_t i = 0; i < x.maps.size(); ++i)
            rhs += double(x.maps[i]) * double(aty.maps[i]);
        // Normalize by the scale of the bilinear form, not by the (possibly
        // cancelling) inner product value itself.
        double ax_norm2 = 0.0, y_norm2 = 0.0;
        for (T v : ax.samples)
            ax_norm2 += double(v) * double(v);
        for (T v : y.samples)
            y_norm2 += double(v) * double(v);
        const double scale = std::sqrt(ax_norm2) * std::sqrt(y_norm2);
        const double rel = std::abs(lhs - rhs) / (scale + 1e-30);
        CHECK(rel <= tol);
    }
}

TEST_CASE("adjoint identity <Ax,y> = <x,A'y> across shape classes") {
    adjoint_trials<float>(5, 5, 1, 3, 1e-5);
    adjoint_trials<float>(8, 8, 4, 3, 1e-5);
    adjoint_trials<float>(16, 16, 8, 8, 1e-5);
    adjoint_trials<double>(5, 5, 1, 3, 1e-10);
    adjoint_trials<double>(8, 8, 4, 3, 1e-10);
    adjoint_trials<double>(16, 16, 8, 8, 1e-10);
}

TEST_CASE("conv_weight_grad_raw matches the direct correlation oracle") {
    Rng rng(23);
    for (auto [h, w, ci, co, s] : {std::array<int, 5>{5, 6, 2, 3, 3},
                                   std::array<int, 5>{6, 6, 1, 1, 8},
                                   std::array<int, 5>{4, 7, 3, 2, 5}}) {
        auto a = random_image<double>(rng, h, w, co);
        auto b = random_image<double>(rng, h, w, ci);
        const auto got = conv_weight_grad_raw(a.samples.data(), co, b.samples.data(), ci, h, w, s);
        const auto want = oracle_weight_grad(a.samples, co, b.samples, ci, h, w, s);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-9));
    }
}

TEST_CASE("shape mismatches are rejected with ShapeError") {
    MultibandImage<float> img(4, 4, 2);
    FilterBank<float> bank(3, 3, 2);
    CHECK_THROWS_AS(conv2d_same(img, bank), ShapeError);
    MultibandImage<float> g(4, 4, 3);
    CHECK_THROWS_AS(conv2d_adjoint(g, bank), ShapeError);
    MultibandImage<float> a(2, 2, 1), b(2, 3, 1);
    CHECK_THROWS_AS(inner_product(a, b), ShapeError);
}

TEST_CASE("multithreaded conv is bitwise identical to single-threaded") {
    Rng rng(29);
    auto x = random_image<float>(rng, 33, 17, 3);
    auto bank = random_bank<float>(rng, 5, 3, 4);
    set_thread_count(1);
    const auto ref = conv2d_same(x, bank);
    const auto ref_adj = conv2d_adjoint(ref, bank);
    set_thread_count(4);
    const auto par = conv2d_same(x, bank);
    const auto par_adj = conv2d_adjoint(ref, bank);
    set_thread_count(1);
    CHECK(ref.samples == par.samples);
    CHECK(ref_adj.maps == par_adj.maps);
}
