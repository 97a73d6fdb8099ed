// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "voxforge/simd/kernels.hpp"
#include "test_util.hpp"

using namespace voxforge;
using vf_test::uniform;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(rng, lo, hi);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Sizes straddling the 4-wide vector width and its tail handling.
const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 9, 31, 49, 64, 1001};

}  // namespace

TEST_CASE("simd: scalar table is always present") {
    CHECK(std::string(simd::scalar_kernels().name) == "scalar");
    simd::force_scalar(true);
    CHECK(&simd::kernels() == &simd::scalar_kernels());
    simd::force_scalar(false);
}

TEST_CASE("simd: scalar zncc matches a textbook oracle") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 49;
        auto a = random_values(rng, n, 0, 1), b = random_values(rng, n, 0, 1);
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < n; ++i) ma += a[i], mb += b[i];
        ma /= n;
        mb /= n;
        double sab = 0, saa = 0, sbb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sab += (a[i] - ma) * (b[i] - mb);
            saa += (a[i] - ma) * (a[i] - ma);
            sbb += (b[i] - mb) * (b[i] - mb);
        }
        CHECK(simd::scalar_kernels().zncc(a.data(), b.data(), n, 1e-8) ==
              doctest::Approx(sab / std::sqrt(saa * sbb)).epsilon(1e-12));
    }
    std::vector<double> flat(9, 0.3), x{0, 1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(std::isnan(simd::scalar_kernels().zncc(flat.data(), x.data(), 9, 1e-8)));
}

TEST_CASE("simd: avx2 kernels agree with the scalar reference") {
    const simd::KernelTable* avx = simd::avx2_kernels();
    if (!avx) {
        MESSAGE("AVX2 unavailable; equivalence not exercised");
        return;
    }
    const simd::KernelTable& sc = simd::scalar_kernels();
    std::mt19937_64 rng(11);

    SUBCASE("adam_update is bit-identical") {
        for (std::size_t n : kSizes) {
            auto p = random_values(rng, n, -3, 3), g = random_values(rng, n, -1, 1);
            auto m = random_values(rng, n, -0.1, 0.1), v = random_values(rng, n, 0, 0.01);
            auto p2 = p, m2 = m, v2 = v;
            const simd::AdamCoeffs c{0.05, 0.9, 0.999, 1e-8, 1 - std::pow(0.9, 7), 1 - std::pow(0.999, 7)};
            sc.adam_update(p.data(), g.data(), m.data(), v.data(), n, c);
            avx->adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, c);
            CHECK(bitwise_equal(p, p2));
            CHECK(bitwise_equal(m, m2));
            CHECK(bitwise_equal(v, v2));
        }
    }
    SUBCASE("weighted_accumulate is bit-identical") {
        for (std::size_t n : kSizes) {
            auto f = random_values(rng, n, -1, 1), w = random_values(rng, n, 0, 2);
            auto swf = random_values(rng, n, -5, 5), sw = random_values(rng, n, 0, 5);
            auto swf2 = swf, sw2 = sw;
            sc.weighted_accumulate(swf.data(), sw.data(), f.data(), w.data(), n);
            avx->weighted_accumulate(swf2.data(), sw2.data(), f.data(), w.data(), n);
            CHECK(bitwise_equal(swf, swf2));
            CHECK(bitwise_equal(sw, sw2));
        }
    }
    SUBCASE("trilinear is bit-identical") {
        const auto corners = random_values(rng, 8, -2, 5);
        for (std::size_t n : kSizes) {
            auto ux = random_values(rng, n, 0, 1), uy = random_values(rng, n, 0, 1), uz = random_values(rng, n, 0, 1);
            std::vector<double> o1(n), o2(n);
            sc.trilinear(corners.data(), ux.data(), uy.data(), uz.data(), o1.data(), n);
            avx->trilinear(corners.data(), ux.data(), uy.data(), uz.data(), o2.data(), n);
            CHECK(bitwise_equal(o1, o2));
        }
    }
    SUBCASE("reductions agree to rounding") {
        for (std::size_t n : kSizes) {
            auto a = random_values(rng, n, 0, 1), b = random_values(rng, n, 0, 1);
            std::vector<std::uint8_t> mask(n);
            for (auto& m : mask) m = uniform(rng, 0, 1) < 0.7;
            const std::uint8_t* masks[] = {nullptr, mask.data()};
            for (const std::uint8_t* mp : masks) {
                const auto r1 = sc.masked_abs_diff(a.data(), b.data(), mp, n);
                const auto r2 = avx->masked_abs_diff(a.data(), b.data(), mp, n);
                CHECK(r1.count == r2.count);
                CHECK(r2.sum == doctest::Approx(r1.sum).epsilon(1e-12));
            }
            if (n < 2) continue;
            const double z1 = sc.zncc(a.data(), b.data(), n, 1e-8);
            const double z2 = avx->zncc(a.data(), b.data(), n, 1e-8);
            CHECK(std::abs(z1 - z2) <= 1e-12);
        }
    }
    SUBCASE("zncc rejects flat patches in both variants") {
        std::vector<double> flat(49, 0.25), x = random_values(rng, 49, 0, 1);
        CHECK(std::isnan(sc.zncc(flat.data(), x.data(), 49, 1e-8)));
        CHECK(std::isnan(avx->zncc(flat.data(), x.data(), 49, 1e-8)));
    }
}
