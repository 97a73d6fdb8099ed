// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

// Built with -mavx2 (no FMA) so products round exactly as in the scalar
// reference; only entered after a runtime CPU check.

#include "voxforge/simd/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__)

#include <immintrin.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace voxforge::simd {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 const AdamCoeffs& c) {
    const __m256d b1 = _mm256_set1_pd(c.beta1), b2 = _mm256_set1_pd(c.beta2);
    const __m256d om1 = _mm256_set1_pd(1.0 - c.beta1), om2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d bc1 = _mm256_set1_pd(c.bias1), bc2 = _mm256_set1_pd(c.bias2);
    const __m256d lr = _mm256_set1_pd(c.lr), eps = _mm256_set1_pd(c.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gi = _mm256_loadu_pd(g + i);
        __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(om1, gi));
        __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                   _mm256_mul_pd(om2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        __m256d mhat = _mm256_div_pd(mi, bc1);
        __m256d vhat = _mm256_div_pd(vi, bc2);
        __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    if (i < n) scalar_kernels().adam_update(p + i, g + i, m + i, v + i, n - i, c);
}

void weighted_accumulate(double* swf, double* sw, const double* f, const double* w,
                         std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d wi = _mm256_loadu_pd(w + i);
        _mm256_storeu_pd(swf + i, _mm256_add_pd(_mm256_loadu_pd(swf + i),
                                                _mm256_mul_pd(wi, _mm256_loadu_pd(f + i))));
        _mm256_storeu_pd(sw + i, _mm256_add_pd(_mm256_loadu_pd(sw + i), wi));
    }
    if (i < n) scalar_kernels().weighted_accumulate(swf + i, sw + i, f + i, w + i, n - i);
}

SumCount masked_abs_diff(const double* a, const double* b, const std::uint8_t* mask,
                         std::size_t n) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_andnot_pd(sign, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        if (mask) {
            std::int32_t bytes;
            std::memcpy(&bytes, mask + i, 4);
            __m256i m64 = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(bytes));
            __m256i zero = _mm256_cmpeq_epi64(m64, _mm256_setzero_si256());
            __m256d keep = _mm256_castsi256_pd(_mm256_xor_si256(zero, _mm256_set1_epi64x(-1)));
            d = _mm256_and_pd(d, keep);
            count += std::popcount(static_cast<unsigned>(_mm256_movemask_pd(keep)));
        } else {
            count += 4;
        }
        acc = _mm256_add_pd(acc, d);
    }
    SumCount r{hsum(acc), count};
    if (i < n) {
        SumCount tail = scalar_kernels().masked_abs_diff(a + i, b + i, mask ? mask + i : nullptr, n - i);
        r.sum += tail.sum;
        r.count += tail.count;
    }
    return r;
}

double zncc(const double* a, const double* b, std::size_t n, double min_var) {
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    __m256d va = _mm256_setzero_pd(), vb = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        va = _mm256_add_pd(va, _mm256_loadu_pd(a + i));
        vb = _mm256_add_pd(vb, _mm256_loadu_pd(b + i));
    }
    double sa = hsum(va), sb = hsum(vb);
    for (std::size_t j = i; j < n; ++j) {
        sa += a[j];
        sb += b[j];
    }
    const double ma = sa / double(n), mb = sb / double(n);
    const __m256d vma = _mm256_set1_pd(ma), vmb = _mm256_set1_pd(mb);
    __m256d aa = _mm256_setzero_pd(), bb = _mm256_setzero_pd(), ab = _mm256_setzero_pd();
    for (i = 0; i + 4 <= n; i += 4) {
        __m256d da = _mm256_sub_pd(_mm256_loadu_pd(a + i), vma);
        __m256d db = _mm256_sub_pd(_mm256_loadu_pd(b + i), vmb);
        aa = _mm256_add_pd(aa, _mm256_mul_pd(da, da));
        bb = _mm256_add_pd(bb, _mm256_mul_pd(db, db));
        ab = _mm256_add_pd(ab, _mm256_mul_pd(da, db));
    }
    double saa = hsum(aa), sbb = hsum(bb), sab = hsum(ab);
    for (std::size_t j = i; j < n; ++j) {
        const double da = a[j] - ma, db = b[j] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa / double(n) < min_var || sbb / double(n) < min_var)
        return std::numeric_limits<double>::quiet_NaN();
    const double r = sab / std::sqrt(saa * sbb);
    return r > 1.0 ? 1.0 : (r < -1.0 ? -1.0 : r);
}

void trilinear(const double* c, const double* ux, const double* uy, const double* uz,
               double* out, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    __m256d cm[8];
    for (int m = 0; m < 8; ++m) cm[m] = _mm256_set1_pd(c[m]);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x1 = _mm256_loadu_pd(ux + i), y1 = _mm256_loadu_pd(uy + i),
                      z1 = _mm256_loadu_pd(uz + i);
        const __m256d x0 = _mm256_sub_pd(one, x1), y0 = _mm256_sub_pd(one, y1),
                      z0 = _mm256_sub_pd(one, z1);
        const __m256d xy00 = _mm256_mul_pd(x0, y0), xy01 = _mm256_mul_pd(x0, y1),
                      xy10 = _mm256_mul_pd(x1, y0), xy11 = _mm256_mul_pd(x1, y1);
        __m256d s = _mm256_mul_pd(_mm256_mul_pd(xy00, z0), cm[0]);
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_mul_pd(xy00, z1), cm[1]));
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_mul_pd(xy01, z0), cm[2]));
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_mul_pd(xy01, z1), cm[3]));
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_mul_pd(xy10, z0), cm[4]));
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_mul_pd(xy10, z1), cm[5]));
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_mul_pd(xy11, z0), cm[6]));
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_mul_pd(xy11, z1), cm[7]));
        _mm256_storeu_pd(out + i, s);
    }
    if (i < n) scalar_kernels().trilinear(c, ux + i, uy + i, uz + i, out + i, n - i);
}

}  // namespace

const KernelTable* avx2_table_if_built() {
    static const KernelTable table{"avx2", adam_update, weighted_accumulate, masked_abs_diff,
                                   zncc, trilinear};
    return &table;
}

}  // namespace voxforge::simd

#else

namespace voxforge::simd {
const KernelTable* avx2_table_if_built() { return nullptr; }
}  // namespace voxforge::simd

#endif
