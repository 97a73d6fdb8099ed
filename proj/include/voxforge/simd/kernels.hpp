// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// on x86-64, an AVX2 version picked at runtime. Elementwise kernels are
// bit-identical across variants; reductions agree to rounding.
namespace voxforge::simd {

struct AdamCoeffs {
    double lr;
    double beta1;
    double beta2;
    double eps;
    double bias1;  // 1 - beta1^t
    double bias2;  // 1 - beta2^t
};

struct SumCount {
    double sum = 0.0;
    std::size_t count = 0;
};

struct KernelTable {
    const char* name;

    // m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g^2 ;
    // p <- p - lr (m/bias1) / (sqrt(v/bias2) + eps)
    void (*adam_update)(double* param, const double* grad, double* m, double* v,
                        std::size_t n, const AdamCoeffs& c);

    // sum_wf[i] += w[i] f[i] ; sum_w[i] += w[i]
    void (*weighted_accumulate)(double* sum_wf, double* sum_w, const double* f,
                                const double* w, std::size_t n);

    // Sum of |a-b| over entries with mask != 0 (mask may be null).
    SumCount (*masked_abs_diff)(const double* a, const double* b, const std::uint8_t* mask,
                                std::size_t n);

    // Zero-mean normalised cross-correlation. NaN when either input's
    // variance (sum of squared deviations / n) is below min_var.
    double (*zncc)(const double* a, const double* b, std::size_t n, double min_var);

    // out[i] = trilinear blend of the 8 corner values at (ux,uy,uz)[i].
    // Corner m holds offset (m>>2 & 1, m>>1 & 1, m & 1).
    void (*trilinear)(const double* corners, const double* ux, const double* uy,
                      const double* uz, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();

/// Null when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_kernels();

/// The table in use: AVX2 when available unless VOXFORGE_SIMD=scalar, or
/// force_scalar(true) was called.
const KernelTable& kernels();
void force_scalar(bool on);

}  // namespace voxforge::simd
