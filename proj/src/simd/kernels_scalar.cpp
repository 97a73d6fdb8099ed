// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "voxforge/simd/kernels.hpp"

namespace voxforge::simd {
namespace {

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 const AdamCoeffs& c) {
    const double om1 = 1.0 - c.beta1, om2 = 1.0 - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = c.beta1 * m[i] + om1 * g[i];
        v[i] = c.beta2 * v[i] + om2 * (g[i] * g[i]);
        const double mhat = m[i] / c.bias1;
        const double vhat = v[i] / c.bias2;
        p[i] = p[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

void weighted_accumulate(double* swf, double* sw, const double* f, const double* w,
                         std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        swf[i] = swf[i] + w[i] * f[i];
        sw[i] = sw[i] + w[i];
    }
}

SumCount masked_abs_diff(const double* a, const double* b, const std::uint8_t* mask,
                         std::size_t n) {
    SumCount r;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask && !mask[i]) continue;
        r.sum += std::fabs(a[i] - b[i]);
        ++r.count;
    }
    return r;
}

double zncc(const double* a, const double* b, std::size_t n, double min_var) {
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sa += a[i];
        sb += b[i];
    }
    const double ma = sa / double(n), mb = sb / double(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
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
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = ux[i], y1 = uy[i], z1 = uz[i];
        const double x0 = 1.0 - x1, y0 = 1.0 - y1, z0 = 1.0 - z1;
        double s = (x0 * y0) * z0 * c[0];
        s = s + (x0 * y0) * z1 * c[1];
        s = s + (x0 * y1) * z0 * c[2];
        s = s + (x0 * y1) * z1 * c[3];
        s = s + (x1 * y0) * z0 * c[4];
        s = s + (x1 * y0) * z1 * c[5];
        s = s + (x1 * y1) * z0 * c[6];
        s = s + (x1 * y1) * z1 * c[7];
        out[i] = s;
    }
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{"scalar", adam_update, weighted_accumulate, masked_abs_diff,
                                   zncc, trilinear};
    return table;
}

}  // namespace voxforge::simd
