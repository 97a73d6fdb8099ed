// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "voxforge/simd/kernels.hpp"

namespace voxforge::simd {

const KernelTable* avx2_table_if_built();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

std::atomic<bool>& scalar_forced() {
    static std::atomic<bool> forced{[] {
        const char* env = std::getenv("VOXFORGE_SIMD");
        return env != nullptr && std::strcmp(env, "scalar") == 0;
    }()};
    return forced;
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const KernelTable* table = cpu_has_avx2() ? avx2_table_if_built() : nullptr;
    return table;
}

const KernelTable& kernels() {
    if (!scalar_forced().load()) {
        if (const KernelTable* t = avx2_kernels()) return *t;
    }
    return scalar_kernels();
}

void force_scalar(bool on) { scalar_forced().store(on); }

}  // namespace voxforge::simd
