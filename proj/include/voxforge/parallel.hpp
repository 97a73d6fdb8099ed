// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace voxforge {

/// Number of worker threads used by parallel_for. Defaults to the value of
/// VOXFORGE_THREADS, or 1 when unset.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks; callers
/// must only write to index-private outputs so results never depend on the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Like parallel_for but hands out [begin, end) ranges of at most `grain`
/// indices. Chunk boundaries depend only on n and grain.
void parallel_chunks(std::size_t n, std::size_t grain,
                     const std::function<void(std::size_t chunk, std::size_t begin,
                                              std::size_t end)>& body);

}  // namespace voxforge
