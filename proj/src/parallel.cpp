// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace voxforge {
namespace {

std::size_t initial_threads() {
    if (const char* env = std::getenv("VOXFORGE_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return 1;
}

std::atomic<std::size_t>& threads_slot() {
    static std::atomic<std::size_t> n{initial_threads()};
    return n;
}

}  // namespace

std::size_t thread_count() { return threads_slot().load(); }

void set_thread_count(std::size_t n) { threads_slot().store(std::max<std::size_t>(1, n)); }

void parallel_chunks(std::size_t n, std::size_t grain,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    grain = std::max<std::size_t>(1, grain);
    const std::size_t chunks = (n + grain - 1) / grain;
    const std::size_t workers = std::min(thread_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c)
            body(c, c * grain, std::min(n, (c + 1) * grain));
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                body(c, c * grain, std::min(n, (c + 1) * grain));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t grain = std::max<std::size_t>(1, n / (8 * thread_count()) + 1);
    parallel_chunks(n, grain, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) body(i);
    });
}

}  // namespace voxforge
