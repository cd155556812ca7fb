#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sr2cnn {

/// Worker cap: min(hardware_concurrency, SIGZSL_THREADS if set).
inline unsigned worker_count() {
    static unsigned cached = [] {
        unsigned n = std::thread::hardware_concurrency();
        if (n == 0) n = 1;
        if (const char* env = std::getenv("SIGZSL_THREADS")) {
            long cap = std::strtol(env, nullptr, 10);
            if (cap >= 1 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
        }
        return n;
    }();
    return cached;
}

/// Runs fn(chunk) for chunk in [0, n_chunks). Work is split into a fixed
/// number of chunks so that any reduction done per chunk can be combined in
/// chunk order, keeping results independent of the number of worker threads.
inline void parallel_chunks(std::size_t n_chunks, const std::function<void(std::size_t)>& fn) {
    unsigned workers = worker_count();
    if (workers <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        try {
            for (;;) {
                std::size_t c = next.fetch_add(1);
                if (c >= n_chunks) break;
                fn(c);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    unsigned spawn = static_cast<unsigned>(std::min<std::size_t>(workers, n_chunks)) - 1;
    pool.reserve(spawn);
    for (unsigned i = 0; i < spawn; ++i) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

/// Chunked index-range helper: [begin, end) of chunk c when n items are
/// split into n_chunks nearly equal contiguous pieces.
inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, std::size_t n_chunks,
                                                       std::size_t c) {
    std::size_t base = n / n_chunks, rem = n % n_chunks;
    std::size_t begin = c * base + std::min(c, rem);
    std::size_t len = base + (c < rem ? 1 : 0);
    return {begin, begin + len};
}

}  // namespace sr2cnn
