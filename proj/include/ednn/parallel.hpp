#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace ednn {

/// Process-wide worker count. 1 by default; reductions stay deterministic
/// for a fixed setting because work is split into fixed contiguous chunks
/// combined in chunk order.
inline std::atomic<int>& thread_count() {
    static std::atomic<int> n{1};
    return n;
}

inline void set_threads(int n) { thread_count().store(n < 1 ? 1 : n); }
inline int get_threads() { return thread_count().load(); }

/// Runs f(chunk_index, begin, end) over a fixed partition of [0, n) into
/// min(threads, n) contiguous chunks.
template <typename F>
void parallel_chunks(std::size_t n, F&& f) {
    int threads = get_threads();
    if (n == 0) return;
    std::size_t chunks = static_cast<std::size_t>(threads) < n ? threads : n;
    if (chunks <= 1) {
        f(std::size_t(0), std::size_t(0), n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(chunks - 1);
    std::size_t base = n / chunks, rem = n % chunks, begin = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        std::size_t len = base + (c < rem ? 1 : 0);
        std::size_t end = begin + len;
        if (c + 1 == chunks)
            f(c, begin, end);
        else
            pool.emplace_back([&f, c, begin, end] { f(c, begin, end); });
        begin = end;
    }
    for (auto& t : pool) t.join();
}

inline std::size_t num_chunks(std::size_t n) {
    std::size_t t = static_cast<std::size_t>(get_threads());
    return n == 0 ? 0 : (t < n ? t : n);
}

}  // namespace ednn
