#pragma once

// Deterministic chunked parallelism for seeded Monte Carlo: chunk i always
// draws from stream_seed(master, i), results are merged in chunk order, so
// outputs do not depend on the number of workers.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gpmin {

inline constexpr std::size_t kChunkSize = 8192;

/// Number of workers: explicit request, else GM_THREADS, else hardware concurrency.
inline int worker_count(int requested = 0) {
    if (requested > 0) { return requested; }
    if (const char *env = std::getenv("GM_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) { return n; }
        } catch (const std::exception &) {
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
    return mix64(mix64(master) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

inline std::vector<std::size_t> chunk_sizes(std::size_t total, std::size_t chunk = kChunkSize) {
    std::vector<std::size_t> out;
    for (std::size_t done = 0; done < total; done += chunk) { out.push_back(std::min(chunk, total - done)); }
    return out;
}

/// Run fn(chunk_index) for every chunk on up to `threads` workers; results are indexed by chunk.
template <class Result, class Fn>
std::vector<Result> run_chunks(std::size_t chunks, int threads, Fn &&fn) {
    std::vector<Result> results(chunks);
    const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(chunks))));
    if (workers <= 1) {
        for (std::size_t i = 0; i < chunks; ++i) { results[i] = fn(i); }
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < chunks; i = next.fetch_add(1)) {
                try {
                    results[i] = fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) { failure = std::current_exception(); }
                }
            }
        });
    }
    for (auto &t : pool) { t.join(); }
    if (failure) { std::rethrow_exception(failure); }
    return results;
}

}  // namespace gpmin
