#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstddef>
#include <cstdlib>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace faf {

// Numerical failure distinct from bad input; the CLI maps these to exit codes.
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct empty_result : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

// SplitMix64; used to derive independent child seeds from (master, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(0x517cc1b727220a95ULL + index));
}

inline int default_threads() {
    if (const char* env = std::getenv("FAF_THREADS")) {
        int t = std::atoi(env);
        if (t >= 1) return t;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Chunked parallel loop. Work is split into fixed-size chunks that are
// processed by a pool of threads; chunk boundaries do not depend on the
// thread count, so any per-chunk accumulation combined in chunk order is
// bit-identical for every thread count.
inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t chunk = 0) {
    if (count == 0) return;
    if (chunk == 0) chunk = (count + 255) / 256 < 64 ? 64 : (count + 255) / 256;
    std::size_t nchunks = (count + chunk - 1) / chunk;
    if (threads <= 1 || nchunks == 1) {
        for (std::size_t c = 0; c < nchunks; ++c)
            body(c * chunk, std::min(count, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            body(c * chunk, std::min(count, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    int nt = std::min<std::size_t>(threads, nchunks);
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

inline double sqr(double x) { return x * x; }

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }
inline double negative_part(double x) { return x < 0.0 ? -x : 0.0; }

}  // namespace faf
