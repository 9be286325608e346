#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace dcs {

/// Default worker count: DCS_JOBS if set, otherwise the logical core count.
inline unsigned default_jobs() {
    if (const char* env = std::getenv("DCS_JOBS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs f(i) for i in [begin, end) on a static block partition. Each index is
/// processed exactly once; output written per-index stays deterministic
/// regardless of the worker count.
template <typename F>
void parallel_for(int begin, int end, F&& f, unsigned jobs = 0) {
    if (end <= begin) return;
    if (jobs == 0) jobs = default_jobs();
    const int n = end - begin;
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(n));
    if (jobs <= 1) {
        for (int i = begin; i < end; ++i) f(i);
        return;
    }
    const int chunk = (n + static_cast<int>(jobs) - 1) / static_cast<int>(jobs);
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) {
        const int lo = begin + static_cast<int>(t) * chunk;
        const int hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([lo, hi, &f] {
            for (int i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace dcs
