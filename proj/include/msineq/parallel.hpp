#ifndef MSINEQ_PARALLEL_HPP
#define MSINEQ_PARALLEL_HPP

#include <algorithm>
#include <thread>
#include <vector>

namespace msineq {

/// Default worker count: hardware concurrency, at least one.
inline int default_workers() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

/// Calls fn(begin, end) on contiguous chunks of [0, count). Chunk boundaries
/// depend only on count and workers, so callers that write results by index
/// stay deterministic.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn)
{
    workers = std::clamp(workers, 1, std::max(1, count));
    if (workers == 1) {
        fn(0, count);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int begin = static_cast<int>(static_cast<long long>(count) * w / workers);
        const int end = static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
}

}  // namespace msineq

#endif  // MSINEQ_PARALLEL_HPP
