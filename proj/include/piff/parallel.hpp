#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace piff {

/// Runs fn(begin, end) over `workers` contiguous blocks of [0, n) and joins.
/// Blocks are disjoint, so callers that write only inside their block get
/// results independent of the worker count.
template <class Fn>
void parallel_blocks(std::size_t workers, std::size_t n, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = n * w / workers;
            const std::size_t e = n * (w + 1) / workers;
            pool.emplace_back([&, w, b, e] {
                try {
                    fn(b, e);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

} // namespace piff
