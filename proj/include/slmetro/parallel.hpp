#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace slmetro {

// Chunked parallel loop over [0, n). fn(i) must be independent per index;
// results must not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn &&fn, unsigned workers = 0) {
    if (workers == 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers)
                fn(i);
        });
    }
    for (auto &t : pool)
        t.join();
}

} // namespace slmetro
