#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

// Deterministic block-parallel reduction over path indices.
//
// Paths are split into fixed-size blocks (independent of worker count), each
// block is reduced serially in index order, and the per-block results are
// merged in block order afterwards. Estimates are therefore bit-identical
// for any number of workers.

namespace hpath::parallel {

inline constexpr std::uint64_t kBlockSize = 1024;

// Acc must be default-constructible and provide merge(const Acc&).
// make_ctx() builds one scratch context per worker thread;
// body(path_index, acc, ctx) accumulates one path into the block accumulator.
template <typename Acc, typename MakeCtx, typename Body>
Acc run_with_ctx(std::uint64_t n_paths, int n_workers, MakeCtx&& make_ctx, Body&& body) {
    const std::uint64_t n_blocks = n_paths == 0 ? 0 : (n_paths - 1) / kBlockSize + 1;
    std::vector<Acc> block_accs(n_blocks);

    auto do_block = [&](std::uint64_t b, auto& ctx) {
        const std::uint64_t lo = b * kBlockSize;
        const std::uint64_t hi = std::min(n_paths, lo + kBlockSize);
        Acc acc;
        for (std::uint64_t i = lo; i < hi; ++i) body(i, acc, ctx);
        block_accs[b] = std::move(acc);
    };

    if (n_workers <= 1 || n_blocks <= 1) {
        auto ctx = make_ctx();
        for (std::uint64_t b = 0; b < n_blocks; ++b) do_block(b, ctx);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        const int workers = static_cast<int>(
            std::min<std::uint64_t>(static_cast<std::uint64_t>(n_workers), n_blocks));
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                auto ctx = make_ctx();
                for (;;) {
                    const std::uint64_t b = next.fetch_add(1);
                    if (b >= n_blocks) return;
                    do_block(b, ctx);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    Acc total;
    for (auto& acc : block_accs) total.merge(acc);
    return total;
}

struct NoCtx {};

template <typename Acc, typename Body>
Acc run(std::uint64_t n_paths, int n_workers, Body&& body) {
    return run_with_ctx<Acc>(
        n_paths, n_workers, [] { return NoCtx{}; },
        [&body](std::uint64_t i, Acc& acc, NoCtx&) { body(i, acc); });
}

} // namespace hpath::parallel
