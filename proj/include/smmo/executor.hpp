// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "smmo/hbitmap.hpp"

namespace smmo {

namespace exec {

inline constexpr std::uint32_t kNoIndex = ~std::uint32_t{0};

// A[i] = i where bit i is set, kNoIndex elsewhere.
std::vector<std::uint32_t> enumerate_indices(const BlockBitmap& bitmap, std::size_t num_bits);

// offsets[i] = sum of flags[0..i). The parallel path (blocked two-pass:
// per-chunk sums, a scan of the chunk sums, per-chunk rescan) matches the
// sequential definition exactly.
std::vector<std::size_t> exclusive_prefix_sum(std::span<const std::uint8_t> flags,
                                              unsigned workers);

// Stream compaction: drops kNoIndex entries, preserving order.
std::vector<std::uint32_t> compact(std::span<const std::uint32_t> sparse, unsigned workers);

// Compacted block list for one pass; |blocks| * capacity logical threads.
struct DoAllPlan {
    std::vector<std::uint32_t> blocks;
    std::uint32_t capacity = 0;
    std::size_t logical_threads() const { return blocks.size() * capacity; }
};

struct DoAllReport {
    std::chrono::nanoseconds plan_time{0};
    std::chrono::nanoseconds exec_time{0};
    std::size_t logical_threads = 0;
    std::size_t visited = 0;
};

}  // namespace exec

// Runs a method over every object live in a snapshot of one type's blocks.
//
// Logical thread tid maps to block R[tid / c], slot tid % c; a slot is
// visited iff its bit is set in a one-time read of the block's occupancy
// word taken when a worker first touches that block. Objects created during
// the pass are not visited; objects deleted during the pass may still be.
// Logical threads are chunked contiguously over a fixed pool of workers,
// and all visits happen-before the return (join semantics).
class Executor {
public:
    using WordLoader = std::function<std::uint64_t(std::uint32_t block)>;
    using SlotVisitor = std::function<void(std::uint32_t block, std::uint32_t slot)>;

    explicit Executor(unsigned workers = 0);

    unsigned workers() const { return workers_; }

    exec::DoAllPlan make_plan(const BlockBitmap& allocated, std::size_t num_blocks,
                              std::uint32_t capacity) const;

    exec::DoAllReport run_plan(const exec::DoAllPlan& plan, const WordLoader& load_word,
                               const SlotVisitor& visit) const;

    // make_plan + run_plan with both phases timed.
    exec::DoAllReport do_all(const BlockBitmap& allocated, std::size_t num_blocks,
                             std::uint32_t capacity, const WordLoader& load_word,
                             const SlotVisitor& visit) const;

private:
    unsigned workers_;
};

}  // namespace smmo
