// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "smmo/heap.hpp"

namespace smmo {

// Counters exported to the bench harness. Monotone during a run.
struct AllocatorStats {
    std::uint64_t fast_path_allocations = 0;
    std::uint64_t slow_path_block_inits = 0;
    std::uint64_t reserve_fails = 0;
    std::uint64_t find_fails = 0;
    std::uint64_t oom_events = 0;
    std::uint64_t type_rollbacks = 0;
    std::uint64_t batch_reservations = 0;
    std::uint64_t deallocations = 0;
    std::uint64_t blocks_recycled = 0;
};

// Lock-free object allocation over a Heap.
//
// allocate() prefers active blocks (those with vacancy) and initializes a
// fresh block only when none is found. All decisions funnel through the
// object-bitmap word: state bitmaps are lookup accelerators that may be
// stale, and every path revalidates at the word before committing. A block
// can be recycled and reinitialized for another type between a state-bitmap
// read and the reservation, so a successful reservation is followed by one
// type check; on mismatch the slots are released again with the
// corresponding state transitions for the block's real type.
class Allocator {
public:
    static constexpr unsigned kOomRetryLimit = 32;

    explicit Allocator(Heap& heap) : heap_(&heap) {}

    Heap& heap() { return *heap_; }

    // Throws OutOfMemoryError after kOomRetryLimit consecutive slow-path
    // failures to claim a free block.
    ObjectHandle allocate(TypeId t);

    // Claims up to `count` slots of one block with a single successful
    // compare-and-swap, then falls back to allocate() for any remainder.
    // Returns exactly `count` handles or throws, releasing partial results.
    std::vector<ObjectHandle> allocate_many(TypeId t, unsigned count);

    // Releases one object. Detects double frees (the slot bit was already
    // clear) and type mismatches against the block header as UsageError.
    void deallocate(ObjectHandle h);

    // Single attempt to recycle an empty block: object bitmap 0 -> sentinel.
    // False when a concurrent reservation won the race.
    bool try_free_block(std::uint32_t block);

    AllocatorStats stats() const;
    std::map<std::string, std::uint64_t> stats_map() const;

    // Test hook: invoked at the top of every allocation attempt loop.
    void set_step_probe(std::function<void()> probe) { step_probe_ = std::move(probe); }

private:
    struct Placement {
        std::uint32_t block;
        std::uint64_t slots;
        std::uint64_t prev_word;
    };
    // Shared fast/slow path of allocate and allocate_many: finds a block,
    // claims up to max_count slots, validates the block type.
    Placement place(TypeId t, unsigned max_count);
    void undo_reservation(std::uint32_t block, std::uint64_t slots, std::uint64_t prev_word);
    static std::uint64_t thread_hint();

    Heap* heap_;
    std::function<void()> step_probe_;

    struct Counters {
        std::atomic<std::uint64_t> fast_path{0};
        std::atomic<std::uint64_t> slow_path{0};
        std::atomic<std::uint64_t> reserve_fails{0};
        std::atomic<std::uint64_t> find_fails{0};
        std::atomic<std::uint64_t> oom_events{0};
        std::atomic<std::uint64_t> type_rollbacks{0};
        std::atomic<std::uint64_t> batch_reservations{0};
        std::atomic<std::uint64_t> deallocations{0};
        std::atomic<std::uint64_t> blocks_recycled{0};
    };
    mutable Counters counters_;
};

}  // namespace smmo
