// SPDX-License-Identifier: Apache-2.0
#include "smmo/allocator.hpp"

#include <bit>

#include "smmo/errors.hpp"

namespace smmo {

std::uint64_t Allocator::thread_hint() {
    static std::atomic<std::uint64_t> next{0};
    thread_local std::uint64_t hint = next.fetch_add(1, std::memory_order_relaxed);
    return hint;
}

Allocator::Placement Allocator::place(TypeId t, unsigned max_count) {
    BlockBitmap& active = heap_->active_bitmap(t);
    BlockBitmap& allocated = heap_->allocated_bitmap(t);
    BlockBitmap& free = heap_->free_bitmap();
    const std::uint64_t base_hint = thread_hint();
    unsigned slow_fails = 0;

    for (std::uint64_t attempt = 0;; ++attempt) {
        if (step_probe_) {
            step_probe_();
        }
        const std::uint64_t hint = base_hint + attempt;
        bool via_active = true;
        std::size_t bid = active.try_find_set(hint);
        if (bid == kBitmapFail) {
            via_active = false;
            // Slow path: claim and initialize a fresh block.
            bid = free.find_and_clear(hint);
            if (bid == kBitmapFail) {
                counters_.find_fails.fetch_add(1, std::memory_order_relaxed);
                if (++slow_fails >= kOomRetryLimit) {
                    counters_.oom_events.fetch_add(1, std::memory_order_relaxed);
                    throw OutOfMemoryError("no free block for type " +
                                           heap_->registry().descriptor(t).name);
                }
                continue;
            }
            slow_fails = 0;
            heap_->initialize_block(std::uint32_t(bid), t);
            allocated.set(bid);
            active.set(bid);
            counters_.slow_path.fetch_add(1, std::memory_order_relaxed);
        }

        auto res = heap_->reserve_batch(std::uint32_t(bid), t, max_count, hint);
        if (!res) {
            // Filled up (or recycled to the sentinel) since the bitmap read.
            counters_.reserve_fails.fetch_add(1, std::memory_order_relaxed);
            continue;
        }

        // The reservation pins the block: its type cannot change while our
        // slots are set, so one check decides whether the lookup was stale.
        if (heap_->block_type(std::uint32_t(bid)) != t) {
            undo_reservation(std::uint32_t(bid), res->slots, res->prev_word);
            counters_.type_rollbacks.fetch_add(1, std::memory_order_relaxed);
            continue;
        }

        if (res->filled) {
            active.clear(bid);
        }
        if (via_active) {
            counters_.fast_path.fetch_add(1, std::memory_order_relaxed);
        }
        return Placement{std::uint32_t(bid), res->slots, res->prev_word};
    }
}

ObjectHandle Allocator::allocate(TypeId t) {
    heap_->registry().descriptor(t);  // validates the type id
    const Placement p = place(t, 1);
    return ObjectHandle{t, p.block, std::uint32_t(std::countr_zero(p.slots))};
}

std::vector<ObjectHandle> Allocator::allocate_many(TypeId t, unsigned count) {
    if (count < 1 || count > 64) {
        throw UsageError("allocate_many count must be in [1, 64]");
    }
    heap_->registry().descriptor(t);

    std::vector<ObjectHandle> out;
    out.reserve(count);
    const Placement p = place(t, count);
    counters_.batch_reservations.fetch_add(1, std::memory_order_relaxed);
    std::uint64_t slots = p.slots;
    while (slots != 0) {
        const unsigned slot = unsigned(std::countr_zero(slots));
        slots &= slots - 1;
        out.push_back(ObjectHandle{t, p.block, slot});
    }

    try {
        while (out.size() < count) {
            out.push_back(allocate(t));
        }
    } catch (const OutOfMemoryError&) {
        for (ObjectHandle h : out) {
            deallocate(h);
        }
        throw;
    }
    return out;
}

void Allocator::deallocate(ObjectHandle h) {
    heap_->check_handle(h);
    const TypeDescriptor& d = heap_->registry().descriptor(h.type);

    // With a live handle the block's type is pinned, so a mismatch means the
    // handle does not refer to a live object of its claimed type.
    const TypeId actual = heap_->block_type(h.block);
    if (actual != h.type) {
        throw UsageError("deallocate: block " + std::to_string(h.block) + " holds type " +
                         std::to_string(actual) + ", handle claims " + d.name);
    }

    const std::uint64_t bit = std::uint64_t{1} << h.slot;
    const std::uint64_t prev = heap_->fetch_and_object_word(h.block, ~bit);
    if ((prev & bit) == 0) {
        throw UsageError("double free of slot " + std::to_string(h.slot) + " in block " +
                         std::to_string(h.block));
    }
    counters_.deallocations.fetch_add(1, std::memory_order_relaxed);

    const std::uint64_t mask = d.capacity_mask();
    if ((prev & mask) == mask) {
        // Was full; this caller owns the transition back into active.
        heap_->active_bitmap(h.type).set(h.block);
    }
    if ((prev & ~bit) == 0) {
        try_free_block(h.block);
    }
}

bool Allocator::try_free_block(std::uint32_t block) {
    // Invalidation claims every slot at once: a competing reservation either
    // beats this CAS (the block stays allocated) or finds no free slot.
    if (!heap_->cas_object_word(block, 0, Heap::kInvalidBitmap)) {
        return false;
    }
    const TypeId t = heap_->block_type(block);
    heap_->active_bitmap(t).clear(block);
    heap_->allocated_bitmap(t).clear(block);
    heap_->reset_block_header(block);
    heap_->free_bitmap().set(block);
    counters_.blocks_recycled.fetch_add(1, std::memory_order_relaxed);
    return true;
}

void Allocator::undo_reservation(std::uint32_t block, std::uint64_t slots,
                                 std::uint64_t prev_word) {
    // Our slots keep the word nonzero, so the block's real type is stable
    // until we release them.
    const TypeId actual = heap_->block_type(block);
    const std::uint64_t mask = heap_->registry().descriptor(actual).capacity_mask();

    // If our claim completed the block with respect to its real type, the
    // fill transition is ours to perform before we release the slots.
    if ((slots & mask) != 0 && (prev_word & mask) != mask &&
        ((prev_word | slots) & mask) == mask) {
        heap_->active_bitmap(actual).clear(block);
    }

    const std::uint64_t prev = heap_->fetch_and_object_word(block, ~slots);
    if ((slots & mask) != 0 && (prev & mask) == mask) {
        heap_->active_bitmap(actual).set(block);
    }
    if ((prev & ~slots) == 0) {
        try_free_block(block);
    }
}

AllocatorStats Allocator::stats() const {
    AllocatorStats s;
    s.fast_path_allocations = counters_.fast_path.load(std::memory_order_relaxed);
    s.slow_path_block_inits = counters_.slow_path.load(std::memory_order_relaxed);
    s.reserve_fails = counters_.reserve_fails.load(std::memory_order_relaxed);
    s.find_fails = counters_.find_fails.load(std::memory_order_relaxed);
    s.oom_events = counters_.oom_events.load(std::memory_order_relaxed);
    s.type_rollbacks = counters_.type_rollbacks.load(std::memory_order_relaxed);
    s.batch_reservations = counters_.batch_reservations.load(std::memory_order_relaxed);
    s.deallocations = counters_.deallocations.load(std::memory_order_relaxed);
    s.blocks_recycled = counters_.blocks_recycled.load(std::memory_order_relaxed);
    return s;
}

std::map<std::string, std::uint64_t> Allocator::stats_map() const {
    const AllocatorStats s = stats();
    return {
        {"alloc.fast_path", s.fast_path_allocations},
        {"alloc.slow_path_inits", s.slow_path_block_inits},
        {"alloc.reserve_fails", s.reserve_fails},
        {"alloc.find_fails", s.find_fails},
        {"alloc.oom_events", s.oom_events},
        {"alloc.type_rollbacks", s.type_rollbacks},
        {"alloc.batch_reservations", s.batch_reservations},
        {"alloc.deallocations", s.deallocations},
        {"alloc.blocks_recycled", s.blocks_recycled},
    };
}

}  // namespace smmo
