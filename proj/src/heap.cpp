// SPDX-License-Identifier: Apache-2.0
#include "smmo/heap.hpp"

#include <bit>
#include <cstring>
#include <new>

#include "smmo/errors.hpp"

namespace smmo {

Heap::Heap(const TypeRegistry& registry, HeapSize size) : registry_(&registry) {
    if (!registry.frozen()) {
        throw ConfigError("heap requires a frozen type registry");
    }
    block_bytes_ = kBlockHeaderBytes + registry.block_data_bytes();
    if (size.num_blocks != 0) {
        num_blocks_ = size.num_blocks;
    } else {
        num_blocks_ = size.heap_bytes / block_bytes_;
    }
    if (num_blocks_ == 0) {
        throw ConfigError("heap smaller than one block (" + std::to_string(block_bytes_) +
                          " bytes needed)");
    }
    if (num_blocks_ > (std::size_t{1} << 26)) {
        throw ConfigError("block count out of handle range");
    }

    storage_ = std::make_unique<std::byte[]>(num_blocks_ * block_bytes_);
    for (std::uint32_t b = 0; b < num_blocks_; ++b) {
        auto* h = new (storage_.get() + std::size_t(b) * block_bytes_) BlockHeader;
        h->object_bitmap.store(kInvalidBitmap, std::memory_order_relaxed);
        h->capacity_mask.store(0, std::memory_order_relaxed);
        h->type_id.store(kTypeNone, std::memory_order_relaxed);
    }

    free_ = std::make_unique<BlockBitmap>(num_blocks_, BitmapInit::kAllOnes);
    allocated_.reserve(registry.num_types());
    active_.reserve(registry.num_types());
    for (std::size_t t = 0; t < registry.num_types(); ++t) {
        allocated_.push_back(std::make_unique<BlockBitmap>(num_blocks_, BitmapInit::kAllZeros));
        active_.push_back(std::make_unique<BlockBitmap>(num_blocks_, BitmapInit::kAllZeros));
    }
}

Heap::BlockHeader& Heap::header(std::uint32_t block) {
    return *std::launder(
        reinterpret_cast<BlockHeader*>(storage_.get() + std::size_t(block) * block_bytes_));
}

const Heap::BlockHeader& Heap::header(std::uint32_t block) const {
    return *std::launder(
        reinterpret_cast<const BlockHeader*>(storage_.get() + std::size_t(block) * block_bytes_));
}

void Heap::initialize_block(std::uint32_t block, TypeId t) {
    const TypeDescriptor& d = registry_->descriptor(t);
    BlockHeader& h = header(block);
    h.capacity_mask.store(d.capacity_mask(), std::memory_order_relaxed);
    h.type_id.store(t, std::memory_order_relaxed);
    // Publish: stale reservations can only succeed once the sentinel is
    // replaced, and then they observe the type installed above.
    h.object_bitmap.store(0, std::memory_order_release);
}

void Heap::reset_block_header(std::uint32_t block) {
    BlockHeader& h = header(block);
    h.type_id.store(kTypeNone, std::memory_order_relaxed);
    h.capacity_mask.store(0, std::memory_order_release);
}

std::optional<Heap::Reservation> Heap::reserve(std::uint32_t block, TypeId t,
                                               std::uint64_t hint) {
    const std::uint64_t mask = registry_->descriptor(t).capacity_mask();
    std::atomic<std::uint64_t>& word = header(block).object_bitmap;
    std::uint64_t w = word.load(std::memory_order_acquire);
    for (;;) {
        const std::uint64_t free_bits = ~w & mask;
        if (free_bits == 0) {
            return std::nullopt;  // full, or the free-block sentinel
        }
        const unsigned slot = detail::select_set_bit<64>(free_bits, hint);
        const std::uint64_t bit = std::uint64_t{1} << slot;
        if (word.compare_exchange_weak(w, w | bit, std::memory_order_acq_rel,
                                       std::memory_order_acquire)) {
            return Reservation{slot, w, ((w | bit) & mask) == mask};
        }
    }
}

std::optional<Heap::BatchReservation> Heap::reserve_batch(std::uint32_t block, TypeId t,
                                                          unsigned max_count,
                                                          std::uint64_t hint) {
    const std::uint64_t mask = registry_->descriptor(t).capacity_mask();
    std::atomic<std::uint64_t>& word = header(block).object_bitmap;
    std::uint64_t w = word.load(std::memory_order_acquire);
    for (;;) {
        const std::uint64_t free_bits = ~w & mask;
        if (free_bits == 0) {
            return std::nullopt;
        }
        const unsigned r = unsigned(hint % 64);
        const std::uint64_t take =
            detail::rotl_bits<64>(detail::lowest_set_bits(detail::rotr_bits<64>(free_bits, r),
                                                          max_count),
                                  r);
        if (word.compare_exchange_weak(w, w | take, std::memory_order_acq_rel,
                                       std::memory_order_acquire)) {
            return BatchReservation{take, w, ((w | take) & mask) == mask};
        }
    }
}

std::uint64_t Heap::object_word(std::uint32_t block) const {
    return header(block).object_bitmap.load(std::memory_order_acquire);
}

std::uint64_t Heap::fetch_and_object_word(std::uint32_t block, std::uint64_t mask) {
    return header(block).object_bitmap.fetch_and(mask, std::memory_order_acq_rel);
}

bool Heap::cas_object_word(std::uint32_t block, std::uint64_t expected, std::uint64_t desired) {
    return header(block).object_bitmap.compare_exchange_strong(
        expected, desired, std::memory_order_acq_rel, std::memory_order_acquire);
}

TypeId Heap::block_type(std::uint32_t block) const {
    return TypeId(header(block).type_id.load(std::memory_order_acquire));
}

std::uint64_t Heap::block_capacity_mask(std::uint32_t block) const {
    return header(block).capacity_mask.load(std::memory_order_acquire);
}

void Heap::check_handle(ObjectHandle h) const {
    if (h.is_none()) {
        throw UsageError("null handle");
    }
    if (h.type >= registry_->num_types()) {
        throw UsageError("handle has unregistered type " + std::to_string(h.type));
    }
    if (h.block >= num_blocks_) {
        throw UsageError("handle block index out of range");
    }
    if (h.slot >= registry_->descriptor(h.type).capacity) {
        throw UsageError("handle slot index out of range for type");
    }
}

std::size_t Heap::field_location(ObjectHandle h, std::size_t field_index) const {
    check_handle(h);
    const TypeDescriptor& d = registry_->descriptor(h.type);
    if (field_index >= d.fields.size()) {
        throw UsageError("field index out of range for type " + d.name);
    }
    return std::size_t(h.block) * block_bytes_ + kBlockHeaderBytes +
           d.column_offsets[field_index] + std::size_t(h.slot) * d.field_widths[field_index];
}

std::byte* Heap::field_ptr(ObjectHandle h, std::size_t field_index) {
    return storage_.get() + field_location(h, field_index);
}

const std::byte* Heap::field_ptr(ObjectHandle h, std::size_t field_index) const {
    return storage_.get() + field_location(h, field_index);
}

Heap::BlockState Heap::block_state(std::uint32_t block) const {
    BlockState s;
    const BlockHeader& h = header(block);
    const std::uint64_t word = h.object_bitmap.load(std::memory_order_acquire);
    s.type = TypeId(h.type_id.load(std::memory_order_acquire));
    s.free = free_->test(block);

    std::size_t allocated_hits = 0;
    for (std::size_t t = 0; t < registry_->num_types(); ++t) {
        if (allocated_[t]->test(block)) {
            ++allocated_hits;
            s.allocated = true;
            if (s.type != t) {
                s.problem = "allocated bit set for type " + std::to_string(t) +
                            " but header says " + std::to_string(s.type);
            }
        }
        if (active_[t]->test(block)) {
            s.active = true;
            if (!allocated_[t]->test(block)) {
                s.problem = "active bit without allocated bit for type " + std::to_string(t);
            }
        }
    }
    if (allocated_hits > 1) {
        s.problem = "block allocated under multiple types";
    }
    if (s.free == s.allocated) {
        s.problem = s.free ? "block both free and allocated" : "block neither free nor allocated";
    }

    if (s.free) {
        if (s.type != kTypeNone) {
            s.problem = "free block with a type in its header";
        }
        if (word != kInvalidBitmap && word != 0) {
            s.problem = "free block with live object bits";
        }
    } else if (s.allocated && s.type != kTypeNone) {
        const TypeDescriptor& d = registry_->descriptor(s.type);
        const std::uint64_t mask = d.capacity_mask();
        if (h.capacity_mask.load(std::memory_order_acquire) != mask) {
            s.problem = "header capacity mask does not match descriptor";
        }
        if ((word & ~mask) != 0) {
            s.problem = "object bits outside the capacity mask";
        }
        s.live = unsigned(std::popcount(word & mask));
        if (s.live == 0) {
            s.problem = "allocated block with no objects at quiescence";
        }
        const bool should_be_active = s.live < d.capacity;
        if (active_[s.type]->test(block) != should_be_active) {
            s.problem = should_be_active ? "non-full block missing its active bit"
                                         : "full block still marked active";
        }
    }
    return s;
}

std::size_t Heap::live_count(TypeId t) const {
    const TypeDescriptor& d = registry_->descriptor(t);
    const std::uint64_t mask = d.capacity_mask();
    const BlockBitmap& allocated = *allocated_[t];
    std::size_t n = 0;
    for (std::size_t c = 0; c * 64 < num_blocks_; ++c) {
        std::uint64_t w = allocated.level_word(0, c);
        while (w != 0) {
            const unsigned bit = unsigned(std::countr_zero(w));
            w &= w - 1;
            n += std::size_t(std::popcount(object_word(std::uint32_t(c * 64 + bit)) & mask));
        }
    }
    return n;
}

std::size_t Heap::allocated_block_count(TypeId t) const {
    return allocated_.at(t)->count_set();
}

std::size_t Heap::free_block_count() const { return free_->count_set(); }

}  // namespace smmo
