// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smmo/handle.hpp"
#include "smmo/hbitmap.hpp"
#include "smmo/types.hpp"

namespace smmo {

// Heap sizing: either a byte budget (block count is derived) or an explicit
// block count.
struct HeapSize {
    static HeapSize bytes(std::size_t n) { return {n, 0}; }
    static HeapSize blocks(std::size_t n) { return {0, n}; }
    std::size_t heap_bytes = 0;
    std::size_t num_blocks = 0;
};

inline constexpr std::size_t kBlockHeaderBytes = 32;

// Fixed grid of equally sized blocks. Each block starts with a header whose
// 64-bit object allocation bitmap is the single source of truth for the
// block's contents; the free/allocated[T]/active[T] bitmap families index
// blocks by state and may lag transiently during concurrent operations.
//
// A free block's object bitmap holds the all-ones invalidation sentinel, so
// reservations against a stale state-bitmap read fail at the word instead of
// landing in a recycled block. initialize_block installs the zeroed bitmap
// after the new type is in place.
class Heap {
public:
    static constexpr std::uint64_t kInvalidBitmap = ~std::uint64_t{0};

    Heap(const TypeRegistry& registry, HeapSize size);

    Heap(const Heap&) = delete;
    Heap& operator=(const Heap&) = delete;

    const TypeRegistry& registry() const { return *registry_; }
    std::size_t num_blocks() const { return num_blocks_; }
    std::size_t block_bytes() const { return block_bytes_; }
    std::size_t storage_bytes() const { return num_blocks_ * block_bytes_; }

    BlockBitmap& free_bitmap() { return *free_; }
    BlockBitmap& allocated_bitmap(TypeId t) { return *allocated_.at(t); }
    BlockBitmap& active_bitmap(TypeId t) { return *active_.at(t); }
    const BlockBitmap& free_bitmap() const { return *free_; }
    const BlockBitmap& allocated_bitmap(TypeId t) const { return *allocated_.at(t); }
    const BlockBitmap& active_bitmap(TypeId t) const { return *active_.at(t); }

    // The caller must hold the block exclusively (a successful find_and_clear
    // on the free bitmap). Installs the type and capacity mask, then
    // publishes the zeroed object bitmap. The data segment is left as-is;
    // constructors run at allocation.
    void initialize_block(std::uint32_t block, TypeId t);

    // Clears the header back to the free state, keeping the invalidation
    // sentinel in the object bitmap. Caller owns the block via a successful
    // empty -> sentinel transition.
    void reset_block_header(std::uint32_t block);

    struct Reservation {
        std::uint32_t slot;        // claimed slot index
        std::uint64_t prev_word;   // object bitmap immediately before the claim
        bool filled;               // this claim allocated the last slot
    };
    // Atomically claim one zero bit of (object bitmap & capacity mask of t).
    // Fails when the word has no free slot for t, which covers full blocks
    // and the invalidation sentinel alike. The winning compare-and-swap is
    // the linearization point of an allocation.
    std::optional<Reservation> reserve(std::uint32_t block, TypeId t, std::uint64_t hint);

    struct BatchReservation {
        std::uint64_t slots;       // mask of claimed slots
        std::uint64_t prev_word;
        bool filled;
    };
    // One compare-and-swap claiming up to max_count slots of one block.
    std::optional<BatchReservation> reserve_batch(std::uint32_t block, TypeId t,
                                                  unsigned max_count, std::uint64_t hint);

    std::uint64_t object_word(std::uint32_t block) const;
    std::uint64_t fetch_and_object_word(std::uint32_t block, std::uint64_t mask);
    bool cas_object_word(std::uint32_t block, std::uint64_t expected, std::uint64_t desired);
    TypeId block_type(std::uint32_t block) const;
    std::uint64_t block_capacity_mask(std::uint32_t block) const;

    // Byte offset of a field's slot cell within the heap storage.
    std::size_t field_location(ObjectHandle h, std::size_t field_index) const;
    std::byte* field_ptr(ObjectHandle h, std::size_t field_index);
    const std::byte* field_ptr(ObjectHandle h, std::size_t field_index) const;

    // Quiescent diagnostics ---------------------------------------------

    struct BlockState {
        bool free = false;
        bool allocated = false;
        bool active = false;
        TypeId type = kTypeNone;
        unsigned live = 0;
        std::string problem;  // empty when header and bitmaps agree
    };
    BlockState block_state(std::uint32_t block) const;

    std::size_t live_count(TypeId t) const;
    std::size_t allocated_block_count(TypeId t) const;
    std::size_t free_block_count() const;

    void check_handle(ObjectHandle h) const;  // bounds + registered type

private:
    struct BlockHeader {
        std::atomic<std::uint64_t> object_bitmap;
        std::atomic<std::uint64_t> capacity_mask;
        std::atomic<std::uint32_t> type_id;
        std::uint32_t reserved;
    };
    static_assert(sizeof(BlockHeader) <= kBlockHeaderBytes);

    BlockHeader& header(std::uint32_t block);
    const BlockHeader& header(std::uint32_t block) const;

    const TypeRegistry* registry_;
    std::size_t num_blocks_ = 0;
    std::size_t block_bytes_ = 0;
    std::unique_ptr<std::byte[]> storage_;
    std::unique_ptr<BlockBitmap> free_;
    std::vector<std::unique_ptr<BlockBitmap>> allocated_;
    std::vector<std::unique_ptr<BlockBitmap>> active_;
};

}  // namespace smmo
