// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "smmo/errors.hpp"

namespace smmo {

inline constexpr std::size_t kBitmapFail = ~std::size_t{0};

enum class BitmapInit { kAllZeros, kAllOnes };

// Receives one event per successful bit transition, including the summary
// transitions a caller performs on behalf of its container. Test
// instrumentation; not part of the concurrency contract.
class PropagationObserver {
public:
    virtual ~PropagationObserver() = default;
    virtual void on_set(unsigned level, std::size_t pos) = 0;
    virtual void on_clear(unsigned level, std::size_t pos) = 0;
};

namespace detail {

// Rotate w right by r within the low `bits` bits of the word.
template <unsigned bits>
inline std::uint64_t rotr_bits(std::uint64_t w, unsigned r) {
    if constexpr (bits == 64) {
        return std::rotr(w, int(r));
    } else {
        r %= bits;
        if (r == 0) {
            return w;
        }
        constexpr std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
        return ((w >> r) | (w << (bits - r))) & mask;
    }
}

template <unsigned bits>
inline std::uint64_t rotl_bits(std::uint64_t w, unsigned r) {
    r %= bits;
    return rotr_bits<bits>(w, bits - r == bits ? 0 : bits - r);
}

// Position of a set bit of w (w != 0): the scan start is rotated by `hint`
// so concurrent callers with distinct hints spread across the word instead
// of all contending on the lowest set bit.
template <unsigned bits>
inline unsigned select_set_bit(std::uint64_t w, std::uint64_t hint) {
    const unsigned r = unsigned(hint % bits);
    const std::uint64_t rotated = rotr_bits<bits>(w, r);
    const unsigned t = unsigned(std::countr_zero(rotated));
    return (t + r) % bits;
}

// Keep the k lowest set bits of w, clearing the rest.
inline std::uint64_t lowest_set_bits(std::uint64_t w, unsigned k) {
    std::uint64_t out = 0;
    while (k-- > 0 && w != 0) {
        const std::uint64_t b = w & (~w + 1);
        out |= b;
        w ^= b;
    }
    return out;
}

inline void spin_relax(unsigned attempt) {
    if (attempt >= 64) {
        std::this_thread::yield();
    }
}

}  // namespace detail

// Lock-free bitmap with eventually consistent summary levels.
//
// Level 0 holds the payload bits, grouped into containers of
// BitsPerContainer bits. Each higher level has one bit per container of the
// level below, set iff that container is nonzero; the topmost level is a
// single container. Bit mutations are atomic word operations on the owning
// container; the caller whose operation transitioned the container between
// empty and nonzero carries the summary update upward, retrying until its
// transition lands. Summaries may lag while operations are in flight and are
// exact once all operations have completed.
//
// BitsPerContainer is 64 in production. Narrower widths exist so tests can
// build multi-level structures out of a handful of bits.
template <unsigned BitsPerContainer = 64>
class HierarchicalBitmap {
    static_assert(BitsPerContainer >= 2 && BitsPerContainer <= 64);

public:
    using Word = std::uint64_t;
    static constexpr unsigned kBits = BitsPerContainer;
    static constexpr Word kFullContainer =
        kBits == 64 ? ~Word{0} : ((Word{1} << kBits) - 1);

    HierarchicalBitmap(std::size_t num_bits, BitmapInit init) : num_bits_(num_bits) {
        if (num_bits == 0) {
            throw ConfigError("bitmap needs at least one bit");
        }
        if (num_bits > (std::size_t{1} << 48)) {
            throw ConfigError("bitmap size out of range");
        }
        std::size_t bits = num_bits;
        for (;;) {
            Level level;
            level.num_bits = bits;
            level.num_containers = (bits + kBits - 1) / kBits;
            level.words = std::make_unique<std::atomic<Word>[]>(level.num_containers);
            for (std::size_t i = 0; i < level.num_containers; ++i) {
                Word w = 0;
                if (init == BitmapInit::kAllOnes) {
                    const std::size_t lo = i * kBits;
                    const std::size_t n = std::min<std::size_t>(kBits, bits - lo);
                    w = n == 64 ? ~Word{0} : ((Word{1} << n) - 1);
                }
                level.words[i].store(w, std::memory_order_relaxed);
            }
            const std::size_t containers = level.num_containers;
            levels_.push_back(std::move(level));
            if (containers == 1) {
                break;
            }
            bits = containers;
        }
    }

    HierarchicalBitmap(const HierarchicalBitmap&) = delete;
    HierarchicalBitmap& operator=(const HierarchicalBitmap&) = delete;

    std::size_t num_bits() const { return num_bits_; }
    unsigned num_levels() const { return unsigned(levels_.size()); }

    std::size_t containers_at(unsigned level) const { return levels_.at(level).num_containers; }

    // Atomically OR the bit in; true iff this call took it 0 -> 1.
    bool try_set(std::size_t pos) {
        check_pos(pos);
        return try_set_at(0, pos);
    }

    // Atomically AND the bit out; true iff this call took it 1 -> 0.
    bool try_clear(std::size_t pos) {
        check_pos(pos);
        return try_clear_at(0, pos);
    }

    // Retry try_set until this thread performs the 0 -> 1 transition. Only
    // call while holding the exclusive right to that transition; otherwise
    // the loop can wait on the paired clear indefinitely.
    void set(std::size_t pos) {
        check_pos(pos);
        set_at(0, pos);
    }

    // Mirror of set(pos) for the 1 -> 0 transition.
    void clear(std::size_t pos) {
        check_pos(pos);
        clear_at(0, pos);
    }

    bool test(std::size_t pos) const {
        check_pos(pos);
        const Word w = levels_[0].words[pos / kBits].load(std::memory_order_acquire);
        return (w >> (pos % kBits)) & 1;
    }

    // Walk from the top container downward, picking a set bit per level
    // (selection rotated by hint). Any zero container read ends the walk
    // with kBitmapFail; transient inconsistency makes that possible even
    // when bits exist, so callers retry or take a fallback path. A returned
    // position was set when its container was read but may be gone by the
    // time the caller acts: revalidate with an atomic operation.
    std::size_t try_find_set(std::uint64_t hint) const {
        const unsigned top = unsigned(levels_.size()) - 1;
        std::size_t cid = 0;
        for (unsigned level = top;; --level) {
            const Word w = levels_[level].words[cid].load(std::memory_order_acquire);
            if (w == 0) {
                return kBitmapFail;
            }
            const std::size_t pos = cid * kBits + detail::select_set_bit<kBits>(w, hint);
            if (level == 0) {
                return pos;
            }
            cid = pos;
        }
    }

    // Find a set bit and atomically claim it. Each returned index was
    // transitioned 1 -> 0 by this caller, so concurrent callers never
    // receive the same index from the same set-epoch.
    std::size_t find_and_clear(std::uint64_t hint) {
        for (;;) {
            const std::size_t pos = try_find_set(hint);
            if (pos == kBitmapFail) {
                return kBitmapFail;
            }
            if (try_clear_at(0, pos)) {
                return pos;
            }
            hint += 0x9e3779b97f4a7c15ULL;  // lost the race; probe elsewhere
        }
    }

    // Quiescent oracle: every summary bit equals the OR of its container,
    // and all padding bits are zero. The caller guarantees no operations
    // are in flight.
    bool is_consistent() const {
        for (unsigned level = 0; level + 1 < levels_.size(); ++level) {
            const Level& lo = levels_[level];
            const Level& hi = levels_[level + 1];
            for (std::size_t i = 0; i < lo.num_containers; ++i) {
                const bool expected = lo.words[i].load(std::memory_order_acquire) != 0;
                const Word hw = hi.words[i / kBits].load(std::memory_order_acquire);
                const bool actual = (hw >> (i % kBits)) & 1;
                if (expected != actual) {
                    return false;
                }
            }
        }
        for (const Level& level : levels_) {
            for (std::size_t i = 0; i < level.num_containers; ++i) {
                const std::size_t used = std::min<std::size_t>(kBits, level.num_bits - i * kBits);
                const Word valid = used == 64 ? ~Word{0} : ((Word{1} << used) - 1);
                if (level.words[i].load(std::memory_order_acquire) & ~valid) {
                    return false;
                }
            }
        }
        return true;
    }

    // Level-0 popcount. Meaningful at quiescence only.
    std::size_t count_set() const {
        std::size_t n = 0;
        const Level& level = levels_[0];
        for (std::size_t i = 0; i < level.num_containers; ++i) {
            n += std::size_t(std::popcount(level.words[i].load(std::memory_order_acquire)));
        }
        return n;
    }

    Word level_word(unsigned level, std::size_t container) const {
        return levels_.at(level).words[container].load(std::memory_order_acquire);
    }

    // Diagnostic dump: one line per level, containers in hex.
    std::string dump() const {
        std::string out;
        char buf[32];
        for (unsigned level = 0; level < levels_.size(); ++level) {
            out += "L" + std::to_string(level) + ":";
            for (std::size_t i = 0; i < levels_[level].num_containers; ++i) {
                std::snprintf(buf, sizeof buf, " %016llx",
                              (unsigned long long)levels_[level].words[i].load(std::memory_order_relaxed));
                out += buf;
            }
            out += "\n";
        }
        return out;
    }

    // Fault injection for consistency tests: XOR one bit without any
    // summary propagation.
    void flip_bit(unsigned level, std::size_t pos) {
        levels_.at(level).words[pos / kBits].fetch_xor(Word{1} << (pos % kBits),
                                                       std::memory_order_acq_rel);
    }

    void set_propagation_observer(PropagationObserver* observer) { observer_ = observer; }

private:
    struct Level {
        std::unique_ptr<std::atomic<Word>[]> words;
        std::size_t num_bits = 0;
        std::size_t num_containers = 0;
    };

    void check_pos(std::size_t pos) const {
        if (pos >= num_bits_) {
            throw UsageError("bitmap position out of range");
        }
    }

    bool try_set_at(unsigned level, std::size_t pos) {
        const std::size_t cid = pos / kBits;
        const Word mask = Word{1} << (pos % kBits);
        const Word prev = levels_[level].words[cid].fetch_or(mask, std::memory_order_acq_rel);
        const bool success = (prev & mask) == 0;
        if (success) {
            if (observer_) {
                observer_->on_set(level, pos);
            }
            // First bit of a previously empty container: this caller owns
            // the nested 0 -> 1 transition.
            if (prev == 0 && level + 1 < levels_.size()) {
                set_at(level + 1, cid);
            }
        }
        return success;
    }

    bool try_clear_at(unsigned level, std::size_t pos) {
        const std::size_t cid = pos / kBits;
        const Word mask = Word{1} << (pos % kBits);
        const Word prev = levels_[level].words[cid].fetch_and(~mask, std::memory_order_acq_rel);
        const bool success = (prev & mask) != 0;
        if (success) {
            if (observer_) {
                observer_->on_clear(level, pos);
            }
            // popcount(prev) == 1 means this call emptied the container, so
            // this caller owns the nested 1 -> 0 transition.
            if (std::popcount(prev) == 1 && level + 1 < levels_.size()) {
                clear_at(level + 1, cid);
            }
        }
        return success;
    }

    void set_at(unsigned level, std::size_t pos) {
        for (unsigned attempt = 0; !try_set_at(level, pos); ++attempt) {
            detail::spin_relax(attempt);
        }
    }

    void clear_at(unsigned level, std::size_t pos) {
        for (unsigned attempt = 0; !try_clear_at(level, pos); ++attempt) {
            detail::spin_relax(attempt);
        }
    }

    std::vector<Level> levels_;
    std::size_t num_bits_ = 0;
    PropagationObserver* observer_ = nullptr;
};

using BlockBitmap = HierarchicalBitmap<64>;

}  // namespace smmo
