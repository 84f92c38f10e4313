// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

namespace smmo {

using TypeId = std::uint16_t;

inline constexpr TypeId kTypeNone = 0xfff;

// (type, block, slot) triple; the runtime's stand-in for an object pointer.
// Packs into one 64-bit word so it can be stored in a handle-typed field:
// 12 bits of type, 26 bits of block index, 26 bits of slot index.
struct ObjectHandle {
    TypeId type = kTypeNone;
    std::uint32_t block = 0;
    std::uint32_t slot = 0;

    static constexpr std::uint64_t kNonePacked = ~std::uint64_t{0};

    constexpr bool is_none() const { return type == kTypeNone; }

    constexpr std::uint64_t pack() const {
        if (is_none()) {
            return kNonePacked;
        }
        return (std::uint64_t(type) << 52) | (std::uint64_t(block & 0x3ffffffu) << 26) |
               std::uint64_t(slot & 0x3ffffffu);
    }

    static constexpr ObjectHandle unpack(std::uint64_t v) {
        if (v == kNonePacked) {
            return {};
        }
        ObjectHandle h;
        h.type = TypeId((v >> 52) & 0xfffu);
        h.block = std::uint32_t((v >> 26) & 0x3ffffffu);
        h.slot = std::uint32_t(v & 0x3ffffffu);
        return h;
    }

    friend constexpr bool operator==(const ObjectHandle&, const ObjectHandle&) = default;
};

inline constexpr ObjectHandle kNoHandle{};

struct HandleHash {
    std::size_t operator()(const ObjectHandle& h) const {
        std::uint64_t x = h.pack();
        x ^= x >> 33;
        x *= 0xff51afd7ed558ccdULL;
        x ^= x >> 33;
        x *= 0xc4ceb9fe1a85ec53ULL;
        x ^= x >> 33;
        return std::size_t(x);
    }
};

}  // namespace smmo
