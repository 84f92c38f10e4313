// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace smmo {

struct TypeLayout {
    unsigned capacity = 0;                     // object slots per block, <= 64
    std::vector<std::size_t> column_offsets;   // per-field byte offset in the data segment
};

struct HeapLayout {
    std::size_t data_segment_bytes = 0;        // fixed by the smallest type at capacity 64
    std::vector<TypeLayout> types;
};

// Lay out one column per field, consecutively, each start rounded up to
// 8 bytes. Returns the end offset of the last column.
std::size_t columns_end(const std::vector<unsigned>& field_widths, unsigned capacity,
                        std::vector<std::size_t>* offsets_out);

// The smallest declared type (by summed field widths, ties by declaration
// order) gets capacity 64 and fixes the data-segment size; every other type
// gets the largest capacity <= 64 whose aligned columns still fit. Field
// widths must be 4 or 8 bytes. Throws ConfigError if a type cannot fit a
// single object.
HeapLayout compute_layout(const std::vector<std::vector<unsigned>>& type_field_widths);

}  // namespace smmo
