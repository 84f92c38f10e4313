// SPDX-License-Identifier: Apache-2.0
#include "smmo/layout.hpp"

#include <numeric>
#include <string>

#include "smmo/errors.hpp"

namespace smmo {

namespace {

constexpr std::size_t align8(std::size_t n) { return (n + 7) & ~std::size_t{7}; }

}  // namespace

std::size_t columns_end(const std::vector<unsigned>& field_widths, unsigned capacity,
                        std::vector<std::size_t>* offsets_out) {
    std::size_t off = 0;
    if (offsets_out) {
        offsets_out->clear();
    }
    for (unsigned width : field_widths) {
        off = align8(off);
        if (offsets_out) {
            offsets_out->push_back(off);
        }
        off += std::size_t(capacity) * width;
    }
    return off;
}

HeapLayout compute_layout(const std::vector<std::vector<unsigned>>& type_field_widths) {
    if (type_field_widths.empty()) {
        throw ConfigError("at least one type must be declared");
    }
    for (std::size_t t = 0; t < type_field_widths.size(); ++t) {
        if (type_field_widths[t].empty()) {
            throw ConfigError("type " + std::to_string(t) + " has no fields");
        }
        for (unsigned w : type_field_widths[t]) {
            if (w != 4 && w != 8) {
                throw ConfigError("field widths must be 4 or 8 bytes");
            }
        }
    }

    std::size_t smallest = 0;
    std::size_t smallest_bytes = ~std::size_t{0};
    for (std::size_t t = 0; t < type_field_widths.size(); ++t) {
        const std::size_t bytes =
            std::accumulate(type_field_widths[t].begin(), type_field_widths[t].end(), std::size_t{0});
        if (bytes < smallest_bytes) {
            smallest_bytes = bytes;
            smallest = t;
        }
    }

    HeapLayout layout;
    layout.data_segment_bytes = align8(columns_end(type_field_widths[smallest], 64, nullptr));
    layout.types.resize(type_field_widths.size());

    for (std::size_t t = 0; t < type_field_widths.size(); ++t) {
        TypeLayout& tl = layout.types[t];
        for (unsigned c = 64; c >= 1; --c) {
            if (columns_end(type_field_widths[t], c, &tl.column_offsets) <= layout.data_segment_bytes) {
                tl.capacity = c;
                break;
            }
        }
        if (tl.capacity == 0) {
            throw ConfigError("type " + std::to_string(t) + " does not fit one object per block");
        }
    }
    return layout;
}

}  // namespace smmo
