// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "smmo/handle.hpp"
#include "smmo/layout.hpp"

namespace smmo {

class ObjectRuntime;

enum class ScalarKind : std::uint8_t {
    kFloat32,
    kInt32,
    kFloat64,
    kHandle,  // 64-bit packed ObjectHandle
};

constexpr unsigned scalar_width(ScalarKind kind) {
    return (kind == ScalarKind::kFloat32 || kind == ScalarKind::kInt32) ? 4u : 8u;
}

const char* scalar_kind_name(ScalarKind kind);

struct FieldSpec {
    std::string name;
    ScalarKind kind;
};

// Runs after a slot has been reserved, before the handle is returned.
using Constructor = std::function<void(ObjectRuntime&, ObjectHandle)>;

// Per-type metadata fixed at registry freeze.
struct TypeDescriptor {
    TypeId type_id = kTypeNone;
    std::string name;
    std::vector<FieldSpec> fields;
    std::vector<unsigned> field_widths;
    unsigned capacity = 0;                    // object slots per block, <= 64
    std::vector<std::size_t> column_offsets;  // into the block data segment

    std::uint64_t capacity_mask() const {
        return capacity == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << capacity) - 1);
    }
    std::size_t object_bytes() const;
    std::size_t field_index(std::string_view field_name) const;  // throws UsageError
};

// All object types are pre-declared here, then the registry is frozen before
// any heap is built over it. Type ids are dense in registration order.
class TypeRegistry {
public:
    TypeId register_type(std::string name, std::vector<FieldSpec> fields,
                         Constructor constructor = nullptr);

    // Computes every type's block layout; no further registration accepted.
    void freeze();
    bool frozen() const { return frozen_; }

    std::size_t num_types() const { return types_.size(); }
    std::size_t block_data_bytes() const;

    const TypeDescriptor& descriptor(TypeId t) const;
    TypeId find_type(std::string_view name) const;  // throws UsageError if unknown
    const Constructor& constructor(TypeId t) const;

private:
    void check_frozen() const;

    std::vector<TypeDescriptor> types_;
    std::vector<Constructor> constructors_;
    std::size_t block_data_bytes_ = 0;
    bool frozen_ = false;
};

}  // namespace smmo
