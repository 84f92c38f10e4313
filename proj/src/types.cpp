// SPDX-License-Identifier: Apache-2.0
#include "smmo/types.hpp"

#include <numeric>

#include "smmo/errors.hpp"

namespace smmo {

const char* scalar_kind_name(ScalarKind kind) {
    switch (kind) {
        case ScalarKind::kFloat32: return "f32";
        case ScalarKind::kInt32: return "i32";
        case ScalarKind::kFloat64: return "f64";
        case ScalarKind::kHandle: return "handle";
    }
    return "?";
}

std::size_t TypeDescriptor::object_bytes() const {
    return std::accumulate(field_widths.begin(), field_widths.end(), std::size_t{0});
}

std::size_t TypeDescriptor::field_index(std::string_view field_name) const {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].name == field_name) {
            return i;
        }
    }
    throw UsageError("unknown field '" + std::string(field_name) + "' on type " + name);
}

TypeId TypeRegistry::register_type(std::string name, std::vector<FieldSpec> fields,
                                   Constructor constructor) {
    if (frozen_) {
        throw ConfigError("registry is frozen; register all types before freeze()");
    }
    if (fields.empty()) {
        throw ConfigError("type '" + name + "' has no fields");
    }
    for (const TypeDescriptor& d : types_) {
        if (d.name == name) {
            throw ConfigError("duplicate type name '" + name + "'");
        }
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
        for (std::size_t j = i + 1; j < fields.size(); ++j) {
            if (fields[i].name == fields[j].name) {
                throw ConfigError("duplicate field name '" + fields[i].name + "' on type '" +
                                  name + "'");
            }
        }
    }
    if (types_.size() >= kTypeNone) {
        throw ConfigError("too many types");
    }

    TypeDescriptor d;
    d.type_id = TypeId(types_.size());
    d.name = std::move(name);
    d.field_widths.reserve(fields.size());
    for (const FieldSpec& f : fields) {
        d.field_widths.push_back(scalar_width(f.kind));
    }
    d.fields = std::move(fields);
    types_.push_back(std::move(d));
    constructors_.push_back(std::move(constructor));
    return types_.back().type_id;
}

void TypeRegistry::freeze() {
    if (frozen_) {
        return;
    }
    std::vector<std::vector<unsigned>> widths;
    widths.reserve(types_.size());
    for (const TypeDescriptor& d : types_) {
        widths.push_back(d.field_widths);
    }
    const HeapLayout layout = compute_layout(widths);
    block_data_bytes_ = layout.data_segment_bytes;
    for (std::size_t t = 0; t < types_.size(); ++t) {
        types_[t].capacity = layout.types[t].capacity;
        types_[t].column_offsets = layout.types[t].column_offsets;
    }
    frozen_ = true;
}

void TypeRegistry::check_frozen() const {
    if (!frozen_) {
        throw ConfigError("registry must be frozen first");
    }
}

std::size_t TypeRegistry::block_data_bytes() const {
    check_frozen();
    return block_data_bytes_;
}

const TypeDescriptor& TypeRegistry::descriptor(TypeId t) const {
    check_frozen();
    if (t >= types_.size()) {
        throw UsageError("unknown type id " + std::to_string(t));
    }
    return types_[t];
}

TypeId TypeRegistry::find_type(std::string_view name) const {
    for (const TypeDescriptor& d : types_) {
        if (d.name == name) {
            return d.type_id;
        }
    }
    throw UsageError("unknown type '" + std::string(name) + "'");
}

const Constructor& TypeRegistry::constructor(TypeId t) const {
    check_frozen();
    if (t >= constructors_.size()) {
        throw UsageError("unknown type id " + std::to_string(t));
    }
    return constructors_[t];
}

}  // namespace smmo
