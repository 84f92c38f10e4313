// SPDX-License-Identifier: Apache-2.0
#include "smmo/runtime.hpp"

#include "smmo/errors.hpp"

namespace smmo {

std::vector<ObjectHandle> ObjectRuntime::allocate_many(TypeId t, unsigned count) {
    if (count < 1 || count > 64) {
        throw UsageError("allocate_many count must be in [1, 64]");
    }
    std::vector<ObjectHandle> out;
    out.reserve(count);
    try {
        for (unsigned i = 0; i < count; ++i) {
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

namespace {

ScalarKind value_kind(const FieldValue& value) {
    switch (value.index()) {
        case 0: return ScalarKind::kFloat32;
        case 1: return ScalarKind::kInt32;
        case 2: return ScalarKind::kFloat64;
        default: return ScalarKind::kHandle;
    }
}

}  // namespace

FieldValue field_read(const ObjectRuntime& rt, ObjectHandle h, std::string_view field_name) {
    const TypeDescriptor& d = rt.registry().descriptor(h.type);
    const std::size_t i = d.field_index(field_name);
    switch (d.fields[i].kind) {
        case ScalarKind::kFloat32: return read_f32(rt, h, i);
        case ScalarKind::kInt32: return read_i32(rt, h, i);
        case ScalarKind::kFloat64: return read_f64(rt, h, i);
        case ScalarKind::kHandle: return read_ref(rt, h, i);
    }
    throw UsageError("corrupt field kind");
}

void field_write(ObjectRuntime& rt, ObjectHandle h, std::string_view field_name,
                 const FieldValue& value) {
    const TypeDescriptor& d = rt.registry().descriptor(h.type);
    const std::size_t i = d.field_index(field_name);
    const ScalarKind kind = d.fields[i].kind;
    if (kind != value_kind(value)) {
        throw UsageError("field '" + std::string(field_name) + "' is " +
                         scalar_kind_name(kind) + ", value is " +
                         scalar_kind_name(value_kind(value)));
    }
    switch (kind) {
        case ScalarKind::kFloat32: write_f32(rt, h, i, std::get<float>(value)); break;
        case ScalarKind::kInt32: write_i32(rt, h, i, std::get<std::int32_t>(value)); break;
        case ScalarKind::kFloat64: write_f64(rt, h, i, std::get<double>(value)); break;
        case ScalarKind::kHandle: write_ref(rt, h, i, std::get<ObjectHandle>(value)); break;
    }
}

}  // namespace smmo
