// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstring>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "smmo/executor.hpp"
#include "smmo/handle.hpp"
#include "smmo/types.hpp"

namespace smmo {

using ObjectVisitor = std::function<void(ObjectHandle)>;

// Common surface of the main allocator and the two baselines: allocate and
// release objects of pre-declared types, read and write columnar fields
// through handles, and run a method over every live object of a type.
class ObjectRuntime {
public:
    virtual ~ObjectRuntime() = default;

    virtual const TypeRegistry& registry() const = 0;

    virtual ObjectHandle allocate(TypeId t) = 0;
    virtual std::vector<ObjectHandle> allocate_many(TypeId t, unsigned count);
    virtual void deallocate(ObjectHandle h) = 0;

    // Quiescent: number of live objects of the type.
    virtual std::size_t live_count(TypeId t) const = 0;

    virtual exec::DoAllReport parallel_do_all(TypeId t, const ObjectVisitor& visit) = 0;

    // Sequential snapshot walk in (block, slot) order. Usable inside a
    // do-all method to enumerate peers.
    virtual void for_each_live(TypeId t, const ObjectVisitor& visit) const = 0;

    virtual std::byte* field_ptr(ObjectHandle h, std::size_t field_index) = 0;
    const std::byte* field_ptr(ObjectHandle h, std::size_t field_index) const {
        return const_cast<ObjectRuntime*>(this)->field_ptr(h, field_index);
    }

    // 1 - live / (occupied storage units * unit capacity); 0 when nothing
    // is allocated. For the block allocator the unit is a block; for the
    // flat baselines it is a 64-slot-aligned group.
    virtual double fragmentation(TypeId t) const = 0;

    virtual std::map<std::string, std::uint64_t> stats() const = 0;

    struct Timings {
        std::chrono::nanoseconds plan{0};
        std::chrono::nanoseconds exec{0};
    };
    Timings timings() const { return timings_; }
    void reset_timings() { timings_ = {}; }

protected:
    void record(const exec::DoAllReport& report) {
        timings_.plan += report.plan_time;
        timings_.exec += report.exec_time;
    }

    // Runs the registered constructor, if any, on a fresh object.
    void construct(TypeId t, ObjectHandle h) {
        const Constructor& ctor = registry().constructor(t);
        if (ctor) {
            ctor(*this, h);
        }
    }

private:
    Timings timings_;
};

// Typed field access. Index-based accessors are the fast path used by the
// apps; callers resolve indices once via TypeDescriptor::field_index.

inline float read_f32(const ObjectRuntime& rt, ObjectHandle h, std::size_t field) {
    float v;
    std::memcpy(&v, rt.field_ptr(h, field), sizeof v);
    return v;
}
inline void write_f32(ObjectRuntime& rt, ObjectHandle h, std::size_t field, float v) {
    std::memcpy(rt.field_ptr(h, field), &v, sizeof v);
}
inline std::int32_t read_i32(const ObjectRuntime& rt, ObjectHandle h, std::size_t field) {
    std::int32_t v;
    std::memcpy(&v, rt.field_ptr(h, field), sizeof v);
    return v;
}
inline void write_i32(ObjectRuntime& rt, ObjectHandle h, std::size_t field, std::int32_t v) {
    std::memcpy(rt.field_ptr(h, field), &v, sizeof v);
}
inline double read_f64(const ObjectRuntime& rt, ObjectHandle h, std::size_t field) {
    double v;
    std::memcpy(&v, rt.field_ptr(h, field), sizeof v);
    return v;
}
inline void write_f64(ObjectRuntime& rt, ObjectHandle h, std::size_t field, double v) {
    std::memcpy(rt.field_ptr(h, field), &v, sizeof v);
}
inline std::uint64_t read_u64(const ObjectRuntime& rt, ObjectHandle h, std::size_t field) {
    std::uint64_t v;
    std::memcpy(&v, rt.field_ptr(h, field), sizeof v);
    return v;
}
inline void write_u64(ObjectRuntime& rt, ObjectHandle h, std::size_t field, std::uint64_t v) {
    std::memcpy(rt.field_ptr(h, field), &v, sizeof v);
}
inline ObjectHandle read_ref(const ObjectRuntime& rt, ObjectHandle h, std::size_t field) {
    return ObjectHandle::unpack(read_u64(rt, h, field));
}
inline void write_ref(ObjectRuntime& rt, ObjectHandle h, std::size_t field, ObjectHandle v) {
    write_u64(rt, h, field, v.pack());
}

// Name-validated access: looks the field up by name and checks the scalar
// kind. Convenient for tests and introspection; the apps use the indexed
// accessors above.
using FieldValue = std::variant<float, std::int32_t, double, ObjectHandle>;

FieldValue field_read(const ObjectRuntime& rt, ObjectHandle h, std::string_view field_name);
void field_write(ObjectRuntime& rt, ObjectHandle h, std::string_view field_name,
                 const FieldValue& value);

}  // namespace smmo
