// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <new>
#include <stdexcept>
#include <string>

namespace smmo {

// Heap exhaustion, surfaced after the allocator's bounded retry budget.
class OutOfMemoryError : public std::bad_alloc {
public:
    explicit OutOfMemoryError(std::string what) : what_(std::move(what)) {}
    const char* what() const noexcept override { return what_.c_str(); }

private:
    std::string what_;
};

// Caller bugs the runtime can detect: double free, type mismatch, bad field.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Rejected configuration: bad heap size, unknown type, post-freeze registration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace smmo
