#pragma once

#include <cstddef>

// Heap accounting through replacement of the global operator new/delete.
//
// The replacement is compiled into the library and pulled into any binary
// that queries these counters.  All library containers that can grow with n
// or K are std::vector based, so every large allocation passes through here.
// Counters are process-wide.
namespace tensorsmooth::alloc {

struct Snapshot {
    std::size_t current_bytes = 0;
    std::size_t peak_bytes = 0;
    std::size_t largest_allocation = 0;
    std::size_t allocation_count = 0;
};

Snapshot snapshot() noexcept;

/// Reset peak and largest-allocation tracking to the current live size.
void reset_peak() noexcept;

/// RAII scope that measures peak growth over the live heap at construction.
class Scope {
public:
    Scope() noexcept;
    std::size_t peak_growth() const noexcept;
    std::size_t largest_allocation() const noexcept;

private:
    std::size_t baseline_;
};

}  // namespace tensorsmooth::alloc
