#include "tensorsmooth/alloc_accounting.hpp"

#include <atomic>
#include <cstdlib>
#include <new>

namespace tensorsmooth::alloc {
namespace {

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};
std::atomic<std::size_t> g_largest{0};
std::atomic<std::size_t> g_count{0};

constexpr std::size_t kHeader = alignof(std::max_align_t);

void update_max(std::atomic<std::size_t>& slot, std::size_t value) noexcept {
    std::size_t prev = slot.load(std::memory_order_relaxed);
    while (prev < value &&
           !slot.compare_exchange_weak(prev, value, std::memory_order_relaxed)) {
    }
}

void record_alloc(std::size_t size) noexcept {
    const std::size_t now = g_current.fetch_add(size, std::memory_order_relaxed) + size;
    update_max(g_peak, now);
    update_max(g_largest, size);
    g_count.fetch_add(1, std::memory_order_relaxed);
}

void record_free(std::size_t size) noexcept {
    g_current.fetch_sub(size, std::memory_order_relaxed);
}

// Layout: [size_t size | padding up to `offset`] [user block]
void* allocate(std::size_t size, std::size_t align) {
    const std::size_t offset = align > kHeader ? align : kHeader;
    void* base = nullptr;
    if (align > kHeader) {
        std::size_t total = size + offset;
        total = (total + align - 1) / align * align;
        base = std::aligned_alloc(align, total);
    } else {
        base = std::malloc(size + offset);
    }
    if (base == nullptr) throw std::bad_alloc();
    *static_cast<std::size_t*>(base) = size;
    record_alloc(size);
    return static_cast<char*>(base) + offset;
}

void deallocate(void* ptr, std::size_t align) noexcept {
    if (ptr == nullptr) return;
    const std::size_t offset = align > kHeader ? align : kHeader;
    void* base = static_cast<char*>(ptr) - offset;
    record_free(*static_cast<std::size_t*>(base));
    std::free(base);
}

}  // namespace


Snapshot snapshot() noexcept {
    return {g_current.load(), g_peak.load(), g_largest.load(), g_count.load()};
}

void reset_peak() noexcept {
    g_peak.store(g_current.load());
    g_largest.store(0);
}

Scope::Scope() noexcept : baseline_(g_current.load()) { reset_peak(); }

std::size_t Scope::peak_growth() const noexcept {
    const std::size_t peak = g_peak.load();
    return peak > baseline_ ? peak - baseline_ : 0;
}

std::size_t Scope::largest_allocation() const noexcept { return g_largest.load(); }

}  // namespace tensorsmooth::alloc

using tensorsmooth::alloc::allocate;
using tensorsmooth::alloc::deallocate;

void* operator new(std::size_t size) { return allocate(size, 0); }
void* operator new[](std::size_t size) { return allocate(size, 0); }
void* operator new(std::size_t size, std::align_val_t al) {
    return allocate(size, static_cast<std::size_t>(al));
}
void* operator new[](std::size_t size, std::align_val_t al) {
    return allocate(size, static_cast<std::size_t>(al));
}
void* operator new(std::size_t size, const std::nothrow_t&) noexcept {
    try {
        return allocate(size, 0);
    } catch (...) {
        return nullptr;
    }
}
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept {
    try {
        return allocate(size, 0);
    } catch (...) {
        return nullptr;
    }
}

void operator delete(void* p) noexcept { deallocate(p, 0); }
void operator delete[](void* p) noexcept { deallocate(p, 0); }
void operator delete(void* p, std::size_t) noexcept { deallocate(p, 0); }
void operator delete[](void* p, std::size_t) noexcept { deallocate(p, 0); }
void operator delete(void* p, std::align_val_t al) noexcept {
    deallocate(p, static_cast<std::size_t>(al));
}
void operator delete[](void* p, std::align_val_t al) noexcept {
    deallocate(p, static_cast<std::size_t>(al));
}
void operator delete(void* p, std::size_t, std::align_val_t al) noexcept {
    deallocate(p, static_cast<std::size_t>(al));
}
void operator delete[](void* p, std::size_t, std::align_val_t al) noexcept {
    deallocate(p, static_cast<std::size_t>(al));
}
void operator delete(void* p, const std::nothrow_t&) noexcept { deallocate(p, 0); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { deallocate(p, 0); }
