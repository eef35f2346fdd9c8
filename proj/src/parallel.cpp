#include "tensorsmooth/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#include "tensorsmooth/errors.hpp"

namespace tensorsmooth {
namespace {
std::atomic<int> g_threads{1};

// below this many items per chunk thread start-up dominates
constexpr std::size_t kMinChunk = 512;
}  // namespace

int thread_count() noexcept { return g_threads.load(); }

void set_thread_count(int threads) {
    if (threads < 1) throw InvalidArgument("thread count must be >= 1");
    g_threads.store(threads);
}

std::size_t chunk_count(std::size_t n) noexcept {
    const auto t = static_cast<std::size_t>(thread_count());
    if (t <= 1 || n < 2 * kMinChunk) return 1;
    return std::min(t, n / kMinChunk);
}

std::size_t parallel_chunks(std::size_t n,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t chunks = chunk_count(n);
    if (chunks == 1) {
        fn(0, 0, n);
        return 1;
    }
    std::vector<std::exception_ptr> errors(chunks);
    {
        std::vector<std::jthread> workers;
        workers.reserve(chunks - 1);
        for (std::size_t c = 1; c < chunks; ++c) {
            workers.emplace_back([&, c] {
                try {
                    fn(c, n * c / chunks, n * (c + 1) / chunks);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
        try {
            fn(0, 0, n / chunks);
        } catch (...) {
            errors[0] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return chunks;
}

}  // namespace tensorsmooth
