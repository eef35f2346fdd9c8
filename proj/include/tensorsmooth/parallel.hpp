#pragma once

#include <cstddef>
#include <functional>

namespace tensorsmooth {

/// Process-wide worker count for the per-observation loops.  Defaults to 1.
/// Results are bit-reproducible for a fixed count; 1 is fully sequential.
int thread_count() noexcept;
void set_thread_count(int threads);

/// Splits [0, n) into at most thread_count() contiguous chunks and runs
/// fn(chunk_index, begin, end) for each, concurrently when more than one.
/// Returns the number of chunks used.
std::size_t parallel_chunks(std::size_t n,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

/// Number of chunks parallel_chunks would use for n items.
std::size_t chunk_count(std::size_t n) noexcept;

}  // namespace tensorsmooth
