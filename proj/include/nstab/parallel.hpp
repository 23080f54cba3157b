#pragma once

// Chunked execution shared by every estimator. Work is cut into fixed-size
// chunks, chunk c always draws from substream c, and partial results are
// reduced in chunk order, so the serial and OpenMP paths agree bit-for-bit
// regardless of thread count.

#include <cstddef>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nstab {

enum class Exec { serial, parallel };

inline constexpr std::size_t kChunkSize = 4096;

inline std::size_t chunk_count(std::size_t total, std::size_t chunk = kChunkSize) {
  return (total + chunk - 1) / chunk;
}

/// Runs body(chunk_id, begin, end) for every chunk and returns the per-chunk
/// results in chunk order.
template <class Result, class Body>
std::vector<Result> map_chunks(std::size_t total, Exec exec, Body&& body,
                               std::size_t chunk = kChunkSize) {
  const std::size_t chunks = chunk_count(total, chunk);
  std::vector<Result> out(chunks);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(chunks); ++c) {
      const std::size_t begin = static_cast<std::size_t>(c) * chunk;
      const std::size_t end = begin + chunk < total ? begin + chunk : total;
      out[static_cast<std::size_t>(c)] = body(static_cast<std::size_t>(c), begin, end);
    }
  } else {
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t begin = c * chunk;
      const std::size_t end = begin + chunk < total ? begin + chunk : total;
      out[c] = body(c, begin, end);
    }
  }
  return out;
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace nstab
