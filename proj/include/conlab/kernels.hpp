#pragma once

// Data-parallel building blocks. Every parallel kernel has a serial twin with
// the same result bit for bit: terms are evaluated (in any order) into a
// buffer and reduced by one serial pairwise sum, so thread count never leaks
// into the numbers.

#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <vector>

namespace conlab::kernels {

/// Below this many items the parallel kernels run on the calling thread.
inline constexpr std::size_t kParallelThreshold = 256;

/// Pairwise (cascade) summation, error O(eps log n).
inline double pairwise_sum(std::span<const double> v) {
  constexpr std::size_t kBlock = 16;
  if (v.size() <= kBlock) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

template <class Fn>
void map_serial(std::size_t n, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

/// Runs fn(i) for i in [0, n) on the OpenMP team when n >= min_parallel.
/// The first exception thrown by any item is rethrown on the caller.
template <class Fn>
void map_parallel(std::size_t n, Fn&& fn, std::size_t min_parallel = kParallelThreshold) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n >= min_parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

template <class Term>
double sum_serial(std::size_t n, Term&& term) {
  std::vector<double> buf(n);
  map_serial(n, [&](std::size_t i) { buf[i] = term(i); });
  return pairwise_sum(buf);
}

template <class Term>
double sum_parallel(std::size_t n, Term&& term) {
  std::vector<double> buf(n);
  map_parallel(n, [&](std::size_t i) { buf[i] = term(i); });
  return pairwise_sum(buf);
}

/// Number of threads an OpenMP parallel region would use right now.
int max_threads();

/// Sets the OpenMP team size for subsequent parallel regions.
void set_threads(int n);

}  // namespace conlab::kernels
