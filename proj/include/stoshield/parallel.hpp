#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace stoshield {

namespace detail {
inline std::atomic<std::size_t>& thread_override() {
  static std::atomic<std::size_t> value{0};
  return value;
}
}  // namespace detail

/// Thread count used when a caller passes 0: the --threads override, else
/// STOSHIELD_THREADS, else the hardware concurrency.
inline std::size_t default_threads() {
  if (auto v = detail::thread_override().load(); v > 0) return v;
  if (const char* env = std::getenv("STOSHIELD_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_default_threads(std::size_t n) { detail::thread_override().store(n); }

/// out[i] = f(i) for i in [0, count). Results are ordered by index whatever
/// the scheduling; the lowest-index exception is rethrown.
template <typename F>
auto parallel_map(std::size_t count, F&& f, std::size_t threads = 0) {
  using R = decltype(f(std::size_t{0}));
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  const std::size_t workers = std::min(count, threads ? threads : default_threads());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace stoshield
