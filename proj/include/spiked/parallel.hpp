#pragma once

// Block-parallel map with results returned in block order, plus mean/stderr
// accumulators that merge in a fixed order. Together they make Monte Carlo
// output independent of the number of worker threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace spiked {

/// Worker count: explicit value if given, else SPIKED_WORKERS, else the
/// hardware concurrency (at least 1).
inline int resolve_workers(std::optional<int> requested = std::nullopt) {
  if (requested && *requested > 0) return *requested;
  if (const char* env = std::getenv("SPIKED_WORKERS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates fn(b) for b in [0, blocks) on `workers` threads; the result
/// vector is indexed by block, whatever thread computed it.
template <class Fn>
auto parallel_blocks(std::size_t blocks, int workers, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using T = decltype(fn(std::size_t{}));
  std::vector<std::optional<T>> slots(blocks);
  const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(blocks)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        slots[b].emplace(fn(b));
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(blocks);
        return;
      }
    }
  };
  if (nthreads == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<T> out;
  out.reserve(blocks);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Sample mean and standard error.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long long samples = 0;

  /// |mean - target| in units of the standard error.
  [[nodiscard]] double z_score(double target) const {
    if (std_error == 0.0) return mean == target ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(mean - target) / std_error;
  }

  /// |mean - target| <= k stderr, with a 1e-12 relative floor so that
  /// zero-variance estimators (e.g. exact antithetic pairs) compare sanely.
  [[nodiscard]] bool within(double target, double k = 3.0) const {
    return std::abs(mean - target) <= k * std_error + 1e-12 * std::max(1.0, std::abs(target));
  }
};

/// Running mean / second central moment (Welford), mergeable (Chan et al.).
struct Moments {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }

  void merge(const Moments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double nn = static_cast<double>(n + o.n);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.n) / nn;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / nn;
    n += o.n;
  }

  [[nodiscard]] double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }

  [[nodiscard]] McEstimate estimate() const {
    return {mean, n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0, n};
  }
};

/// Pairwise merge of per-block moments in block order.
inline Moments merge_pairwise(const std::vector<Moments>& parts, std::size_t lo, std::size_t hi) {
  if (hi <= lo) return {};
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  Moments a = merge_pairwise(parts, lo, mid);
  a.merge(merge_pairwise(parts, mid, hi));
  return a;
}

inline Moments merge_pairwise(const std::vector<Moments>& parts) { return merge_pairwise(parts, 0, parts.size()); }

/// Fixed block size used by the Monte Carlo drivers; block b covers sample
/// indices [b * kBlockSize, (b + 1) * kBlockSize).
inline constexpr long long kBlockSize = 4096;

inline std::size_t block_count(long long samples) {
  return static_cast<std::size_t>((samples + kBlockSize - 1) / kBlockSize);
}

}  // namespace spiked
