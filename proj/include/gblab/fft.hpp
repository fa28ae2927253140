#pragma once

// Thin FFTW wrapper: in-place, unnormalized complex transforms with a
// process-wide plan cache. Planning is serialized; execution is reentrant.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace gblab::fft {

using cplx = std::complex<double>;

enum class Direction : int { Forward = FFTW_FORWARD, Backward = FFTW_BACKWARD };

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, Direction dir) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(n, static_cast<int>(dir));
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<cplx> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, static_cast<int>(dir),
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

}  // namespace detail

/// In-place DFT: X_m = sum_n x_n exp(sign * 2 pi i m n / N), no scaling.
inline void transform(std::span<cplx> data, Direction dir) {
  if (data.size() <= 1) return;
  fftw_plan plan = detail::PlanCache::instance().get(data.size(), dir);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

/// Smallest n >= target of the form 2^a 3^b 5^c.
inline std::size_t good_size(std::size_t target) {
  if (target <= 1) return 1;
  std::size_t best = 1;
  while (best < target) best *= 2;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
      std::size_t n = p35;
      while (n < target) n *= 2;
      if (n < best) best = n;
    }
  }
  return best;
}

}  // namespace gblab::fft
