#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace arratia {

/// Running mean / variance (Welford), mergeable in a fixed order.
struct Accumulator {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const Accumulator& other);
  double variance() const;  // unbiased; 0 for fewer than two samples
  double std_error() const;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double slope_ci_low = 0.0;   // 95%
  double slope_ci_high = 0.0;
  double rss = 0.0;            // residual sum of squares of the fitted (weighted) model
};

/// Ordinary least squares y = a + b x with a Student-t 95% interval on b
/// (zero-width interval when only two points are given).
LinearFit ols(std::span<const double> x, std::span<const double> y);

/// Weighted least squares with known standard errors of y (normal 95% interval).
LinearFit wls(std::span<const double> x, std::span<const double> y, std::span<const double> y_std_error);

/// Slope of log(estimate) against log(level). Uses the delta-method standard
/// errors se/estimate as known weights when every one is positive, OLS otherwise.
LinearFit loglog_fit(std::span<const double> levels, std::span<const double> estimates,
                     std::span<const double> std_errors);

double normal_quantile(double p);
double student_t_quantile(double p, double dof);
double chi_squared_quantile(double p, double dof);

/// Replicas are processed in fixed chunks of `kChunk` consecutive indices, each
/// reduced sequentially into its own accumulator; chunk results are merged in
/// index order. The result is therefore independent of `workers`.
inline constexpr std::size_t kChunk = 256;

template <class Acc, class Body>
Acc chunked_reduce(std::size_t count, unsigned workers, const Acc& init, Body&& body) {
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  std::vector<Acc> partial(chunks, init);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t end = std::min(count, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) body(i, partial[c]);
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(chunks, 1))));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < chunks;) {
          try {
            run_chunk(c);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  Acc total = init;
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace arratia
