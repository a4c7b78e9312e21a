#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace latdiff {

/// Compensated (Neumaier) accumulator. Addition order is the caller's; the
/// result depends only on that order.
class NeumaierSum {
public:
  void add(double v) noexcept;
  double value() const noexcept { return sum_ + comp_; }
  void scale(double f) noexcept {
    sum_ *= f;
    comp_ *= f;
  }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MeanError {
  double mean = 0.0;
  double std_err = 0.0;
};

/// Mean and batch-means standard error. Batch b covers samples
/// [b*n/B, (b+1)*n/B); B = min(n, max_batches).
MeanError batch_means(std::span<const double> series, std::size_t max_batches = 64);

/// Default batch count used by every estimator in the library.
inline constexpr std::size_t kDefaultBatches = 64;

/// Integrated autocorrelation time in units of the series spacing, with
/// Sokal's automatic window (W >= c * tau). Constant series give 0.5.
double integrated_autocorrelation_time(std::span<const double> series, double window_factor = 6.0);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_err = 0.0;
  double slope_err = 0.0;
  double residual_rms = 0.0;   // unweighted RMS of y - fit
  double reduced_chi2 = 0.0;   // weighted; 0 when fewer than 3 points
  std::size_t n = 0;
};

/// Weighted least squares for y = a + b x. Empty weights means unit weights,
/// in which case parameter errors are scaled by the residual variance.
LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> weights = {});

/// Decimal with 17 significant digits; round-trips every finite double.
std::string format_double(double v);

/// FNV-1a 64-bit hash, used for output-file integrity manifests.
std::uint64_t fnv1a64(std::string_view bytes);

} // namespace latdiff
