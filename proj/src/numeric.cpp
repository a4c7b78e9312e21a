#include "latdiff/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace latdiff {

void NeumaierSum::add(double v) noexcept {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v))
    comp_ += (sum_ - t) + v;
  else
    comp_ += (v - t) + sum_;
  sum_ = t;
}

MeanError batch_means(std::span<const double> series, std::size_t max_batches) {
  const std::size_t n = series.size();
  if (n == 0)
    throw std::invalid_argument("batch_means: empty series");
  NeumaierSum total;
  for (double v : series)
    total.add(v);
  MeanError out;
  out.mean = total.value() / static_cast<double>(n);
  const std::size_t batches = std::min(n, std::max<std::size_t>(max_batches, 2));
  if (batches < 2)
    return out;

  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = b * n / batches;
    const std::size_t hi = (b + 1) * n / batches;
    NeumaierSum s;
    for (std::size_t i = lo; i < hi; ++i)
      s.add(series[i]);
    means[b] = s.value() / static_cast<double>(hi - lo);
  }
  NeumaierSum mb;
  for (double m : means)
    mb.add(m);
  const double grand = mb.value() / static_cast<double>(batches);
  NeumaierSum ss;
  for (double m : means)
    ss.add((m - grand) * (m - grand));
  const double var = ss.value() / static_cast<double>(batches - 1);
  out.std_err = std::sqrt(var / static_cast<double>(batches));
  return out;
}

double integrated_autocorrelation_time(std::span<const double> series, double window_factor) {
  const std::size_t n = series.size();
  if (n < 2)
    return 0.5;
  NeumaierSum s;
  for (double v : series)
    s.add(v);
  const double mean = s.value() / static_cast<double>(n);
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i)
    centred[i] = series[i] - mean;

  auto autocov = [&](std::size_t lag) {
    NeumaierSum acc;
    for (std::size_t i = 0; i + lag < n; ++i)
      acc.add(centred[i] * centred[i + lag]);
    return acc.value() / static_cast<double>(n - lag);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0))
    return 0.5;

  double tau = 0.5;
  for (std::size_t w = 1; w < n / 2; ++w) {
    tau += autocov(w) / c0;
    if (static_cast<double>(w) >= window_factor * tau)
      break;
  }
  return std::max(tau, 0.5);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> weights) {
  if (x.size() != y.size() || (!weights.empty() && weights.size() != x.size()))
    throw std::invalid_argument("fit_line: size mismatch");
  const std::size_t n = x.size();
  if (n < 2)
    throw std::invalid_argument("fit_line: need at least two points");
  const bool weighted = !weights.empty();

  NeumaierSum sw, sx, sy, sxx, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? weights[i] : 1.0;
    sw.add(w);
    sx.add(w * x[i]);
    sy.add(w * y[i]);
  }
  // centred sums for conditioning
  const double xbar = sx.value() / sw.value();
  const double ybar = sy.value() / sw.value();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? weights[i] : 1.0;
    const double dx = x[i] - xbar;
    sxx.add(w * dx * dx);
    sxy.add(w * dx * (y[i] - ybar));
  }
  if (!(sxx.value() > 0.0))
    throw std::invalid_argument("fit_line: degenerate abscissae");

  LineFit f;
  f.n = n;
  f.slope = sxy.value() / sxx.value();
  f.intercept = ybar - f.slope * xbar;

  NeumaierSum rss, chi2;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    rss.add(r * r);
    chi2.add((weighted ? weights[i] : 1.0) * r * r);
  }
  f.residual_rms = std::sqrt(rss.value() / static_cast<double>(n));
  const double dof = static_cast<double>(n) - 2.0;
  f.reduced_chi2 = dof > 0 ? chi2.value() / dof : 0.0;

  // var(slope) = 1/Sxx, var(intercept) = 1/Sw + xbar^2/Sxx (weighted, known sigma)
  double scale = 1.0;
  if (!weighted)
    scale = dof > 0 ? chi2.value() / dof : std::numeric_limits<double>::quiet_NaN();
  else if (f.reduced_chi2 > 1.0)
    scale = f.reduced_chi2;
  f.slope_err = std::sqrt(scale / sxx.value());
  f.intercept_err = std::sqrt(scale * (1.0 / sw.value() + xbar * xbar / sxx.value()));
  return f;
}

std::string format_double(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace latdiff
