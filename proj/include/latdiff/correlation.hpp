#pragma once

// Two-point correlation tables, decay-law fits and the lattice summability
// bounds used as truncation certificates.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latdiff/model.hpp"

namespace latdiff {

class SampleSet;

enum class TableSource { mcmc, exact };
enum class Quantity { spin, density };

std::string to_string(TableSource s);
std::string to_string(Quantity q);

/// Correlations over the box |x_i| <= window_i, stored on the half-space
/// {x = 0} U {first nonzero component > 0}. Reads of -x return the value of x.
class CorrelationTable {
public:
  CorrelationTable(std::vector<int> window, TableSource source, Quantity quantity = Quantity::spin);

  int dimension() const noexcept { return static_cast<int>(window_.size()); }
  const std::vector<int>& window() const noexcept { return window_; }
  /// Smallest per-axis window; the largest complete max-norm shell.
  int radius() const;
  TableSource source() const noexcept { return source_; }
  Quantity quantity() const noexcept { return quantity_; }

  /// Canonical half-space displacements in lexicographic order.
  const std::vector<Displacement>& displacements() const noexcept { return half_; }

  bool contains(const Displacement& x) const;
  double eta(const Displacement& x) const;
  double std_err(const Displacement& x) const;
  /// Sets x and, implicitly, -x.
  void set(const Displacement& x, double value, double err = 0.0);

  /// Side lengths of the torus the table was measured on; empty for an
  /// infinite lattice.
  std::vector<int> torus_sides;
  double beta = std::numeric_limits<double>::quiet_NaN();

  bool operator==(const CorrelationTable&) const = default;

private:
  std::size_t slot(const Displacement& x) const;

  std::vector<int> window_;
  TableSource source_;
  Quantity quantity_;
  std::vector<Displacement> half_;
  std::vector<std::int64_t> box_to_slot_; // -1 off the half-space
  std::vector<double> values_;
  std::vector<double> errors_;
};

/// Translation- and sample-averaged s_y s_{y+x}; batch-means errors.
CorrelationTable estimate_correlations(const SampleSet& samples, const std::vector<int>& window,
                                       std::size_t batches = 64);

/// <n_0 n_x> = (eta(x) + 1) / 4, errors scaled by 1/4.
CorrelationTable spin_to_density(const CorrelationTable& spin);
/// Inverse of spin_to_density.
CorrelationTable density_to_spin(const CorrelationTable& density);

enum class DecayLaw { exponential, algebraic, oz };
std::string to_string(DecayLaw law);

struct FitWindow {
  double r_min = 2.0;
  /// Upper Euclidean radius; unset means the window edge.
  std::optional<double> r_max;
};

struct DecayFit {
  DecayLaw law = DecayLaw::exponential;
  int dimension = 1;
  double C = 0.0;        // prefactor (Phi for the OZ law)
  double rate = 0.0;     // epsilon, p, or xi
  double rate_err = 0.0;
  Displacement direction; // OZ only
  double r_min = 0.0;
  double r_max = 0.0;
  std::size_t n_points = 0;
  double residual_rms = 0.0; // in log space
  double reduced_chi2 = 0.0; // 0 for unweighted fits
  bool weighted = false;
  bool ok = false;   // rate positive and finite
  bool poor = false; // residuals inconsistent with the law
  std::string message;
};

/// Thrown when fewer usable points than the law needs survive the window and
/// the noise floor |eta| > 10 std_err.
class InsufficientSignal : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Log-linear fit of |eta(x)| ~ C exp(-eps |x|) over all table displacements
/// with r_min <= |x| <= r_max.
DecayFit fit_exponential(const CorrelationTable& table, const FitWindow& window = {});
/// Fit of |eta(x)| ~ C |x|^-p; x = 0 is never used.
DecayFit fit_algebraic(const CorrelationTable& table, const FitWindow& window = {});
/// Fit of eta(m u) |m u|^{(d-1)/2} ~ Phi exp(-xi |m u|) along the lattice
/// direction u; needs three usable points.
DecayFit fit_oz(const CorrelationTable& table, const Displacement& direction,
                const FitWindow& window = {});

/// Number of x in Z^d with max-norm exactly n: (2n+1)^d - (2n-1)^d, 1 at n = 0.
double shell_count(int d, int n);

/// Upper bound on sum_{n > R} shell_count(d, n) n^a exp(-eps n). Requires
/// eps > 0, or eps == 0 and a < -d.
double shell_tail(int d, int R, double a, double eps);

/// C * coth(eps / (2 sqrt d))^d >= C * sum_{x in Z^d} exp(-eps |x|).
double coth_bound(double eps, int d, double C = 1.0);

/// 1 + C * (sum_{n=1}^{P} shell_count(d, n) n^-p + integral tail), an upper
/// bound on 1 + C * sum_{x != 0} |x|^-p. Throws PreconditionError for p <= d.
double zeta_bound(double p, int d, double C = 1.0, int partial_terms = 10000);

/// Bound on sum_{|x|_inf > R} |eta(x)| implied by a successful fit, or
/// nullopt if the fit cannot certify a tail (failed, poor, or p <= d).
std::optional<double> tail_certificate(const DecayFit& fit, int R);

/// Partial sums S(n) = sum_{|x|_inf <= n} |eta(x)| over the full box.
struct SummabilityProfile {
  std::vector<double> partial_sums; // n = 0..radius
  std::vector<double> increments;   // S(n) - S(n-1), n = 1..radius
};
SummabilityProfile summability_profile(const CorrelationTable& table);

// Table file: tab-separated columns x1..xd, eta, std_err with `#` headers
// recording kind, convention, quantity, dimension, window, torus, beta, source.
void write_table(std::ostream& os, const CorrelationTable& table);
CorrelationTable read_table(std::istream& is);

void write_fit(std::ostream& os, const DecayFit& fit);

} // namespace latdiff
