#pragma once

// Diffraction of the lattice gas: the Bragg comb (weight 1/4 at every
// k in Z^d when <s> = 0) plus the absolutely continuous density
//
//     g(k) = 1/4 sum_x eta(x) cos(2 pi <k, x>),
//
// and the finite-volume structure factor estimated directly from samples.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latdiff/correlation.hpp"
#include "latdiff/numeric.hpp"

namespace latdiff {

class SampleSet;

struct DensityTerm {
  Displacement x;     // half-space representative
  double coefficient; // 1/4 * multiplicity * torus weight * eta(x)
  double error = 0.0; // same factor times std_err(x)
};

struct DiffractionResult {
  int dimension = 1;
  double bragg_weight = 0.25;
  std::string bragg_note = "exact 1/4 comb (zero magnetisation regime)";
  int grid = 0;               // M points per axis on [0, 1)^d
  std::vector<double> values; // M^d values, row-major, k_i = m_i / M
  double truncation_error = 0.0;
  bool truncation_known = false;
  std::vector<int> window;
  bool ferromagnetic_source = true;
  std::vector<DensityTerm> terms;

  /// Off-grid evaluation of the cosine series (any real k).
  double evaluate(std::span<const double> k) const;
  std::vector<double> grid_point(std::size_t index) const;
};

struct DensityOptions {
  /// Points per axis; 0 selects 256 for d <= 2 and 64 for d = 3.
  int grid = 0;
  /// Defaults to "every eta(x) >= -3 std_err".
  std::optional<bool> ferromagnetic;
  unsigned threads = 1;
};

/// Evaluates g on the grid. Displacements with |x_i| = L_i / 2 on a torus
/// table carry weight 1/2 per such axis so each torus displacement counts
/// once. truncation_error = 1/4 * (smallest tail certificate among `fits`)
/// plus a floating-point allowance; unknown (NaN, flagged) without one.
DiffractionResult density_series(const CorrelationTable& spin_table, std::span<const DecayFit> fits = {},
                                 const DensityOptions& options = {});

/// Bragg weight stays 1/4 when |mean_spin| < 3 err; otherwise it becomes
/// the squared mean density with a caveat.
void apply_magnetisation(DiffractionResult& result, double mean_spin, double mean_spin_err);

enum class CheckStatus { pass, fail, warn, degenerate };
std::string to_string(CheckStatus s);

struct MaximaReport {
  CheckStatus status = CheckStatus::fail;
  std::vector<double> argmax;
  double max_value = 0.0;
  double margin_to_next = 0.0; // g(0) - max_{k != 0} g(k)
  double margin_to_min = 0.0;  // g(0) - min_k g(k)
  std::string message;
};
/// With sampled coefficients, a grid maximum away from k = 0 whose excess
/// over g(0) stays below 3 sum_x err(x) (1 - cos 2 pi <k, x>) is attributed
/// to noise and passes; exact coefficients get no such allowance.
MaximaReport check_bragg_maxima(const DiffractionResult& result);

struct PeriodicityReport {
  std::size_t points = 0;
  double max_shift_deviation = 0.0; // |g(k + e_i) - g(k)|
  double max_even_deviation = 0.0;  // |g(-k) - g(k)|
  bool grid_even = false;           // g(m) == g(M - m) bit for bit
  bool pass = false;
};
PeriodicityReport periodicity_check(const DiffractionResult& result, std::size_t points = 100,
                                    std::uint64_t seed = 1, double tol = 1e-12);

struct ParsevalReport {
  double grid_mean = 0.0;
  double expected = 0.0; // 1/4 eta(0)
  double deviation = 0.0;
  bool pass = false;
};
ParsevalReport parseval_check(const DiffractionResult& result, double tol = 1e-10);

struct PositivityReport {
  double min_value = 0.0;
  CheckStatus status = CheckStatus::fail; // warn when no certificate
};
PositivityReport positivity_check(const DiffractionResult& result);

enum class Smoothness { smooth, continuous, uncertified };
std::string to_string(Smoothness s);

struct SmoothnessReport {
  Smoothness smoothness = Smoothness::uncertified;
  /// (derivative order s, bound on 1/4 sum_{|x|_inf > R} (2 pi |x|)^s |eta(x)|)
  std::vector<std::pair<int, double>> derivative_tails;
  std::string note;
};
/// Derivative orders up to max_order are reported for exponential decay;
/// algebraic decay certifies the orders s < p - d.
SmoothnessReport smoothness_indicator(const CorrelationTable& table, const DecayFit& fit, int max_order = 4);

struct StructureFactorEstimate {
  std::vector<int> sides;
  std::vector<double> intensity; // mean I(k) on k_i = m_i / L_i, row-major
  std::vector<double> std_err;
  std::uint64_t n_samples = 0;
  MeanError bragg_raw;    // mean of I(0)/N = nbar^2 per sample
  MeanError bragg_weight; // (mean nbar)^2, delta-method error
  std::vector<double> k(std::size_t index) const;
};

/// I(k) = |sum_x n_x exp(-2 pi i <k, x>)|^2 / N per sample, averaged with
/// batch-means errors.
StructureFactorEstimate empirical_structure_factor(const SampleSet& samples,
                                                   std::size_t batches = kDefaultBatches);

struct RouteComparison {
  std::size_t points = 0;
  double worst_ratio = 0.0; // max |I - g| / (3 err + truncation)
  bool consistent = false;
};
/// Compares the structure factor with the series at every dual-grid k not in
/// Z^d: |I(k) - g(k)| <= 3 err + truncation_error.
RouteComparison compare_routes(const StructureFactorEstimate& sf, const DiffractionResult& result);

void write_spectrum(std::ostream& os, const DiffractionResult& result);
void write_structure_factor(std::ostream& os, const StructureFactorEstimate& sf);

} // namespace latdiff
