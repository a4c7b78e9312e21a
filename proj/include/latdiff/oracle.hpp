#pragma once

// Exact results on small systems: full enumeration of the torus Gibbs
// measure and the 1D transfer-matrix correlations.

#include <cstddef>
#include <optional>
#include <vector>

#include "latdiff/correlation.hpp"
#include "latdiff/model.hpp"

namespace latdiff {

inline constexpr std::size_t kEnumerationDefaultCap = 20;
inline constexpr std::size_t kEnumerationHardCap = 24;

struct ExactResult {
  CorrelationTable correlations; // spin, source exact, zero errors
  double log_partition = 0.0;    // log Z
  double mean_spin = 0.0;        // <s_0>, zero by spin-flip symmetry
  /// p(state) indexed by SpinConfiguration::state_index(); present on request.
  std::optional<std::vector<double>> state_probabilities;
};

struct EnumerationOptions {
  std::size_t max_sites = kEnumerationDefaultCap; // at most kEnumerationHardCap
  bool keep_probabilities = false;
  /// Per-axis table window; default floor(L_i / 2).
  std::optional<std::vector<int>> window;
};

/// Sums exp(-beta E) over all 2^N states in Gray-code order with O(|J|)
/// incremental energy updates, log-sum-exp rescaling and compensated sums.
ExactResult enumerate_exact(const LatticeTorus& torus, const CouplingMap& J, double beta,
                            const EnumerationOptions& options = {});

/// eta(x) = (t^x + t^{L-x}) / (1 + t^L), t = tanh(beta J), on the L-site ring;
/// table window floor(L/2).
CorrelationTable transfer_matrix_1d_torus(double betaJ, int L);

/// eta(x) = tanh(beta J)^|x| for |x| <= x_max on the infinite chain.
CorrelationTable transfer_matrix_1d_infinite(double betaJ, int x_max);

} // namespace latdiff
