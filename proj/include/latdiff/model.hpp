#pragma once

// Lattice-gas model: pair couplings on Z^d, periodic tori, spin
// configurations and the analytic conditions on the potential.
//
// Energy convention (used everywhere in the library and tagged in every output
// file as `unordered-pair`):
//
//     E(s) = -1/2 * sum_x sum_{r != 0} J(r) s_x s_{x+r}
//
// i.e. each unordered bond {x, x+r} contributes -J(r) s_x s_{x+r} once, and the
// Gibbs weight is exp(-beta E). With this convention the infinite 1D chain has
// <s_0 s_x> = tanh(beta J)^|x|.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace latdiff {

inline constexpr const char* kConventionTag = "unordered-pair";

/// Violated precondition or admissibility rule (bad sizes, torus too small,
/// enumeration cap exceeded, ...).
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

using Displacement = std::vector<int>;

double euclidean_norm(const Displacement& r);
int max_norm(const Displacement& r);

/// Finite-support symmetric pair potential on Z^d.
///
/// Only one of r / -r needs to be supplied; the map stores both. Supplying both
/// with different values is rejected. J(0) and zero-valued entries are dropped.
class CouplingMap {
public:
  struct Entry {
    Displacement r;
    double value = 0.0;
    bool operator==(const Entry&) const = default;
  };

  explicit CouplingMap(int dimension, std::span<const Entry> entries = {});

  int dimension() const noexcept { return dimension_; }
  /// Every stored displacement (both signs), lexicographically ordered.
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  double at(const Displacement& r) const;
  /// Largest Euclidean norm carrying a nonzero coupling (0 if empty).
  double range() const noexcept { return range_; }
  bool ferromagnetic() const noexcept { return ferromagnetic_; }
  bool empty() const noexcept { return entries_.empty(); }

  bool operator==(const CouplingMap&) const = default;

private:
  int dimension_;
  std::vector<Entry> entries_;
  double range_ = 0.0;
  bool ferromagnetic_ = true;
};

/// J(r) = value for every unit vector +-e_i.
CouplingMap nearest_neighbour(int dimension, double value);

nlohmann::json to_json(const CouplingMap& J);
CouplingMap coupling_from_json(const nlohmann::json& doc);

class LatticeTorus {
public:
  explicit LatticeTorus(std::vector<int> sides);

  int dimension() const noexcept { return static_cast<int>(sides_.size()); }
  const std::vector<int>& sides() const noexcept { return sides_; }
  std::size_t sites() const noexcept { return sites_; }

  /// Row-major: the last axis varies fastest.
  std::size_t index(const std::vector<int>& coords) const;
  std::vector<int> coords(std::size_t site) const;
  /// Site reached from `site` by displacement r, with periodic wrap.
  std::size_t shift(std::size_t site, const Displacement& r) const;

  bool operator==(const LatticeTorus&) const = default;

private:
  std::vector<int> sides_;
  std::size_t sites_;
};

/// Throws PreconditionError unless dimensions agree and every side exceeds
/// twice the coupling range (so r and -r never reach the same neighbour).
void check_admissible(const LatticeTorus& torus, const CouplingMap& J);

class SpinConfiguration {
public:
  /// All spins +1.
  explicit SpinConfiguration(LatticeTorus torus);
  SpinConfiguration(LatticeTorus torus, std::vector<std::int8_t> spins);

  const LatticeTorus& torus() const noexcept { return torus_; }
  std::span<const std::int8_t> spins() const noexcept { return spins_; }
  std::span<std::int8_t> spins() noexcept { return spins_; }
  std::size_t size() const noexcept { return spins_.size(); }

  int spin(std::size_t site) const { return spins_.at(site); }
  /// Lattice-gas occupation n = (s + 1) / 2.
  int occupation(std::size_t site) const { return (spins_.at(site) + 1) / 2; }
  void flip(std::size_t site) { spins_.at(site) = static_cast<std::int8_t>(-spins_.at(site)); }

  /// Bitmask with bit j set iff spin j is +1. Requires at most 64 sites.
  std::uint64_t state_index() const;

  bool operator==(const SpinConfiguration&) const = default;

private:
  LatticeTorus torus_;
  std::vector<std::int8_t> spins_;
};

/// Precomputed (neighbour site, coupling) lists for one torus and coupling
/// map. Entry order per site follows CouplingMap::entries().
class NeighbourTable {
public:
  NeighbourTable(const LatticeTorus& torus, const CouplingMap& J);

  struct Link {
    std::uint32_t site;
    double coupling;
  };
  std::span<const Link> links(std::size_t site) const {
    return {links_.data() + site * per_site_, per_site_};
  }
  std::size_t sites() const noexcept { return sites_; }
  std::size_t per_site() const noexcept { return per_site_; }

  /// sum_r J(r) s_{site+r}
  double local_field(std::span<const std::int8_t> spins, std::size_t site) const {
    double h = 0.0;
    for (const Link& l : links(site))
      h += l.coupling * spins[l.site];
    return h;
  }

private:
  std::size_t sites_;
  std::size_t per_site_;
  std::vector<Link> links_;
};

double energy(const SpinConfiguration& config, const CouplingMap& J);

/// E(flipped at site) - E(config) = 2 s_site sum_r J(r) s_{site+r}.
double flip_delta(const SpinConfiguration& config, std::size_t site, const CouplingMap& J);

struct DobrushinReport {
  double sum = 0.0;            // beta * sum tanh|J|
  bool holds = false;          // strict: sum < 1
  double abs_sum = 0.0;        // beta * sum |J|
  bool sufficient_holds = false; // abs_sum <= 1
};

DobrushinReport dobrushin_check(const CouplingMap& J, double beta);

/// Largest beta for which the condition holds, bracketed by bisection on
/// dobrushin_check to width `tol`. Returns +inf for J == 0.
double dobrushin_threshold(const CouplingMap& J, double tol = 1e-12);

/// beta * sum_r exp(t |r|) |J(r)|; finite for every finite-support map.
double exp_moment(const CouplingMap& J, double beta, double t);
/// beta * sum_r |r|^p |J(r)|
double alg_moment(const CouplingMap& J, double beta, double p);

/// Invertible d x d matrix mapping a lattice Lambda in R^d onto Z^d.
class LatticeBasis {
public:
  explicit LatticeBasis(Eigen::MatrixXd A);

  const Eigen::MatrixXd& matrix() const noexcept { return A_; }
  int dimension() const noexcept { return static_cast<int>(A_.rows()); }
  /// Largest singular value.
  double spectral_norm() const noexcept { return spectral_norm_; }

private:
  Eigen::MatrixXd A_;
  double spectral_norm_;
};

/// Pair couplings on a general lattice; displacements are Cartesian vectors
/// of Lambda.
struct LatticeCoupling {
  struct Entry {
    Eigen::VectorXd r;
    double value = 0.0;
  };
  int dimension = 0;
  std::vector<Entry> entries;

  double range() const;
};

struct MappedCoupling {
  CouplingMap J;
  double range_bound; // ||A||_2 * R_Lambda
};

/// J(y) = J_lambda(A^{-1} y) on the image points y = A r. Throws
/// PreconditionError if an image is not (within 1e-9) an integer vector.
MappedCoupling lattice_to_zd(const LatticeCoupling& J_lambda, const LatticeBasis& A);

} // namespace latdiff
