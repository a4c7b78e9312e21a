#pragma once

// Markov chain Monte Carlo for the torus Gibbs measure exp(-beta E) / Z.
//
// RNG: std::mt19937_64 seeded with RunParams::seed; uniforms are the top 53
// bits of one draw scaled by 2^-53. Chains start from the all-up state.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latdiff/model.hpp"

namespace latdiff {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t bits() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool coin() { return (engine_() >> 63) != 0; }
  /// Uniform on {0, ..., n-1}, unbiased.
  std::uint64_t below(std::uint64_t n);

private:
  std::mt19937_64 engine_;
};

enum class Algorithm { metropolis, wolff };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct RunParams {
  LatticeTorus torus;
  CouplingMap J;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t burn_in_sweeps = 1000;
  std::uint64_t n_samples = 1;
  std::uint64_t thin_sweeps = 1;
  Algorithm algorithm = Algorithm::metropolis;
};

/// Throws PreconditionError on inadmissible torus, n_samples == 0,
/// thin_sweeps == 0, negative beta, or Wolff with a non-ferromagnetic map.
void validate(const RunParams& params);

struct SampleStats {
  double mean_spin = 0.0;
  double mean_spin_err = 0.0;
  double mean_energy_per_site = 0.0;
  double integrated_autocorrelation_time = 0.5; // in sweeps
  std::uint64_t n_samples = 0;
};

/// Samples stored contiguously, one row of N spins per configuration.
class SampleSet {
public:
  explicit SampleSet(LatticeTorus torus) : torus_(std::move(torus)) {}

  const LatticeTorus& torus() const noexcept { return torus_; }
  std::size_t size() const noexcept { return torus_.sites() ? spins_.size() / torus_.sites() : 0; }
  bool empty() const noexcept { return spins_.empty(); }

  void push_back(std::span<const std::int8_t> spins);
  std::span<const std::int8_t> spins(std::size_t i) const {
    return {spins_.data() + i * torus_.sites(), torus_.sites()};
  }
  SpinConfiguration at(std::size_t i) const;
  void append(const SampleSet& other);
  SampleSet reversed() const;

  bool operator==(const SampleSet&) const = default;

private:
  LatticeTorus torus_;
  std::vector<std::int8_t> spins_;
};

/// One sweep: N single-site proposals in site order, each accepted with
/// probability min(1, exp(-beta dE)). Proposals with beta*dE == 0 are accepted
/// with probability 1/2, which keeps the sweep aperiodic at beta = 0 and
/// J == 0 and leaves detailed balance intact.
void metropolis_sweep(SpinConfiguration& config, const NeighbourTable& table, double beta, Rng& rng);

/// One Wolff cluster update with bond probabilities 1 - exp(-2 beta J(r)).
/// Returns the cluster size. Requires a ferromagnetic map.
std::size_t wolff_step(SpinConfiguration& config, const NeighbourTable& table, double beta, Rng& rng);

/// Wolff updates until at least N spins have been flipped in total. The
/// stopping rule depends on the state, so this is for burn-in and calibration
/// only; the law at its stopping times is not the Gibbs measure.
void wolff_sweep(SpinConfiguration& config, const NeighbourTable& table, double beta, Rng& rng);
/// Cluster updates per sampling sweep: N / (mean cluster size), measured on a
/// copy of `config` over `pilot` calibration sweeps; at least 1.
std::size_t wolff_steps_per_sweep(const SpinConfiguration& config, const NeighbourTable& table, double beta,
                                  Rng& rng, std::size_t pilot = 10);

using SampleVisitor = std::function<void(const SpinConfiguration&, std::uint64_t index)>;

/// Runs burn-in, then visits n_samples configurations spaced thin_sweeps
/// apart. Deterministic in params.
SampleStats run_streaming(const RunParams& params, const SampleVisitor& visit);

struct RunResult {
  SampleSet samples;
  SampleStats stats;
};

RunResult run(const RunParams& params);

struct ChainsResult {
  SampleSet samples;                  // concatenated in list order
  std::vector<SampleStats> per_chain;
  SampleStats merged;
};

/// Independent chains on up to `threads` threads (0 = hardware concurrency).
/// The result is identical to running the chains one after another.
ChainsResult parallel_chains(const std::vector<RunParams>& chains, unsigned threads = 0);

/// Pools per-chain statistics: sample-weighted means, independent-chain
/// standard error, sample-weighted autocorrelation time.
SampleStats merge_stats(std::span<const SampleStats> stats);

/// Burn-in recommendation: 100 x the autocorrelation time of a pilot run,
/// never below 1000 sweeps.
std::uint64_t suggest_burn_in(const RunParams& params, std::uint64_t pilot_samples = 2000);

// Binary sample record:
//   magic "LATDIFF-SAMPLES\0" (16 bytes), u32 format version,
//   u32 d, u32 L_1..L_d, f64 beta, u64 seed, u32 tag length, tag bytes,
//   u64 sample count, then ceil(N/8) bytes per configuration with bit j of
//   the row set iff spin j is +1 (bit j % 8 of byte j / 8).
// All integers and doubles little-endian.
struct SampleRecordHeader {
  LatticeTorus torus;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::string convention = kConventionTag;
};

void write_samples(const std::filesystem::path& path, const SampleRecordHeader& header,
                   const SampleSet& samples);
struct SampleRecord {
  SampleRecordHeader header;
  SampleSet samples;
};
SampleRecord read_samples(const std::filesystem::path& path);

void write_stats(std::ostream& os, const SampleStats& stats);
SampleStats read_stats(std::istream& is);

} // namespace latdiff
