#include "latdiff/oracle.hpp"

#include <bit>
#include <cmath>

#include "latdiff/numeric.hpp"

namespace latdiff {

ExactResult enumerate_exact(const LatticeTorus& torus, const CouplingMap& J, double beta,
                            const EnumerationOptions& options) {
  const std::size_t N = torus.sites();
  if (options.max_sites > kEnumerationHardCap)
    throw PreconditionError("enumerate_exact: cap may not exceed " + std::to_string(kEnumerationHardCap));
  if (N > options.max_sites)
    throw PreconditionError("enumerate_exact: " + std::to_string(N) + " sites exceed the enumeration cap of " +
                            std::to_string(options.max_sites));
  if (!(beta >= 0) || !std::isfinite(beta))
    throw PreconditionError("enumerate_exact: beta must be finite and nonnegative");

  std::vector<int> window;
  if (options.window) {
    window = *options.window;
    if (static_cast<int>(window.size()) != torus.dimension())
      throw PreconditionError("enumerate_exact: window dimension mismatch");
    for (std::size_t i = 0; i < window.size(); ++i)
      if (window[i] < 0 || window[i] > torus.sides()[i] / 2)
        throw PreconditionError("enumerate_exact: window exceeds half the torus side");
  } else {
    for (int L : torus.sides())
      window.push_back(L / 2);
  }

  const NeighbourTable table(torus, J);
  SpinConfiguration config(torus, std::vector<std::int8_t>(N, std::int8_t{-1}));
  auto spins = config.spins();

  auto full_energy = [&] {
    double e = 0.0;
    for (std::size_t x = 0; x < N; ++x)
      e += spins[x] * table.local_field(spins, x);
    return -0.5 * e;
  };

  const std::uint64_t states = std::uint64_t{1} << N;
  std::vector<double> energies;
  if (options.keep_probabilities)
    energies.resize(states);

  NeumaierSum Z, mag;
  std::vector<NeumaierSum> corr(N);
  double shift = 0.0;
  bool started = false;
  double E = full_energy();
  std::uint64_t gray = 0;

  for (std::uint64_t i = 0; i < states; ++i) {
    if (i > 0) {
      const auto j = static_cast<std::size_t>(std::countr_zero(i));
      E += 2.0 * spins[j] * table.local_field(spins, j);
      spins[j] = static_cast<std::int8_t>(-spins[j]);
      gray ^= std::uint64_t{1} << j;
      if ((i & 4095) == 0)
        E = full_energy(); // keep incremental drift out of long runs
    }
    const double logw = -beta * E;
    if (!started || logw > shift) {
      const double f = started ? std::exp(shift - logw) : 1.0;
      Z.scale(f);
      mag.scale(f);
      for (auto& c : corr)
        c.scale(f);
      shift = logw;
      started = true;
    }
    const double w = std::exp(logw - shift);
    Z.add(w);
    const double ws0 = w * spins[0];
    mag.add(ws0);
    for (std::size_t x = 0; x < N; ++x)
      corr[x].add(ws0 * spins[x]);
    if (options.keep_probabilities)
      energies[gray] = E;
  }

  const double z = Z.value();
  ExactResult out{CorrelationTable(window, TableSource::exact, Quantity::spin), shift + std::log(z),
                  mag.value() / z, std::nullopt};
  out.correlations.torus_sides = torus.sides();
  out.correlations.beta = beta;
  for (const auto& x : out.correlations.displacements())
    out.correlations.set(x, corr[torus.index(x)].value() / z, 0.0);

  if (options.keep_probabilities) {
    std::vector<double> p(states);
    for (std::uint64_t s = 0; s < states; ++s)
      p[s] = std::exp(-beta * energies[s] - out.log_partition);
    out.state_probabilities = std::move(p);
  }
  return out;
}

CorrelationTable transfer_matrix_1d_torus(double betaJ, int L) {
  if (L < 2)
    throw PreconditionError("transfer_matrix_1d_torus: L must be at least 2");
  const double t = std::tanh(betaJ);
  const double tL = std::pow(t, L);
  CorrelationTable table({L / 2}, TableSource::exact, Quantity::spin);
  table.torus_sides = {L};
  for (int x = 0; x <= L / 2; ++x)
    table.set({x}, (std::pow(t, x) + std::pow(t, L - x)) / (1.0 + tL), 0.0);
  table.set({0}, 1.0, 0.0);
  return table;
}

CorrelationTable transfer_matrix_1d_infinite(double betaJ, int x_max) {
  if (x_max < 1)
    throw PreconditionError("transfer_matrix_1d_infinite: x_max must be at least 1");
  if (!(betaJ > 0))
    throw PreconditionError("transfer_matrix_1d_infinite: betaJ must be positive");
  const double t = std::tanh(betaJ);
  CorrelationTable table({x_max}, TableSource::exact, Quantity::spin);
  for (int x = 0; x <= x_max; ++x)
    table.set({x}, std::pow(t, x), 0.0);
  return table;
}

} // namespace latdiff
