#include <doctest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "latdiff/oracle.hpp"

using namespace latdiff;

TEST_CASE("infinite temperature enumeration") {
  const auto r = enumerate_exact(LatticeTorus({3, 3}), nearest_neighbour(2, 1.0), 0.0);
  for (const auto& x : r.correlations.displacements()) {
    const bool zero = std::all_of(x.begin(), x.end(), [](int v) { return v == 0; });
    CHECK(r.correlations.eta(x) == doctest::Approx(zero ? 1.0 : 0.0));
  }
}

TEST_CASE("zero coupling partition function") {
  const auto r = enumerate_exact(LatticeTorus({10}), CouplingMap(1), 1.3);
  CHECK(r.log_partition == doctest::Approx(10.0 * std::numbers::ln2).epsilon(1e-14));
}

TEST_CASE("4-site ring agrees with the transfer matrix") {
  const auto e = enumerate_exact(LatticeTorus({4}), nearest_neighbour(1, 1.0), 0.5);
  const auto t = transfer_matrix_1d_torus(0.5, 4);
  for (int x = 0; x <= 2; ++x)
    CHECK(std::abs(e.correlations.eta({x}) - t.eta({x})) < 1e-10);
}

TEST_CASE("cross-oracle: rings of 3 to 12 sites") {
  for (int L = 3; L <= 12; ++L)
    for (double bj : {0.1, 0.5, 1.2}) {
      const auto e = enumerate_exact(LatticeTorus({L}), nearest_neighbour(1, 1.0), bj);
      const auto t = transfer_matrix_1d_torus(bj, L);
      for (int x = 0; x <= L / 2; ++x)
        CHECK(std::abs(e.correlations.eta({x}) - t.eta({x})) < 1e-10);
      // log Z = log((2 cosh)^L + (2 sinh)^L)
      const double z = std::pow(2 * std::cosh(bj), L) + std::pow(2 * std::sinh(bj), L);
      CHECK(e.log_partition == doctest::Approx(std::log(z)).epsilon(1e-12));
    }
}

TEST_CASE("transfer matrix closed forms") {
  const double t = std::tanh(0.5);
  const auto ring = transfer_matrix_1d_torus(0.5, 8);
  CHECK(ring.eta({0}) == 1.0);
  CHECK(ring.eta({1}) == doctest::Approx((t + std::pow(t, 7)) / (1 + std::pow(t, 8))).epsilon(1e-15));
  const auto inf = transfer_matrix_1d_infinite(0.5, 10);
  CHECK(inf.eta({0}) == 1.0);
  CHECK(inf.eta({3}) == doctest::Approx(std::pow(t, 3)).epsilon(1e-15));
  CHECK(inf.eta({3}) == doctest::Approx(0.0986862).epsilon(1e-6));
  CHECK(-std::log(inf.eta({1})) == doctest::Approx(0.7719368).epsilon(1e-6));
  for (const auto& x : inf.displacements())
    CHECK(inf.eta(x) > 0.0);
  CHECK_THROWS_AS(transfer_matrix_1d_infinite(0.0, 3), PreconditionError);
  CHECK_THROWS_AS(transfer_matrix_1d_torus(0.5, 1), PreconditionError);
}

TEST_CASE("8-site ring enumeration matches the closed form") {
  const double t = std::tanh(0.5);
  const auto e = enumerate_exact(LatticeTorus({8}), nearest_neighbour(1, 1.0), 0.5);
  CHECK(std::abs(e.correlations.eta({1}) - (t + std::pow(t, 7)) / (1 + std::pow(t, 8))) < 1e-10);
}

TEST_CASE("enumeration caps") {
  const auto J = nearest_neighbour(1, 1.0);
  CHECK_THROWS_AS(enumerate_exact(LatticeTorus({21}), J, 0.1), PreconditionError);
  EnumerationOptions o;
  o.max_sites = 25;
  CHECK_THROWS_AS(enumerate_exact(LatticeTorus({4}), J, 0.1, o), PreconditionError);
}

TEST_CASE("property: probabilities, Griffiths positivity and zero magnetisation") {
  Rng rng(31);
  for (int i = 0; i < 12; ++i) {
    const bool ferro = i % 2 == 0;
    const int d = 1 + static_cast<int>(rng.below(2));
    const auto J = gen::random_coupling(d, 1, rng, ferro);
    const LatticeTorus T(d == 1 ? std::vector<int>{10} : std::vector<int>{3, 4});
    const double beta = 0.1 + rng.uniform();
    EnumerationOptions o;
    o.keep_probabilities = true;
    const auto r = enumerate_exact(T, J, beta, o);
    double total = 0.0;
    for (double p : *r.state_probabilities) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::abs(r.mean_spin) < 1e-12);
    CHECK(r.correlations.eta(Displacement(static_cast<std::size_t>(d), 0)) == doctest::Approx(1.0));
    if (ferro)
      for (const auto& x : r.correlations.displacements())
        CHECK(r.correlations.eta(x) >= 0.0);
  }
}

TEST_CASE("probabilities agree with direct Boltzmann weights") {
  const LatticeTorus T({3, 3});
  std::vector<CouplingMap::Entry> e = {{{0, 1}, 0.7}};
  const CouplingMap J(2, e);
  EnumerationOptions o;
  o.keep_probabilities = true;
  const auto r = enumerate_exact(T, J, 0.9, o);
  for (std::uint64_t s = 0; s < 512; ++s) {
    std::vector<std::int8_t> spins(9);
    for (int j = 0; j < 9; ++j)
      spins[static_cast<std::size_t>(j)] = (s >> j) & 1 ? 1 : -1;
    const SpinConfiguration c(T, spins);
    CHECK(c.state_index() == s);
    CHECK((*r.state_probabilities)[s] ==
          doctest::Approx(std::exp(-0.9 * energy(c, J) - r.log_partition)).epsilon(1e-12));
  }
}
