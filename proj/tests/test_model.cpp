#include <doctest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "latdiff/model.hpp"

using namespace latdiff;

namespace {

// Independent oracle: every unordered pair {x, y} of distinct sites, bond
// value read straight from the coupling map.
double bond_sum_energy(const SpinConfiguration& c, const CouplingMap& J) {
  const auto& T = c.torus();
  double e = 0.0;
  for (std::size_t x = 0; x < T.sites(); ++x)
    for (const auto& en : J.entries()) {
      const std::size_t y = T.shift(x, en.r);
      if (x < y || (x == y))
        continue;
      e -= en.value * c.spin(x) * c.spin(y);
    }
  return e;
}

SpinConfiguration from_signs(std::vector<int> sides, std::vector<std::int8_t> s) {
  return SpinConfiguration(LatticeTorus(std::move(sides)), std::move(s));
}

} // namespace

TEST_CASE("coupling map stores both signs and drops self coupling") {
  std::vector<CouplingMap::Entry> e = {{{1}, 1.0}, {{0}, 5.0}, {{2}, 0.0}};
  CouplingMap J(1, e);
  CHECK(J.entries().size() == 2);
  CHECK(J.at({1}) == 1.0);
  CHECK(J.at({-1}) == 1.0);
  CHECK(J.at({0}) == 0.0);
  CHECK(J.at({2}) == 0.0);
  CHECK(J.range() == 1.0);
  CHECK(J.ferromagnetic());
}

TEST_CASE("conflicting values for r and -r are rejected") {
  std::vector<CouplingMap::Entry> e = {{{1}, 1.0}, {{-1}, 0.5}};
  CHECK_THROWS_AS(CouplingMap(1, e), PreconditionError);
  std::vector<CouplingMap::Entry> same = {{{1}, 1.0}, {{-1}, 1.0}};
  CHECK(CouplingMap(1, same) == nearest_neighbour(1, 1.0));
}

TEST_CASE("range and ferromagnetic flag") {
  std::vector<CouplingMap::Entry> e = {{{1, 1}, 0.5}, {{2, 0}, -0.25}};
  CouplingMap J(2, e);
  CHECK(J.range() == doctest::Approx(2.0));
  CHECK_FALSE(J.ferromagnetic());
}

TEST_CASE("property: stored map is symmetric") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(3));
    const auto J = gen::random_coupling(d, 2, rng);
    for (const auto& en : J.entries()) {
      Displacement neg = en.r;
      for (auto& c : neg)
        c = -c;
      CHECK(J.at(neg) == en.value);
    }
  }
}

TEST_CASE("coupling serialisation round trip") {
  Rng rng(5);
  const auto J = gen::random_coupling(2, 2, rng);
  const auto doc = to_json(J);
  CHECK(coupling_from_json(doc) == J);
  CHECK(coupling_from_json(nlohmann::json::parse(doc.dump())) == J);
}

TEST_CASE("torus indexing is row-major with periodic shifts") {
  LatticeTorus T({3, 4});
  CHECK(T.sites() == 12);
  CHECK(T.index({1, 2}) == 6);
  CHECK(T.coords(6) == std::vector<int>{1, 2});
  CHECK(T.shift(T.index({2, 3}), {1, 1}) == T.index({0, 0}));
  CHECK(T.shift(T.index({0, 0}), {-1, -5}) == T.index({2, 3}));
  CHECK_THROWS_AS(LatticeTorus({1}), PreconditionError);
}

TEST_CASE("admissibility requires every side above twice the range") {
  const auto J = nearest_neighbour(1, 1.0);
  CHECK_NOTHROW(check_admissible(LatticeTorus({3}), J));
  CHECK_THROWS_AS(check_admissible(LatticeTorus({2}), J), PreconditionError);
  CHECK_THROWS_AS(check_admissible(LatticeTorus({4, 4}), J), PreconditionError);
}

TEST_CASE("energy examples") {
  const auto J = nearest_neighbour(1, 1.0);
  CHECK(energy(from_signs({4}, {1, 1, 1, 1}), J) == -4.0);
  CHECK(energy(from_signs({4}, {1, -1, 1, -1}), J) == 4.0);
}

TEST_CASE("energy matches the bond-sum oracle on random 4x4 configurations") {
  Rng rng(3);
  const auto J = nearest_neighbour(2, 1.0);
  LatticeTorus T({4, 4});
  for (int i = 0; i < 20; ++i) {
    const auto c = gen::random_config(T, rng);
    CHECK(energy(c, J) == bond_sum_energy(c, J));
  }
}

TEST_CASE("property: energy matches the oracle for random couplings") {
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const int d = 1 + static_cast<int>(rng.below(2));
    const auto J = gen::random_coupling(d, 2, rng);
    LatticeTorus T(std::vector<int>(static_cast<std::size_t>(d), 7));
    const auto c = gen::random_config(T, rng);
    CHECK(energy(c, J) == doctest::Approx(bond_sum_energy(c, J)).epsilon(1e-12));
  }
}

TEST_CASE("property: energy is translation and spin-flip invariant") {
  Rng rng(8);
  for (int i = 0; i < 30; ++i) {
    const auto J = gen::random_coupling(2, 1, rng);
    LatticeTorus T({5, 6});
    const auto c = gen::random_config(T, rng);
    const Displacement a = {static_cast<int>(rng.below(5)), static_cast<int>(rng.below(6))};
    std::vector<std::int8_t> shifted(T.sites()), negated(T.sites());
    for (std::size_t x = 0; x < T.sites(); ++x) {
      shifted[T.shift(x, a)] = static_cast<std::int8_t>(c.spin(x));
      negated[x] = static_cast<std::int8_t>(-c.spin(x));
    }
    // couplings are multiples of 1/8, so both sums are exact
    CHECK(energy(SpinConfiguration(T, shifted), J) == energy(c, J));
    CHECK(energy(SpinConfiguration(T, negated), J) == energy(c, J));
  }
}

TEST_CASE("flip_delta examples") {
  const auto J = nearest_neighbour(1, 1.0);
  CHECK(flip_delta(from_signs({4}, {1, 1, 1, 1}), 0, J) == 4.0);
  Rng rng(1);
  const auto c = gen::random_config(LatticeTorus({6}), rng);
  for (std::size_t s = 0; s < 6; ++s)
    CHECK(flip_delta(c, s, CouplingMap(1)) == 0.0);
  CHECK_THROWS(flip_delta(c, 6, J));
}

TEST_CASE("property: flip_delta equals the energy difference") {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const int d = 1 + static_cast<int>(rng.below(3));
    const auto J = gen::random_coupling(d, 1, rng);
    LatticeTorus T(std::vector<int>(static_cast<std::size_t>(d), d == 3 ? 4 : 5));
    auto c = gen::random_config(T, rng);
    const std::size_t s = rng.below(T.sites());
    const double before = energy(c, J);
    const double dE = flip_delta(c, s, J);
    c.flip(s);
    CHECK(std::abs(energy(c, J) - before - dE) < 1e-10);
  }
}

TEST_CASE("state index sets bit j for spin j = +1") {
  const auto c = from_signs({4}, {1, -1, -1, 1});
  CHECK(c.state_index() == 0b1001);
  CHECK(c.occupation(0) == 1);
  CHECK(c.occupation(1) == 0);
}

TEST_CASE("Dobrushin examples") {
  const auto J = nearest_neighbour(1, 1.0);
  auto r = dobrushin_check(J, 0.3);
  CHECK(r.sum == doctest::Approx(0.6 * std::tanh(1.0)).epsilon(1e-15));
  CHECK(r.sum == doctest::Approx(0.456956).epsilon(1e-6));
  CHECK(r.holds);
  CHECK(r.abs_sum == doctest::Approx(0.6));
  CHECK(r.sufficient_holds);

  r = dobrushin_check(J, 0.7);
  CHECK(r.sum == doctest::Approx(1.066232).epsilon(1e-6));
  CHECK_FALSE(r.holds);

  r = dobrushin_check(CouplingMap(2), 5.0);
  CHECK(r.sum == 0.0);
  CHECK(r.holds);
}

TEST_CASE("Dobrushin boundary counts as failing") {
  // tanh(20) rounds to exactly 1, so beta = 1/2 gives a sum of exactly 1
  const auto r = dobrushin_check(nearest_neighbour(1, 20.0), 0.5);
  CHECK(r.sum == 1.0);
  CHECK_FALSE(r.holds);
}

TEST_CASE("Dobrushin threshold by bisection") {
  const auto J = nearest_neighbour(1, 1.0);
  const double b = dobrushin_threshold(J);
  CHECK(std::abs(b - 1.0 / (2.0 * std::tanh(1.0))) < 1e-9);
  CHECK(dobrushin_check(J, b - 1e-9).holds);
  CHECK_FALSE(dobrushin_check(J, b + 1e-9).holds);
  CHECK(std::isinf(dobrushin_threshold(CouplingMap(1))));
}

TEST_CASE("property: Dobrushin holds monotonically in beta") {
  Rng rng(21);
  for (int i = 0; i < 40; ++i) {
    const auto J = gen::random_coupling(2, 1, rng);
    const double beta = rng.uniform() * 2.0;
    if (!dobrushin_check(J, beta).holds)
      continue;
    for (int k = 0; k < 10; ++k)
      CHECK(dobrushin_check(J, beta * rng.uniform()).holds);
  }
}

TEST_CASE("moment examples") {
  const auto J1 = nearest_neighbour(1, 1.0);
  CHECK(exp_moment(J1, 1.0, 0.1) == doctest::Approx(2.0 * std::exp(0.1)).epsilon(1e-15));
  CHECK(exp_moment(J1, 1.0, 0.1) == doctest::Approx(2.210342).epsilon(1e-6));
  CHECK(exp_moment(CouplingMap(1), 1.0, 0.1) == 0.0);
  CHECK(exp_moment(nearest_neighbour(2, 1.0), 0.5, 1.0) == doctest::Approx(5.436563).epsilon(1e-6));
  CHECK(alg_moment(J1, 1.0, 2.0) == 2.0);
  CHECK(alg_moment(CouplingMap(2), 1.0, 2.0) == 0.0);
  std::vector<CouplingMap::Entry> e = {{{1}, 1.0}, {{2}, 0.5}};
  CHECK(alg_moment(CouplingMap(1, e), 1.0, 3.0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(exp_moment(J1, 1.0, 0.0), PreconditionError);
  CHECK_THROWS_AS(alg_moment(J1, 1.0, -1.0), PreconditionError);
}

TEST_CASE("lattice basis spectral norm") {
  Eigen::MatrixXd A(2, 2);
  A << 3, 0, 0, -4;
  CHECK(LatticeBasis(A).spectral_norm() == doctest::Approx(4.0).epsilon(1e-12));
  Eigen::MatrixXd S(2, 2);
  S << 1, 2, 2, 4;
  CHECK_THROWS_AS(LatticeBasis{S}, PreconditionError);
}

TEST_CASE("lattice_to_zd with the identity is the identity") {
  Rng rng(2);
  const auto J = gen::random_coupling(2, 2, rng);
  LatticeCoupling lc{2, {}};
  for (const auto& e : J.entries())
    lc.entries.push_back({Eigen::Vector2d(e.r[0], e.r[1]), e.value});
  const auto m = lattice_to_zd(lc, LatticeBasis(Eigen::MatrixXd::Identity(2, 2)));
  CHECK(m.J == J);
  CHECK(m.range_bound == doctest::Approx(J.range()));
}

TEST_CASE("lattice_to_zd with a diagonal basis") {
  Eigen::MatrixXd A(2, 2);
  A << 2, 0, 0, 1;
  LatticeCoupling lc{2, {{Eigen::Vector2d(1, 0), 0.75}}};
  const auto m = lattice_to_zd(lc, LatticeBasis(A));
  CHECK(m.J.at({2, 0}) == 0.75);
  CHECK(m.J.at({-2, 0}) == 0.75);
  CHECK(m.J.entries().size() == 2);
  CHECK(m.range_bound == doctest::Approx(2.0));
  CHECK(m.J.range() <= m.range_bound + 1e-12);
}

TEST_CASE("lattice_to_zd maps the hexagonal star onto six integer images") {
  // Triangular lattice with Cartesian basis b1 = (1, 0), b2 = (1/2, sqrt3/2);
  // A maps b1 -> e1, b2 -> e2.
  const double h = std::numbers::sqrt3 / 2.0;
  Eigen::MatrixXd B(2, 2);
  B << 1.0, 0.5, 0.0, h;
  const Eigen::MatrixXd A = B.inverse();
  LatticeCoupling lc{2, {}};
  for (int k = 0; k < 6; ++k) {
    const double a = k * std::numbers::pi / 3.0;
    lc.entries.push_back({Eigen::Vector2d(std::cos(a), std::sin(a)), 1.0});
  }
  const auto m = lattice_to_zd(lc, LatticeBasis(A));
  CHECK(m.J.entries().size() == 6);
  for (const auto& e : m.J.entries())
    CHECK(e.value == 1.0);
  CHECK(m.J.at({1, 0}) == 1.0);
  CHECK(m.J.at({0, 1}) == 1.0);
  CHECK(m.J.at({-1, 1}) == 1.0);
  CHECK(m.J.ferromagnetic());
  CHECK(m.J.range() <= m.range_bound + 1e-12);
}

TEST_CASE("lattice_to_zd rejects non-integer images") {
  LatticeCoupling lc{1, {{Eigen::VectorXd::Constant(1, 0.5), 1.0}}};
  CHECK_THROWS_AS(lattice_to_zd(lc, LatticeBasis(Eigen::MatrixXd::Identity(1, 1))), PreconditionError);
}
