#include "latdiff/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace latdiff {

double euclidean_norm(const Displacement& r) {
  double s = 0.0;
  for (int c : r)
    s += static_cast<double>(c) * c;
  return std::sqrt(s);
}

int max_norm(const Displacement& r) {
  int m = 0;
  for (int c : r)
    m = std::max(m, std::abs(c));
  return m;
}

namespace {

Displacement negate(Displacement r) {
  for (int& c : r)
    c = -c;
  return r;
}

bool is_zero(const Displacement& r) {
  return std::all_of(r.begin(), r.end(), [](int c) { return c == 0; });
}

} // namespace

CouplingMap::CouplingMap(int dimension, std::span<const Entry> entries) : dimension_(dimension) {
  if (dimension < 1)
    throw PreconditionError("coupling map: dimension must be positive");
  std::map<Displacement, double> table;
  auto insert = [&](const Displacement& r, double v) {
    auto [it, fresh] = table.emplace(r, v);
    if (!fresh && it->second != v)
      throw PreconditionError("coupling map: J(r) != J(-r) for an explicitly listed pair");
  };
  for (const Entry& e : entries) {
    if (static_cast<int>(e.r.size()) != dimension)
      throw PreconditionError("coupling map: displacement dimension mismatch");
    if (!std::isfinite(e.value))
      throw PreconditionError("coupling map: non-finite coupling");
    if (is_zero(e.r) || e.value == 0.0)
      continue;
    insert(e.r, e.value);
  }
  // mirror after explicit entries so conflicting pairs are caught above
  std::map<Displacement, double> mirrored = table;
  for (const auto& [r, v] : table) {
    auto [it, fresh] = mirrored.emplace(negate(r), v);
    if (!fresh && it->second != v)
      throw PreconditionError("coupling map: J(r) != J(-r) for an explicitly listed pair");
  }
  for (const auto& [r, v] : mirrored) {
    entries_.push_back({r, v});
    range_ = std::max(range_, euclidean_norm(r));
    if (v < 0)
      ferromagnetic_ = false;
  }
}

double CouplingMap::at(const Displacement& r) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), r,
                             [](const Entry& e, const Displacement& key) { return e.r < key; });
  return (it != entries_.end() && it->r == r) ? it->value : 0.0;
}

CouplingMap nearest_neighbour(int dimension, double value) {
  std::vector<CouplingMap::Entry> entries;
  for (int i = 0; i < dimension; ++i) {
    Displacement r(dimension, 0);
    r[i] = 1;
    entries.push_back({r, value});
  }
  return CouplingMap(dimension, entries);
}

nlohmann::json to_json(const CouplingMap& J) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : J.entries()) {
    // one representative per +-r pair: first nonzero component positive
    auto first = std::find_if(e.r.begin(), e.r.end(), [](int c) { return c != 0; });
    if (*first < 0)
      continue;
    entries.push_back({{"displacement", e.r}, {"value", e.value}});
  }
  return {{"dimension", J.dimension()}, {"entries", entries}};
}

CouplingMap coupling_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("dimension") || !doc.contains("entries"))
    throw PreconditionError("coupling map document needs `dimension` and `entries`");
  const int d = doc.at("dimension").get<int>();
  std::vector<CouplingMap::Entry> entries;
  for (const auto& e : doc.at("entries")) {
    if (!e.contains("displacement") || !e.contains("value"))
      throw PreconditionError("coupling entry needs `displacement` and `value`");
    entries.push_back({e.at("displacement").get<Displacement>(), e.at("value").get<double>()});
  }
  return CouplingMap(d, entries);
}

LatticeTorus::LatticeTorus(std::vector<int> sides) : sides_(std::move(sides)), sites_(1) {
  if (sides_.empty())
    throw PreconditionError("torus: dimension must be positive");
  for (int L : sides_) {
    if (L < 2)
      throw PreconditionError("torus: every side must be at least 2");
    sites_ *= static_cast<std::size_t>(L);
  }
}

std::size_t LatticeTorus::index(const std::vector<int>& coords) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < sides_.size(); ++i) {
    const int L = sides_[i];
    const int c = ((coords[i] % L) + L) % L;
    idx = idx * static_cast<std::size_t>(L) + static_cast<std::size_t>(c);
  }
  return idx;
}

std::vector<int> LatticeTorus::coords(std::size_t site) const {
  std::vector<int> c(sides_.size());
  for (std::size_t i = sides_.size(); i-- > 0;) {
    c[i] = static_cast<int>(site % static_cast<std::size_t>(sides_[i]));
    site /= static_cast<std::size_t>(sides_[i]);
  }
  return c;
}

std::size_t LatticeTorus::shift(std::size_t site, const Displacement& r) const {
  auto c = coords(site);
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] += r[i];
  return index(c);
}

void check_admissible(const LatticeTorus& torus, const CouplingMap& J) {
  if (torus.dimension() != J.dimension())
    throw PreconditionError("dimension mismatch between torus and coupling map");
  for (int L : torus.sides())
    if (!(static_cast<double>(L) > 2.0 * J.range()))
      throw PreconditionError("torus side " + std::to_string(L) +
                              " does not exceed twice the coupling range");
}

SpinConfiguration::SpinConfiguration(LatticeTorus torus)
    : torus_(std::move(torus)), spins_(torus_.sites(), std::int8_t{1}) {}

SpinConfiguration::SpinConfiguration(LatticeTorus torus, std::vector<std::int8_t> spins)
    : torus_(std::move(torus)), spins_(std::move(spins)) {
  if (spins_.size() != torus_.sites())
    throw PreconditionError("spin configuration: length does not match the torus");
  for (auto s : spins_)
    if (s != 1 && s != -1)
      throw PreconditionError("spin configuration: spins must be +1 or -1");
}

std::uint64_t SpinConfiguration::state_index() const {
  if (spins_.size() > 64)
    throw PreconditionError("state_index: more than 64 sites");
  std::uint64_t idx = 0;
  for (std::size_t j = 0; j < spins_.size(); ++j)
    if (spins_[j] > 0)
      idx |= std::uint64_t{1} << j;
  return idx;
}

NeighbourTable::NeighbourTable(const LatticeTorus& torus, const CouplingMap& J)
    : sites_(torus.sites()), per_site_(J.entries().size()) {
  check_admissible(torus, J);
  links_.reserve(sites_ * per_site_);
  for (std::size_t s = 0; s < sites_; ++s)
    for (const auto& e : J.entries())
      links_.push_back({static_cast<std::uint32_t>(torus.shift(s, e.r)), e.value});
}

double energy(const SpinConfiguration& config, const CouplingMap& J) {
  const NeighbourTable table(config.torus(), J);
  const auto spins = config.spins();
  double e = 0.0;
  for (std::size_t x = 0; x < spins.size(); ++x)
    e += spins[x] * table.local_field(spins, x);
  return -0.5 * e;
}

double flip_delta(const SpinConfiguration& config, std::size_t site, const CouplingMap& J) {
  if (site >= config.size())
    throw PreconditionError("flip_delta: site index out of range");
  check_admissible(config.torus(), J);
  double h = 0.0;
  for (const auto& e : J.entries())
    h += e.value * config.spin(config.torus().shift(site, e.r));
  return 2.0 * config.spin(site) * h;
}

DobrushinReport dobrushin_check(const CouplingMap& J, double beta) {
  if (!(beta > 0))
    throw PreconditionError("dobrushin_check: beta must be positive");
  double tanh_sum = 0.0;
  double abs_sum = 0.0;
  for (const auto& e : J.entries()) {
    tanh_sum += std::tanh(std::abs(e.value));
    abs_sum += std::abs(e.value);
  }
  DobrushinReport rep;
  rep.sum = beta * tanh_sum;
  rep.holds = rep.sum < 1.0;
  rep.abs_sum = beta * abs_sum;
  rep.sufficient_holds = rep.abs_sum <= 1.0;
  return rep;
}

double dobrushin_threshold(const CouplingMap& J, double tol) {
  if (J.empty())
    return std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = 1.0;
  while (dobrushin_check(J, hi).holds)
    hi *= 2.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi)
      break;
    (mid > 0 && dobrushin_check(J, mid).holds ? lo : hi) = mid;
  }
  return lo;
}

double exp_moment(const CouplingMap& J, double beta, double t) {
  if (!(t > 0))
    throw PreconditionError("exp_moment: t must be positive");
  double s = 0.0;
  for (const auto& e : J.entries())
    s += std::exp(t * euclidean_norm(e.r)) * std::abs(e.value);
  return beta * s;
}

double alg_moment(const CouplingMap& J, double beta, double p) {
  if (!(p > 0))
    throw PreconditionError("alg_moment: p must be positive");
  double s = 0.0;
  for (const auto& e : J.entries())
    s += std::pow(euclidean_norm(e.r), p) * std::abs(e.value);
  return beta * s;
}

LatticeBasis::LatticeBasis(Eigen::MatrixXd A) : A_(std::move(A)) {
  if (A_.rows() < 1 || A_.rows() != A_.cols())
    throw PreconditionError("lattice basis must be a square matrix");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A_);
  const auto& sv = svd.singularValues();
  spectral_norm_ = sv(0);
  if (!(sv(sv.size() - 1) > 1e-12 * spectral_norm_))
    throw PreconditionError("lattice basis is singular");
}

double LatticeCoupling::range() const {
  double R = 0.0;
  for (const auto& e : entries)
    if (e.value != 0.0)
      R = std::max(R, e.r.norm());
  return R;
}

MappedCoupling lattice_to_zd(const LatticeCoupling& J_lambda, const LatticeBasis& A) {
  if (J_lambda.dimension != A.dimension())
    throw PreconditionError("lattice_to_zd: dimension mismatch");
  std::vector<CouplingMap::Entry> mapped;
  for (const auto& e : J_lambda.entries) {
    if (e.r.size() != J_lambda.dimension)
      throw PreconditionError("lattice_to_zd: displacement dimension mismatch");
    const Eigen::VectorXd y = A.matrix() * e.r;
    Displacement yi(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double rounded = std::round(y(i));
      if (std::abs(y(i) - rounded) > 1e-9)
        throw PreconditionError("lattice_to_zd: image of a displacement is not in Z^d");
      yi[static_cast<std::size_t>(i)] = static_cast<int>(rounded);
    }
    mapped.push_back({yi, e.value});
  }
  return {CouplingMap(J_lambda.dimension, mapped), A.spectral_norm() * J_lambda.range()};
}

} // namespace latdiff
