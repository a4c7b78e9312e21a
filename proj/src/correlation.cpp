#include "latdiff/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "latdiff/numeric.hpp"
#include "latdiff/sampler.hpp"

namespace latdiff {

std::string to_string(TableSource s) { return s == TableSource::exact ? "exact" : "mcmc"; }
std::string to_string(Quantity q) { return q == Quantity::density ? "density" : "spin"; }

std::string to_string(DecayLaw law) {
  switch (law) {
  case DecayLaw::exponential:
    return "exponential";
  case DecayLaw::algebraic:
    return "algebraic";
  case DecayLaw::oz:
    return "oz";
  }
  return "?";
}

namespace {

bool canonical(const Displacement& x) {
  for (int c : x)
    if (c != 0)
      return c > 0;
  return true;
}

} // namespace

CorrelationTable::CorrelationTable(std::vector<int> window, TableSource source, Quantity quantity)
    : window_(std::move(window)), source_(source), quantity_(quantity) {
  if (window_.empty())
    throw PreconditionError("correlation table: dimension must be positive");
  std::size_t box = 1;
  for (int w : window_) {
    if (w < 0)
      throw PreconditionError("correlation table: negative window");
    box *= static_cast<std::size_t>(2 * w + 1);
  }
  box_to_slot_.assign(box, -1);
  Displacement x(window_.size());
  for (std::size_t b = 0; b < box; ++b) {
    std::size_t rem = b;
    for (std::size_t i = window_.size(); i-- > 0;) {
      const auto span = static_cast<std::size_t>(2 * window_[i] + 1);
      x[i] = static_cast<int>(rem % span) - window_[i];
      rem /= span;
    }
    if (canonical(x)) {
      box_to_slot_[b] = static_cast<std::int64_t>(half_.size());
      half_.push_back(x);
    }
  }
  values_.assign(half_.size(), 0.0);
  errors_.assign(half_.size(), 0.0);
}

int CorrelationTable::radius() const { return *std::min_element(window_.begin(), window_.end()); }

bool CorrelationTable::contains(const Displacement& x) const {
  if (x.size() != window_.size())
    return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > window_[i])
      return false;
  return true;
}

std::size_t CorrelationTable::slot(const Displacement& x) const {
  if (!contains(x))
    throw PreconditionError("correlation table: displacement outside the window");
  const bool flip = !canonical(x);
  std::size_t b = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int c = flip ? -x[i] : x[i];
    b = b * static_cast<std::size_t>(2 * window_[i] + 1) + static_cast<std::size_t>(c + window_[i]);
  }
  return static_cast<std::size_t>(box_to_slot_[b]);
}

double CorrelationTable::eta(const Displacement& x) const { return values_[slot(x)]; }
double CorrelationTable::std_err(const Displacement& x) const { return errors_[slot(x)]; }

void CorrelationTable::set(const Displacement& x, double value, double err) {
  if (err < 0 || std::isnan(err))
    throw PreconditionError("correlation table: std_err must be nonnegative");
  const std::size_t s = slot(x);
  values_[s] = value;
  errors_[s] = err;
}

CorrelationTable estimate_correlations(const SampleSet& samples, const std::vector<int>& window,
                                       std::size_t batches) {
  const LatticeTorus& torus = samples.torus();
  if (samples.size() < 2)
    throw PreconditionError("estimate_correlations: need at least two samples");
  if (static_cast<int>(window.size()) != torus.dimension())
    throw PreconditionError("estimate_correlations: window dimension mismatch");
  for (std::size_t i = 0; i < window.size(); ++i)
    if (window[i] < 0 || window[i] > torus.sides()[i] / 2)
      throw PreconditionError("estimate_correlations: window exceeds half the torus side");

  CorrelationTable table(window, TableSource::mcmc, Quantity::spin);
  table.torus_sides = torus.sides();
  const auto& disp = table.displacements();
  const std::size_t N = torus.sites();
  const std::size_t n = samples.size();

  std::vector<std::uint32_t> shifted(disp.size() * N);
  for (std::size_t k = 0; k < disp.size(); ++k)
    for (std::size_t y = 0; y < N; ++y)
      shifted[k * N + y] = static_cast<std::uint32_t>(torus.shift(y, disp[k]));

  // integer totals make the mean independent of sample order
  std::vector<long long> totals(disp.size(), 0);
  std::vector<double> per_sample(disp.size() * n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto spins = samples.spins(s);
    for (std::size_t k = 0; k < disp.size(); ++k) {
      const std::uint32_t* nb = shifted.data() + k * N;
      long long acc = 0;
      for (std::size_t y = 0; y < N; ++y)
        acc += spins[y] * spins[nb[y]];
      totals[k] += acc;
      per_sample[k * n + s] = static_cast<double>(acc) / static_cast<double>(N);
    }
  }
  for (std::size_t k = 0; k < disp.size(); ++k) {
    const double mean = static_cast<double>(totals[k]) / (static_cast<double>(N) * static_cast<double>(n));
    const MeanError me = batch_means(std::span<const double>(per_sample.data() + k * n, n), batches);
    table.set(disp[k], mean, me.std_err);
  }
  return table;
}

CorrelationTable spin_to_density(const CorrelationTable& spin) {
  if (spin.quantity() != Quantity::spin)
    throw PreconditionError("spin_to_density: input is not a spin table");
  CorrelationTable out(spin.window(), spin.source(), Quantity::density);
  out.torus_sides = spin.torus_sides;
  out.beta = spin.beta;
  for (const auto& x : spin.displacements())
    out.set(x, 0.25 * (spin.eta(x) + 1.0), 0.25 * spin.std_err(x));
  return out;
}

CorrelationTable density_to_spin(const CorrelationTable& density) {
  if (density.quantity() != Quantity::density)
    throw PreconditionError("density_to_spin: input is not a density table");
  CorrelationTable out(density.window(), density.source(), Quantity::spin);
  out.torus_sides = density.torus_sides;
  out.beta = density.beta;
  for (const auto& x : density.displacements())
    out.set(x, 4.0 * density.eta(x) - 1.0, 4.0 * density.std_err(x));
  return out;
}

namespace {

constexpr double kNoiseFloor = 10.0;
constexpr double kPoorChi2 = 9.0;
constexpr double kPoorRms = 0.02;

struct FitPoint {
  double r;
  double eta;
  double err;
};

bool above_noise(double eta, double err) { return eta != 0.0 && std::abs(eta) > kNoiseFloor * err; }

DecayFit finish_fit(DecayFit fit, std::span<const FitPoint> pts, std::span<const double> xs,
                    std::span<const double> ys) {
  fit.n_points = pts.size();
  fit.weighted = std::all_of(pts.begin(), pts.end(), [](const FitPoint& p) { return p.err > 0; });
  std::vector<double> w;
  if (fit.weighted)
    for (const auto& p : pts)
      w.push_back((p.eta / p.err) * (p.eta / p.err));
  const LineFit lf = fit_line(xs, ys, w);
  fit.C = std::exp(lf.intercept);
  fit.rate = -lf.slope;
  fit.rate_err = lf.slope_err;
  fit.residual_rms = lf.residual_rms;
  fit.reduced_chi2 = fit.weighted ? lf.reduced_chi2 : 0.0;
  fit.r_min = pts.front().r;
  fit.r_max = pts.front().r;
  for (const auto& p : pts) {
    fit.r_min = std::min(fit.r_min, p.r);
    fit.r_max = std::max(fit.r_max, p.r);
  }
  fit.ok = std::isfinite(fit.rate) && fit.rate > 0 && std::isfinite(fit.C) && fit.C > 0;
  fit.poor = fit.weighted ? fit.reduced_chi2 > kPoorChi2 : fit.residual_rms > kPoorRms;
  if (!fit.ok)
    fit.message = "fit failure: nonpositive decay rate (no decay)";
  else if (fit.poor)
    fit.message = "poor fit: residuals inconsistent with the " + to_string(fit.law) + " law";
  else
    fit.message = "ok";
  return fit;
}

std::vector<FitPoint> radial_points(const CorrelationTable& table, const FitWindow& window) {
  const double r_max = window.r_max.value_or(static_cast<double>(table.radius()));
  std::vector<FitPoint> pts;
  for (const auto& x : table.displacements()) {
    const double r = euclidean_norm(x);
    if (r == 0.0 || r < window.r_min || r > r_max)
      continue;
    const double e = table.eta(x), s = table.std_err(x);
    if (above_noise(e, s))
      pts.push_back({r, e, s});
  }
  return pts;
}

std::size_t distinct_radii(std::span<const FitPoint> pts) {
  std::vector<double> r;
  for (const auto& p : pts)
    r.push_back(p.r);
  std::sort(r.begin(), r.end());
  return static_cast<std::size_t>(
      std::unique(r.begin(), r.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }) - r.begin());
}

} // namespace

DecayFit fit_exponential(const CorrelationTable& table, const FitWindow& window) {
  const auto pts = radial_points(table, window);
  if (distinct_radii(pts) < 2)
    throw InsufficientSignal("fit_exponential: fewer than two distances above the noise floor");
  std::vector<double> xs, ys;
  for (const auto& p : pts) {
    xs.push_back(p.r);
    ys.push_back(std::log(std::abs(p.eta)));
  }
  DecayFit fit;
  fit.law = DecayLaw::exponential;
  fit.dimension = table.dimension();
  return finish_fit(fit, pts, xs, ys);
}

DecayFit fit_algebraic(const CorrelationTable& table, const FitWindow& window) {
  const auto pts = radial_points(table, window);
  if (distinct_radii(pts) < 2)
    throw InsufficientSignal("fit_algebraic: fewer than two distances above the noise floor");
  std::vector<double> xs, ys;
  for (const auto& p : pts) {
    xs.push_back(std::log(p.r));
    ys.push_back(std::log(std::abs(p.eta)));
  }
  DecayFit fit;
  fit.law = DecayLaw::algebraic;
  fit.dimension = table.dimension();
  return finish_fit(fit, pts, xs, ys);
}

DecayFit fit_oz(const CorrelationTable& table, const Displacement& direction, const FitWindow& window) {
  if (static_cast<int>(direction.size()) != table.dimension())
    throw PreconditionError("fit_oz: direction dimension mismatch");
  const double unit = euclidean_norm(direction);
  if (unit == 0.0)
    throw PreconditionError("fit_oz: zero direction");
  const double r_max = window.r_max.value_or(static_cast<double>(table.radius()));
  const double prefactor_power = 0.5 * (table.dimension() - 1);

  std::vector<FitPoint> pts;
  std::vector<double> xs, ys;
  for (int m = 1;; ++m) {
    Displacement x = direction;
    for (int& c : x)
      c *= m;
    if (!table.contains(x))
      break;
    const double r = m * unit;
    if (r < window.r_min || r > r_max)
      continue;
    const double e = table.eta(x), s = table.std_err(x);
    if (!above_noise(e, s))
      continue;
    pts.push_back({r, e, s});
    xs.push_back(r);
    ys.push_back(std::log(std::abs(e)) + prefactor_power * std::log(r));
  }
  if (pts.size() < 3)
    throw InsufficientSignal("fit_oz: fewer than three usable points along the direction");
  DecayFit fit;
  fit.law = DecayLaw::oz;
  fit.dimension = table.dimension();
  fit.direction = direction;
  return finish_fit(fit, pts, xs, ys);
}

double shell_count(int d, int n) {
  if (n == 0)
    return 1.0;
  return std::pow(2.0 * n + 1.0, d) - std::pow(2.0 * n - 1.0, d);
}

namespace {

// Bound on sum_{n >= n0} shell_count(d, n) n^a for a + d < 0, via
// shell_count(d, n) <= 2d (2n+1)^{d-1} <= K n^{d-1} and an integral comparison.
double power_remainder(int d, double n0, double a) {
  const double b = a + d - 1.0;
  const double K = 2.0 * d * std::pow(2.0, d - 1) * std::pow(1.0 + 1.0 / (2.0 * n0), d - 1);
  return K * (std::pow(n0, b) + std::pow(n0, b + 1.0) / (-b - 1.0));
}

} // namespace

double shell_tail(int d, int R, double a, double eps) {
  if (d < 1 || R < 0)
    throw PreconditionError("shell_tail: bad dimension or radius");
  if (eps < 0 || (eps == 0 && !(a < -d)))
    throw PreconditionError("shell_tail: divergent tail");
  NeumaierSum sum;
  if (eps == 0) {
    constexpr int kTerms = 10000;
    for (int n = R + 1; n <= R + kTerms; ++n)
      sum.add(shell_count(d, n) * std::pow(n, a));
    return sum.value() + power_remainder(d, R + kTerms + 1.0, a);
  }

  // term(n) <= g(n) = 2d (2n+1)^{d-1} n^a e^{-eps n}; successive ratios of g
  // decrease in n, so beyond n1 the tail is geometric with ratio q(n1+1).
  auto g = [&](double n) { return 2.0 * d * std::pow(2.0 * n + 1.0, d - 1) * std::pow(n, a) * std::exp(-eps * n); };
  auto ratio = [&](double n) {
    return std::pow((2.0 * n + 3.0) / (2.0 * n + 1.0), d - 1) * std::max(1.0, std::pow((n + 1.0) / n, a)) *
           std::exp(-eps);
  };
  int n = R + 1;
  for (;; ++n) {
    const double term = shell_count(d, n) * std::pow(n, a) * std::exp(-eps * n);
    sum.add(term);
    const double q = ratio(n + 1.0);
    if (q < 1.0 && (g(n + 1.0) / (1.0 - q) <= 1e-17 * sum.value() || g(n + 1.0) == 0.0))
      return sum.value() + g(n + 1.0) / (1.0 - q);
    if (n - R > 10'000'000)
      return sum.value() + (q < 1.0 ? g(n + 1.0) / (1.0 - q) : std::numeric_limits<double>::infinity());
  }
}

double coth_bound(double eps, int d, double C) {
  if (!(eps > 0))
    throw PreconditionError("coth_bound: epsilon must be positive");
  if (d < 1)
    throw PreconditionError("coth_bound: dimension must be positive");
  return C * std::pow(1.0 / std::tanh(eps / (2.0 * std::sqrt(static_cast<double>(d)))), d);
}

double zeta_bound(double p, int d, double C, int partial_terms) {
  if (d < 1)
    throw PreconditionError("zeta_bound: dimension must be positive");
  if (!(p > d))
    throw PreconditionError("zeta_bound: p must exceed the dimension (divergent sum)");
  if (partial_terms < 1)
    throw PreconditionError("zeta_bound: need at least one explicit shell");
  NeumaierSum s;
  for (int n = 1; n <= partial_terms; ++n)
    s.add(shell_count(d, n) * std::pow(n, -p));
  return 1.0 + C * (s.value() + power_remainder(d, partial_terms + 1.0, -p));
}

std::optional<double> tail_certificate(const DecayFit& fit, int R) {
  if (!fit.ok || fit.poor)
    return std::nullopt;
  switch (fit.law) {
  case DecayLaw::exponential:
    return fit.C * shell_tail(fit.dimension, R, 0.0, fit.rate);
  case DecayLaw::algebraic:
    if (!(fit.rate > fit.dimension))
      return std::nullopt;
    return fit.C * shell_tail(fit.dimension, R, -fit.rate, 0.0);
  case DecayLaw::oz:
    return std::nullopt; // one direction only; not a uniform bound
  }
  return std::nullopt;
}

SummabilityProfile summability_profile(const CorrelationTable& table) {
  const int R = table.radius();
  std::vector<NeumaierSum> shells(static_cast<std::size_t>(R) + 1);
  for (const auto& x : table.displacements()) {
    const int n = max_norm(x);
    if (n > R)
      continue;
    const double mult = n == 0 ? 1.0 : 2.0;
    shells[static_cast<std::size_t>(n)].add(mult * std::abs(table.eta(x)));
  }
  SummabilityProfile prof;
  double running = 0.0;
  for (int n = 0; n <= R; ++n) {
    const double inc = shells[static_cast<std::size_t>(n)].value();
    running += inc;
    prof.partial_sums.push_back(running);
    if (n > 0)
      prof.increments.push_back(inc);
  }
  return prof;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> parse_ints(const std::string& s) {
  std::istringstream is(s);
  std::vector<int> v;
  int x;
  while (is >> x)
    v.push_back(x);
  return v;
}

} // namespace

void write_table(std::ostream& os, const CorrelationTable& t) {
  os << "# latdiff correlation-table\n"
     << "# convention = " << kConventionTag << '\n'
     << "# quantity = " << to_string(t.quantity()) << '\n'
     << "# source = " << to_string(t.source()) << '\n'
     << "# dimension = " << t.dimension() << '\n'
     << "# window = " << join_ints(t.window()) << '\n'
     << "# torus = " << (t.torus_sides.empty() ? std::string("none") : join_ints(t.torus_sides)) << '\n'
     << "# beta = " << format_double(t.beta) << '\n';
  for (int i = 1; i <= t.dimension(); ++i)
    os << 'x' << i << '\t';
  os << "eta\tstd_err\n";
  for (const auto& x : t.displacements()) {
    for (int c : x)
      os << c << '\t';
    os << format_double(t.eta(x)) << '\t' << format_double(t.std_err(x)) << '\n';
  }
}

CorrelationTable read_table(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::vector<std::string> rows;
  bool first = true;
  while (std::getline(is, line)) {
    if (first && line != "# latdiff correlation-table")
      throw PreconditionError("not a correlation table");
    first = false;
    if (line.empty())
      continue;
    if (line[0] == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos)
        kv[line.substr(2, eq - 2)] = line.substr(eq + 3);
      continue;
    }
    if (line[0] == 'x')
      continue; // column names
    rows.push_back(line);
  }
  if (first)
    throw PreconditionError("not a correlation table");
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end())
      throw PreconditionError(std::string("correlation table: missing header `") + key + "`");
    return it->second;
  };
  if (get("convention") != kConventionTag)
    throw PreconditionError("correlation table uses convention `" + get("convention") + "`");
  const auto window = parse_ints(get("window"));
  const int d = std::stoi(get("dimension"));
  if (static_cast<int>(window.size()) != d)
    throw PreconditionError("correlation table: window does not match dimension");
  const TableSource src = get("source") == "exact" ? TableSource::exact : TableSource::mcmc;
  const Quantity q = get("quantity") == "density" ? Quantity::density : Quantity::spin;
  CorrelationTable t(window, src, q);
  if (get("torus") != "none")
    t.torus_sides = parse_ints(get("torus"));
  t.beta = std::stod(get("beta"));
  if (rows.size() != t.displacements().size())
    throw PreconditionError("correlation table: row count does not match the window");
  for (const auto& r : rows) {
    std::istringstream rs(r);
    Displacement x(static_cast<std::size_t>(d));
    std::string eta, err;
    for (auto& c : x)
      rs >> c;
    rs >> eta >> err;
    if (!rs)
      throw PreconditionError("correlation table: malformed row `" + r + "`");
    t.set(x, std::stod(eta), std::stod(err));
  }
  return t;
}

void write_fit(std::ostream& os, const DecayFit& fit) {
  os << "[fit " << to_string(fit.law) << "]\n"
     << "C = " << format_double(fit.C) << '\n'
     << "rate = " << format_double(fit.rate) << '\n'
     << "rate_err = " << format_double(fit.rate_err) << '\n';
  if (!fit.direction.empty())
    os << "direction = " << join_ints(fit.direction) << '\n';
  os << "r_min = " << format_double(fit.r_min) << '\n'
     << "r_max = " << format_double(fit.r_max) << '\n'
     << "n_points = " << fit.n_points << '\n'
     << "residual_rms = " << format_double(fit.residual_rms) << '\n'
     << "reduced_chi2 = " << format_double(fit.reduced_chi2) << '\n'
     << "weighted = " << (fit.weighted ? "true" : "false") << '\n'
     << "ok = " << (fit.ok ? "true" : "false") << '\n'
     << "poor = " << (fit.poor ? "true" : "false") << '\n'
     << "message = " << fit.message << '\n';
}

} // namespace latdiff
