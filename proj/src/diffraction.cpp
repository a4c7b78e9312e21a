#include "latdiff/diffraction.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include <fftw3.h>

#include "latdiff/sampler.hpp"

namespace latdiff {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<int> unravel(std::size_t index, const std::vector<int>& sides) {
  std::vector<int> m(sides.size());
  for (std::size_t i = sides.size(); i-- > 0;) {
    m[i] = static_cast<int>(index % static_cast<std::size_t>(sides[i]));
    index /= static_cast<std::size_t>(sides[i]);
  }
  return m;
}

std::size_t ravel(const std::vector<int>& m, const std::vector<int>& sides) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < sides.size(); ++i)
    idx = idx * static_cast<std::size_t>(sides[i]) + static_cast<std::size_t>(m[i]);
  return idx;
}

} // namespace

double DiffractionResult::evaluate(std::span<const double> k) const {
  if (static_cast<int>(k.size()) != dimension)
    throw PreconditionError("evaluate: k has the wrong dimension");
  NeumaierSum g;
  for (const auto& t : terms) {
    double phase = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
      phase += k[i] * t.x[i];
    g.add(t.coefficient * std::cos(kTwoPi * phase));
  }
  return g.value();
}

std::vector<double> DiffractionResult::grid_point(std::size_t index) const {
  const auto m = unravel(index, std::vector<int>(static_cast<std::size_t>(dimension), grid));
  std::vector<double> k(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    k[i] = static_cast<double>(m[i]) / grid;
  return k;
}

DiffractionResult density_series(const CorrelationTable& table, std::span<const DecayFit> fits,
                                 const DensityOptions& options) {
  if (table.quantity() != Quantity::spin)
    throw PreconditionError("density_series: expects a spin correlation table");
  const int R = table.radius();
  if (R < 1)
    throw PreconditionError("density_series: table window must be at least 1");
  const int d = table.dimension();

  DiffractionResult res;
  res.dimension = d;
  res.window = table.window();
  res.grid = options.grid > 0 ? options.grid : (d <= 2 ? 256 : 64);

  bool ferro = true;
  NeumaierSum abs_coeff;
  for (const auto& x : table.displacements()) {
    const double eta = table.eta(x);
    if (eta < -3.0 * table.std_err(x))
      ferro = false;
    double w = 1.0;
    bool zero = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] != 0)
        zero = false;
      if (!table.torus_sides.empty() && 2 * std::abs(x[i]) == table.torus_sides[i])
        w *= 0.5; // x and -x are the same torus displacement
    }
    const double f = 0.25 * (zero ? 1.0 : 2.0) * w;
    const double c = f * eta;
    res.terms.push_back({x, c, f * table.std_err(x)});
    abs_coeff.add(std::abs(c));
  }
  res.ferromagnetic_source = options.ferromagnetic.value_or(ferro);

  std::optional<double> tail;
  for (const auto& f : fits)
    if (auto t = tail_certificate(f, R))
      tail = tail ? std::min(*tail, *t) : *t;
  if (tail) {
    // cosine and summation rounding, a few ulps of sum |c|
    res.truncation_error = 0.25 * *tail + 8.0 * DBL_EPSILON * abs_coeff.value();
    res.truncation_known = true;
  } else {
    res.truncation_error = std::numeric_limits<double>::quiet_NaN();
    res.truncation_known = false;
  }

  // even cosine table: c[j] == c[M - j] exactly
  const int M = res.grid;
  std::vector<double> cosines(static_cast<std::size_t>(M));
  for (int j = 0; j <= M / 2; ++j)
    cosines[static_cast<std::size_t>(j)] = std::cos(kTwoPi * j / M);
  for (int j = M / 2 + 1; j < M; ++j)
    cosines[static_cast<std::size_t>(j)] = cosines[static_cast<std::size_t>(M - j)];

  std::size_t points = 1;
  for (int i = 0; i < d; ++i)
    points *= static_cast<std::size_t>(M);
  res.values.assign(points, 0.0);
  const std::vector<int> sides(static_cast<std::size_t>(d), M);

  auto evaluate_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const auto m = unravel(p, sides);
      NeumaierSum g;
      for (const auto& t : res.terms) {
        long long phase = 0;
        for (int i = 0; i < d; ++i)
          phase += static_cast<long long>(m[static_cast<std::size_t>(i)]) * t.x[static_cast<std::size_t>(i)];
        phase %= M;
        if (phase < 0)
          phase += M;
        g.add(t.coefficient * cosines[static_cast<std::size_t>(phase)]);
      }
      res.values[p] = g.value();
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, 64));
  if (threads == 1) {
    evaluate_range(0, points);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(evaluate_range, points * t / threads, points * (t + 1) / threads);
    for (auto& th : pool)
      th.join();
  }
  return res;
}

void apply_magnetisation(DiffractionResult& result, double mean_spin, double mean_spin_err) {
  if (mean_spin == 0.0 || std::abs(mean_spin) < 3.0 * mean_spin_err) {
    result.bragg_weight = 0.25;
    result.bragg_note = "exact 1/4 comb (zero magnetisation regime)";
  } else {
    const double n = 0.5 * (1.0 + mean_spin);
    result.bragg_weight = n * n;
    result.bragg_note = "caveat: magnetised run, weight is the squared mean density; the 1/4 comb "
                        "presumes a unique Gibbs measure with <s> = 0";
  }
}

std::string to_string(CheckStatus s) {
  switch (s) {
  case CheckStatus::pass:
    return "PASS";
  case CheckStatus::fail:
    return "FAIL";
  case CheckStatus::warn:
    return "WARN";
  case CheckStatus::degenerate:
    return "DEGENERATE";
  }
  return "?";
}

MaximaReport check_bragg_maxima(const DiffractionResult& result) {
  MaximaReport rep;
  const auto& v = result.values;
  if (v.empty())
    throw PreconditionError("check_bragg_maxima: empty spectrum");
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const std::size_t arg = static_cast<std::size_t>(mx - v.begin());
  rep.argmax = result.grid_point(arg);
  rep.max_value = *mx;
  double next = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i)
    next = std::max(next, v[i]);
  rep.margin_to_next = v.size() > 1 ? v[0] - next : 0.0;
  rep.margin_to_min = v[0] - *mn;

  const double tol = 1e-14 * std::max(1.0, std::abs(*mx));
  if (*mx - *mn <= tol) {
    rep.status = CheckStatus::degenerate;
    rep.message = "degenerate maximum: the density is flat";
    return rep;
  }
  std::string where = "(";
  for (std::size_t i = 0; i < rep.argmax.size(); ++i)
    where += (i ? ", " : "") + format_double(rep.argmax[i]);
  where += ")";
  if (!result.ferromagnetic_source) {
    rep.status = CheckStatus::warn;
    rep.message = "source is not ferromagnetic; claim not asserted; maximum at k = " + where;
    return rep;
  }
  NeumaierSum noise;
  for (const auto& t : result.terms) {
    double phase = 0.0;
    for (std::size_t i = 0; i < t.x.size(); ++i)
      phase += rep.argmax[i] * t.x[i];
    noise.add(3.0 * t.error * (1.0 - std::cos(kTwoPi * phase)));
  }
  if (v[0] >= *mx - tol) {
    rep.status = CheckStatus::pass;
    rep.message = "maximum at k = 0 (mod Z^d)";
  } else if (*mx - v[0] <= noise.value() + tol) {
    rep.status = CheckStatus::pass;
    rep.message = "maximum at k = 0 within sampling error (grid argmax " + where + " exceeds g(0) by " +
                  format_double(*mx - v[0]) + " <= " + format_double(noise.value()) + ")";
  } else {
    rep.status = CheckStatus::fail;
    rep.message = "maximum at k = " + where + ", not at a Bragg position";
  }
  return rep;
}

PeriodicityReport periodicity_check(const DiffractionResult& result, std::size_t points, std::uint64_t seed,
                                    double tol) {
  PeriodicityReport rep;
  rep.points = points;
  Rng rng(seed);
  const auto d = static_cast<std::size_t>(result.dimension);
  std::vector<double> k(d), shifted(d), neg(d);
  for (std::size_t p = 0; p < points; ++p) {
    for (auto& c : k)
      c = rng.uniform();
    const double g = result.evaluate(k);
    for (std::size_t i = 0; i < d; ++i) {
      shifted = k;
      shifted[i] += 1.0;
      rep.max_shift_deviation = std::max(rep.max_shift_deviation, std::abs(result.evaluate(shifted) - g));
      shifted[i] -= 2.0;
      rep.max_shift_deviation = std::max(rep.max_shift_deviation, std::abs(result.evaluate(shifted) - g));
    }
    for (std::size_t i = 0; i < d; ++i)
      neg[i] = -k[i];
    rep.max_even_deviation = std::max(rep.max_even_deviation, std::abs(result.evaluate(neg) - g));
  }

  rep.grid_even = true;
  const std::vector<int> sides(d, result.grid);
  for (std::size_t idx = 0; idx < result.values.size(); ++idx) {
    auto m = unravel(idx, sides);
    for (auto& c : m)
      c = (result.grid - c) % result.grid;
    if (result.values[ravel(m, sides)] != result.values[idx]) {
      rep.grid_even = false;
      break;
    }
  }
  rep.pass = rep.grid_even && rep.max_shift_deviation <= tol && rep.max_even_deviation <= tol;
  return rep;
}

ParsevalReport parseval_check(const DiffractionResult& result, double tol) {
  ParsevalReport rep;
  NeumaierSum mean;
  for (double v : result.values)
    mean.add(v);
  rep.grid_mean = mean.value() / static_cast<double>(result.values.size());
  // the grid average of cos(2 pi <m, x> / M) is 1 iff M divides every x_i
  NeumaierSum expected;
  for (const auto& t : result.terms)
    if (std::all_of(t.x.begin(), t.x.end(), [&](int c) { return c % result.grid == 0; }))
      expected.add(t.coefficient);
  rep.expected = expected.value();
  rep.deviation = std::abs(rep.grid_mean - rep.expected);
  rep.pass = rep.deviation <= tol;
  return rep;
}

PositivityReport positivity_check(const DiffractionResult& result) {
  PositivityReport rep;
  rep.min_value = *std::min_element(result.values.begin(), result.values.end());
  if (!result.truncation_known)
    rep.status = CheckStatus::warn; // nothing certifies the omitted tail
  else
    rep.status = rep.min_value >= -result.truncation_error ? CheckStatus::pass : CheckStatus::fail;
  return rep;
}

std::string to_string(Smoothness s) {
  switch (s) {
  case Smoothness::smooth:
    return "smooth (all orders)";
  case Smoothness::continuous:
    return "continuous";
  case Smoothness::uncertified:
    return "uncertified";
  }
  return "?";
}

SmoothnessReport smoothness_indicator(const CorrelationTable& table, const DecayFit& fit, int max_order) {
  SmoothnessReport rep;
  const int R = table.radius();
  const int d = fit.dimension;
  if (!fit.ok) {
    rep.note = "decay fit failed; no coefficient-decay class";
    return rep;
  }
  // |d^s g| tail <= 1/4 sum_{n > R} shell(n) (2 pi sqrt(d) n)^s bound(n)
  const double deriv_scale = kTwoPi * std::sqrt(static_cast<double>(d));
  if (fit.law == DecayLaw::exponential || fit.law == DecayLaw::oz) {
    rep.smoothness = Smoothness::smooth;
    for (int s = 0; s <= max_order; ++s)
      rep.derivative_tails.emplace_back(s, 0.25 * fit.C * std::pow(deriv_scale, s) *
                                               shell_tail(d, R, static_cast<double>(s), fit.rate));
    rep.note = "exponentially decaying coefficients: density smooth of all orders";
    if (fit.law == DecayLaw::oz)
      rep.note += " (rate from one direction)";
  } else {
    const double p = fit.rate;
    if (!(p > d)) {
      rep.smoothness = Smoothness::uncertified;
      rep.note = "algebraic decay with p <= d: coefficients still vanish at infinity "
                 "(Riemann-Lebesgue) but continuity of the density is not certified";
      return rep;
    }
    rep.smoothness = Smoothness::continuous;
    for (int s = 0; s <= max_order && p - s > d; ++s)
      rep.derivative_tails.emplace_back(s, 0.25 * fit.C * std::pow(deriv_scale, s) *
                                               shell_tail(d, R, s - p, 0.0));
    rep.note = "algebraic decay with p > d: continuous density; derivatives of order s < p - d certified";
  }
  if (fit.poor)
    rep.note += "; fit flagged poor";
  return rep;
}

std::vector<double> StructureFactorEstimate::k(std::size_t index) const {
  const auto m = unravel(index, sides);
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    out[i] = static_cast<double>(m[i]) / sides[i];
  return out;
}

StructureFactorEstimate empirical_structure_factor(const SampleSet& samples, std::size_t batches) {
  const std::size_t n = samples.size();
  if (n < 2)
    throw PreconditionError("empirical_structure_factor: need at least two samples");
  const auto& torus = samples.torus();
  const std::size_t N = torus.sites();
  const std::size_t B = std::min(n, std::max<std::size_t>(batches, 2));

  StructureFactorEstimate sf;
  sf.sides = torus.sides();
  sf.n_samples = n;

  std::vector<int> dims(torus.sides().begin(), torus.sides().end());
  auto* in = fftw_alloc_complex(N);
  auto* out = fftw_alloc_complex(N);
  fftw_plan plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), in, out, FFTW_FORWARD, FFTW_ESTIMATE);

  std::vector<NeumaierSum> batch_sum(B * N);
  std::vector<double> nbar(n), nbar_sq(n);
  std::size_t b = 0;
  for (std::size_t s = 0; s < n; ++s) {
    while ((b + 1) * n / B <= s)
      ++b;
    const auto spins = samples.spins(s);
    long occupied = 0;
    for (std::size_t x = 0; x < N; ++x) {
      const int occ = (spins[x] + 1) / 2;
      occupied += occ;
      in[x][0] = occ;
      in[x][1] = 0.0;
    }
    fftw_execute(plan);
    for (std::size_t q = 0; q < N; ++q)
      batch_sum[b * N + q].add((out[q][0] * out[q][0] + out[q][1] * out[q][1]) / static_cast<double>(N));
    nbar[s] = static_cast<double>(occupied) / static_cast<double>(N);
    nbar_sq[s] = nbar[s] * nbar[s];
  }
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(out);

  sf.intensity.resize(N);
  sf.std_err.resize(N);
  std::vector<double> means(B);
  for (std::size_t q = 0; q < N; ++q) {
    NeumaierSum total;
    for (std::size_t bb = 0; bb < B; ++bb) {
      const double size = static_cast<double>((bb + 1) * n / B - bb * n / B);
      total.add(batch_sum[bb * N + q].value());
      means[bb] = batch_sum[bb * N + q].value() / size;
    }
    const double grand = [&] {
      NeumaierSum m;
      for (double v : means)
        m.add(v);
      return m.value() / static_cast<double>(B);
    }();
    NeumaierSum ss;
    for (double v : means)
      ss.add((v - grand) * (v - grand));
    sf.intensity[q] = total.value() / static_cast<double>(n);
    sf.std_err[q] = std::sqrt(ss.value() / static_cast<double>(B - 1) / static_cast<double>(B));
  }

  sf.bragg_raw = batch_means(nbar_sq, batches);
  const MeanError dens = batch_means(nbar, batches);
  sf.bragg_weight.mean = dens.mean * dens.mean;
  sf.bragg_weight.std_err = 2.0 * std::abs(dens.mean) * dens.std_err;
  return sf;
}

RouteComparison compare_routes(const StructureFactorEstimate& sf, const DiffractionResult& result) {
  RouteComparison rc;
  const double trunc = result.truncation_known ? result.truncation_error : 0.0;
  for (std::size_t q = 1; q < sf.intensity.size(); ++q) {
    const double g = result.evaluate(sf.k(q));
    const double allowance = 3.0 * sf.std_err[q] + trunc;
    const double diff = std::abs(sf.intensity[q] - g);
    const double ratio = allowance > 0 ? diff / allowance : (diff > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    rc.worst_ratio = std::max(rc.worst_ratio, ratio);
    ++rc.points;
  }
  rc.consistent = rc.worst_ratio <= 1.0;
  return rc;
}

namespace {

void write_k_columns(std::ostream& os, int d) {
  for (int i = 1; i <= d; ++i)
    os << 'k' << i << '\t';
}

} // namespace

void write_spectrum(std::ostream& os, const DiffractionResult& r) {
  os << "# latdiff spectrum\n"
     << "# convention = " << kConventionTag << '\n'
     << "# dimension = " << r.dimension << '\n'
     << "# bragg_weight = " << format_double(r.bragg_weight) << '\n'
     << "# bragg_note = " << r.bragg_note << '\n'
     << "# truncation_error = " << format_double(r.truncation_error) << '\n'
     << "# truncation_known = " << (r.truncation_known ? "true" : "false") << '\n'
     << "# window =";
  for (int w : r.window)
    os << ' ' << w;
  os << "\n# grid = " << r.grid << '\n';
  write_k_columns(os, r.dimension);
  os << "g\n";
  for (std::size_t p = 0; p < r.values.size(); ++p) {
    for (double k : r.grid_point(p))
      os << format_double(k) << '\t';
    os << format_double(r.values[p]) << '\n';
  }
}

void write_structure_factor(std::ostream& os, const StructureFactorEstimate& sf) {
  os << "# latdiff structure-factor\n"
     << "# convention = " << kConventionTag << '\n'
     << "# dimension = " << sf.sides.size() << '\n'
     << "# torus =";
  for (int L : sf.sides)
    os << ' ' << L;
  os << "\n# n_samples = " << sf.n_samples << '\n'
     << "# bragg_raw = " << format_double(sf.bragg_raw.mean) << " +- " << format_double(sf.bragg_raw.std_err) << '\n'
     << "# bragg_weight = " << format_double(sf.bragg_weight.mean) << " +- "
     << format_double(sf.bragg_weight.std_err) << '\n';
  write_k_columns(os, static_cast<int>(sf.sides.size()));
  os << "I\tstd_err\n";
  for (std::size_t q = 0; q < sf.intensity.size(); ++q) {
    for (double k : sf.k(q))
      os << format_double(k) << '\t';
    os << format_double(sf.intensity[q]) << '\t' << format_double(sf.std_err[q]) << '\n';
  }
}

} // namespace latdiff
