#include "latdiff/jobs.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "latdiff/diffraction.hpp"
#include "latdiff/numeric.hpp"
#include "latdiff/oracle.hpp"

namespace latdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- config parsing -------------------------------------------------------

template <class T>
T field(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key))
    throw ConfigError(path + "." + key + ": missing required field");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type (" + std::string(obj.at(key).type_name()) + ")");
  }
}

template <class T>
T field_or(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null())
    return fallback;
  return field<T>(obj, path, key);
}

const json& section(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_object())
    throw ConfigError(std::string(key) + ": missing section");
  return doc.at(key);
}

void parse_model(const json& m, JobConfig& cfg) {
  const int d = field<int>(m, "model", "dimension");
  if (d < 1 || d > 3)
    throw ConfigError("model.dimension: must be 1, 2 or 3");

  if (m.contains("basis")) {
    const auto rows = field<std::vector<std::vector<double>>>(m, "model", "basis");
    if (static_cast<int>(rows.size()) != d)
      throw ConfigError("model.basis: expected " + std::to_string(d) + " rows");
    Eigen::MatrixXd A(d, d);
    for (int i = 0; i < d; ++i) {
      if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != d)
        throw ConfigError("model.basis: row " + std::to_string(i) + " has the wrong length");
      for (int j = 0; j < d; ++j)
        A(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    LatticeCoupling lc;
    lc.dimension = d;
    if (!m.contains("couplings") || !m.at("couplings").is_array())
      throw ConfigError("model.couplings: a basis needs a list of {displacement, value} entries");
    for (const auto& e : m.at("couplings")) {
      const auto r = field<std::vector<double>>(e, "model.couplings[]", "displacement");
      if (static_cast<int>(r.size()) != d)
        throw ConfigError("model.couplings[].displacement: wrong dimension");
      lc.entries.push_back({Eigen::Map<const Eigen::VectorXd>(r.data(), d), field<double>(e, "model.couplings[]", "value")});
    }
    try {
      auto mapped = lattice_to_zd(lc, LatticeBasis(A));
      cfg.J = mapped.J;
      cfg.range_bound = mapped.range_bound;
    } catch (const PreconditionError& e) {
      throw ConfigError(std::string("model.basis: ") + e.what());
    }
    return;
  }

  const std::string preset = field_or<std::string>(m, "model", "preset", "");
  if (preset == "nearest_neighbour") {
    cfg.J = nearest_neighbour(d, field<double>(m, "model", "J"));
  } else if (preset == "zero") {
    cfg.J = CouplingMap(d);
  } else if (preset.empty()) {
    if (!m.contains("couplings"))
      throw ConfigError("model: give `preset` or `couplings`");
    json doc = {{"dimension", d}, {"entries", m.at("couplings")}};
    try {
      cfg.J = coupling_from_json(doc);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("model.couplings: ") + e.what());
    }
  } else {
    throw ConfigError("model.preset: unknown preset `" + preset + "` (nearest_neighbour, zero)");
  }
}

} // namespace

JobConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("syntax error at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
  if (!doc.is_object())
    throw ConfigError("config: top level must be an object");
  const int version = field<int>(doc, "config", "spec_version");
  if (version != kConfigVersion)
    throw ConfigError("spec_version: unsupported version " + std::to_string(version));

  JobConfig cfg;
  parse_model(section(doc, "model"), cfg);
  const int d = cfg.J.dimension();

  const json& r = section(doc, "run");
  cfg.run.sides = field<std::vector<int>>(r, "run", "sides");
  if (static_cast<int>(cfg.run.sides.size()) != d)
    throw ConfigError("run.sides: expected " + std::to_string(d) + " entries");
  cfg.run.beta = field<double>(r, "run", "beta");
  if (!(cfg.run.beta >= 0) || !std::isfinite(cfg.run.beta))
    throw ConfigError("run.beta: must be finite and nonnegative");
  cfg.run.seed = field_or<std::uint64_t>(r, "run", "seed", 1);
  if (r.contains("burn_in") && !r.at("burn_in").is_null())
    cfg.run.burn_in = field<std::uint64_t>(r, "run", "burn_in");
  cfg.run.samples = field_or<std::uint64_t>(r, "run", "samples", 1000);
  cfg.run.thin = field_or<std::uint64_t>(r, "run", "thin", 1);
  try {
    cfg.run.algorithm = algorithm_from_string(field_or<std::string>(r, "run", "algorithm", "metropolis"));
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("run.algorithm: ") + e.what());
  }
  cfg.run.chains = field_or<unsigned>(r, "run", "chains", 1);
  if (cfg.run.chains < 1)
    throw ConfigError("run.chains: must be at least 1");

  if (doc.contains("analysis")) {
    const json& a = section(doc, "analysis");
    const auto mode = field_or<std::string>(a, "analysis", "mode", "mcmc");
    if (mode != "mcmc" && mode != "exact")
      throw ConfigError("analysis.mode: expected `mcmc` or `exact`");
    cfg.analysis.mode = mode == "exact" ? AnalysisMode::exact : AnalysisMode::mcmc;
    if (a.contains("window"))
      cfg.analysis.window = field<std::vector<int>>(a, "analysis", "window");
    cfg.analysis.fit.r_min = field_or<double>(a, "analysis", "r_min", 2.0);
    if (a.contains("r_max") && !a.at("r_max").is_null())
      cfg.analysis.fit.r_max = field<double>(a, "analysis", "r_max");
    cfg.analysis.grid = field_or<int>(a, "analysis", "grid", 0);
    cfg.analysis.t = field_or<double>(a, "analysis", "t", 0.1);
    if (a.contains("p"))
      cfg.analysis.p = field<double>(a, "analysis", "p");
    cfg.analysis.enumeration_cap = field_or<std::size_t>(a, "analysis", "enumeration_cap", kEnumerationDefaultCap);
    if (a.contains("directions"))
      cfg.analysis.directions = field<std::vector<Displacement>>(a, "analysis", "directions");
  }
  if (cfg.analysis.directions.empty())
    for (int i = 0; i < d; ++i) {
      Displacement u(static_cast<std::size_t>(d), 0);
      u[static_cast<std::size_t>(i)] = 1;
      cfg.analysis.directions.push_back(u);
    }
  for (const auto& u : cfg.analysis.directions)
    if (static_cast<int>(u.size()) != d)
      throw ConfigError("analysis.directions: wrong dimension");
  if (cfg.analysis.window && static_cast<int>(cfg.analysis.window->size()) != d)
    throw ConfigError("analysis.window: expected " + std::to_string(d) + " entries");

  cfg.output = field_or<std::string>(doc, "config", "output", "latdiff-out");
  return cfg;
}

JobConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

json config_to_json(const JobConfig& c) {
  json run = {{"sides", c.run.sides},
              {"beta", c.run.beta},
              {"seed", c.run.seed},
              {"samples", c.run.samples},
              {"thin", c.run.thin},
              {"algorithm", to_string(c.run.algorithm)},
              {"chains", c.run.chains}};
  run["burn_in"] = c.run.burn_in ? json(*c.run.burn_in) : json(nullptr);
  json analysis = {{"mode", c.analysis.mode == AnalysisMode::exact ? "exact" : "mcmc"},
                   {"r_min", c.analysis.fit.r_min},
                   {"grid", c.analysis.grid},
                   {"t", c.analysis.t},
                   {"enumeration_cap", c.analysis.enumeration_cap},
                   {"directions", c.analysis.directions}};
  analysis["r_max"] = c.analysis.fit.r_max ? json(*c.analysis.fit.r_max) : json(nullptr);
  if (c.analysis.window)
    analysis["window"] = *c.analysis.window;
  if (c.analysis.p)
    analysis["p"] = *c.analysis.p;
  return {{"spec_version", kConfigVersion},
          {"model", {{"dimension", c.J.dimension()}, {"couplings", to_json(c.J).at("entries")}}},
          {"run", run},
          {"analysis", analysis},
          {"output", c.output.string()}};
}

// ---- artifacts ------------------------------------------------------------

namespace {

constexpr const char* kManifest = "MANIFEST";

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  std::map<std::string, std::string> m;
  std::ifstream is(dir / kManifest);
  std::string hash, name;
  while (is >> hash >> name)
    m[name] = hash;
  return m;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
  if (!os)
    throw std::runtime_error("cannot write " + (dir / name).string());
  os << text;
  os.close();
  record_artifact(dir, name);
}

std::ostream& logger(const JobContext& ctx) {
  static std::ostringstream sink;
  sink.str("");
  return ctx.log ? *ctx.log : sink;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<int> table_window(const JobConfig& c) {
  if (c.analysis.window)
    return *c.analysis.window;
  std::vector<int> w;
  for (int L : c.run.sides)
    w.push_back(L / 2);
  return w;
}

RunParams base_params(const JobConfig& c) {
  RunParams p{LatticeTorus(c.run.sides), c.J};
  p.beta = c.run.beta;
  p.seed = c.run.seed;
  p.n_samples = c.run.samples;
  p.thin_sweeps = c.run.thin;
  p.algorithm = c.run.algorithm;
  p.burn_in_sweeps = c.run.burn_in.value_or(0);
  return p;
}

void save_config(const JobConfig& c) { write_text(c.output, "config.json", config_to_json(c).dump(2) + "\n"); }

struct FitSet {
  std::vector<DecayFit> fits;
  std::vector<std::string> failures;
};

FitSet run_fits(const CorrelationTable& table, const JobConfig& c, bool with_oz) {
  FitSet fs;
  auto attempt = [&](const std::string& name, auto&& fn) {
    try {
      fs.fits.push_back(fn());
    } catch (const InsufficientSignal& e) {
      fs.failures.push_back("[fit " + name + "]\nstatus = insufficient signal: " + e.what() + "\n");
    }
  };
  attempt("exponential", [&] { return fit_exponential(table, c.analysis.fit); });
  attempt("algebraic", [&] { return fit_algebraic(table, c.analysis.fit); });
  if (with_oz)
    for (const auto& u : c.analysis.directions)
      attempt("oz", [&] { return fit_oz(table, u, c.analysis.fit); });
  return fs;
}

std::optional<CorrelationTable> load_spin_table(const fs::path& dir) {
  std::ifstream is(dir / "correlation_spin.tsv");
  if (!is)
    return std::nullopt;
  return read_table(is);
}

} // namespace

void record_artifact(const fs::path& dir, const std::string& name) {
  auto m = read_manifest(dir);
  m[name] = hex64(fnv1a64(slurp(dir / name)));
  std::ofstream os(dir / kManifest, std::ios::trunc);
  for (const auto& [file, hash] : m)
    os << hash << "  " << file << '\n';
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  std::vector<std::string> bad;
  for (const auto& [name, hash] : read_manifest(dir))
    if (!fs::exists(dir / name) || hex64(fnv1a64(slurp(dir / name))) != hash)
      bad.push_back(name);
  return bad;
}

// ---- commands -------------------------------------------------------------

int cmd_check(const JobConfig& c, const JobContext& ctx) {
  fs::create_directories(c.output);
  const int d = c.J.dimension();
  const double beta = c.run.beta;
  const double p = c.analysis.p.value_or(d + 1.0);
  std::ostringstream os;
  os << "# latdiff conditions\n# convention = " << kConventionTag << '\n';
  os << "beta = " << format_double(beta) << '\n'
     << "dimension = " << d << '\n'
     << "coupling_range = " << format_double(c.J.range()) << '\n';
  if (c.range_bound)
    os << "mapped_range_bound = " << format_double(*c.range_bound) << '\n';
  os << "ferromagnetic = " << (c.J.ferromagnetic() ? "true" : "false") << '\n';

  if (c.J.empty()) {
    os << "dobrushin_sum = 0\n"
       << "Dobrushin holds (0.0000 < 1)\n"
       << "regime: no interaction; all conditions trivially hold\n";
  } else if (beta > 0) {
    const auto dob = dobrushin_check(c.J, beta);
    const double em = exp_moment(c.J, beta, c.analysis.t);
    const double am = alg_moment(c.J, beta, p);
    os << "dobrushin_sum = " << format_double(dob.sum) << '\n'
       << (dob.holds ? "Dobrushin holds (" + fixed4(dob.sum) + " < 1)"
                     : "Dobrushin fails (" + fixed4(dob.sum) + " >= 1); uniqueness not decided by this test")
       << '\n'
       << "sufficient_condition: " << (dob.sufficient_holds ? "holds" : "fails") << " (beta * sum |J| = "
       << fixed4(dob.abs_sum) << ")\n"
       << "dobrushin_threshold_beta = " << format_double(dobrushin_threshold(c.J)) << '\n'
       << "exp_moment(t=" << format_double(c.analysis.t) << ") = " << format_double(em) << " (finite)\n"
       << "alg_moment(p=" << format_double(p) << ") = " << format_double(am) << " (finite"
       << (p > d ? ", p > d" : ", p <= d: not summable") << ")\n";
    if (dob.holds)
      os << "high-temperature regime: Dobrushin holds and the moment conditions are finite; "
            "correlations decay exponentially; spectrum = 1/4 comb + continuous density\n";
    else
      os << "high-temperature regime: not established at this beta\n";
    if (c.J.ferromagnetic()) {
      os << "regime: finite-range ferromagnetic; valid for all beta < beta_c\n";
      if (d == 1)
        os << "beta_c = inf (d = 1): every beta is above the critical temperature\n";
      else if (d == 2 && c.J == nearest_neighbour(2, c.J.entries().front().value)) {
        const double bc = std::log(1.0 + std::numbers::sqrt2) / 2.0 / c.J.entries().front().value;
        os << "beta_c = " << format_double(bc) << " (square-lattice nearest neighbour); beta "
           << (beta < bc ? "<" : ">=") << " beta_c\n";
      }
    } else {
      os << "regime: couplings of mixed sign; only the Dobrushin route applies\n";
    }
  } else {
    os << "dobrushin_sum = 0\nDobrushin holds (0.0000 < 1)\nregime: infinite temperature\n";
  }
  const std::string text = os.str();
  write_text(c.output, "check.txt", text);
  save_config(c);
  logger(ctx) << text;
  return kExitOk;
}

int cmd_simulate(const JobConfig& c, const JobContext& ctx) {
  fs::create_directories(c.output);
  RunParams base = base_params(c);
  validate(base);
  if (!c.run.burn_in)
    base.burn_in_sweeps = suggest_burn_in(base);

  std::vector<RunParams> chains;
  for (unsigned i = 0; i < c.run.chains; ++i) {
    RunParams p = base;
    p.seed = c.run.seed + i;
    chains.push_back(p);
  }
  ChainsResult res = parallel_chains(chains, ctx.threads);

  write_samples(c.output / "samples.bin", {base.torus, base.beta, base.seed, kConventionTag}, res.samples);
  record_artifact(c.output, "samples.bin");
  std::ostringstream st;
  write_stats(st, res.merged);
  st << "burn_in_sweeps = " << base.burn_in_sweeps << '\n'
     << "thin_sweeps = " << base.thin_sweeps << '\n'
     << "algorithm = " << to_string(base.algorithm) << '\n'
     << "seeds =";
  for (const auto& p : chains)
    st << ' ' << p.seed;
  st << '\n';
  write_text(c.output, "stats.txt", st.str());
  if (res.per_chain.size() > 1)
    for (std::size_t i = 0; i < res.per_chain.size(); ++i) {
      std::ostringstream cs;
      write_stats(cs, res.per_chain[i]);
      write_text(c.output, "stats_chain_" + std::to_string(i) + ".txt", cs.str());
    }
  save_config(c);
  logger(ctx) << "simulated " << res.samples.size() << " samples; mean_spin = " << format_double(res.merged.mean_spin)
              << " +- " << format_double(res.merged.mean_spin_err) << '\n';
  return kExitOk;
}

int cmd_analyze(const JobConfig& c, const JobContext& ctx) {
  fs::create_directories(c.output);
  const auto window = table_window(c);
  const LatticeTorus torus(c.run.sides);
  std::optional<CorrelationTable> table;
  if (c.analysis.mode == AnalysisMode::exact) {
    EnumerationOptions opt;
    opt.max_sites = c.analysis.enumeration_cap;
    opt.window = window;
    table = enumerate_exact(torus, c.J, c.run.beta, opt).correlations;
  } else {
    if (!fs::exists(c.output / "samples.bin"))
      throw PreconditionError("analyze: missing inputs (no samples.bin in " + c.output.string() +
                              "; run `simulate` first or use analysis.mode = exact)");
    const auto rec = read_samples(c.output / "samples.bin");
    if (!(rec.header.torus == torus))
      throw PreconditionError("analyze: sample record torus does not match the config");
    table = estimate_correlations(rec.samples, window);
    table->beta = rec.header.beta;
  }

  std::ostringstream spin, density;
  write_table(spin, *table);
  write_table(density, spin_to_density(*table));
  write_text(c.output, "correlation_spin.tsv", spin.str());
  write_text(c.output, "correlation_density.tsv", density.str());

  const FitSet fits = run_fits(*table, c, true);
  std::ostringstream fo, co;
  fo << "# latdiff decay fits\n# convention = " << kConventionTag << '\n';
  for (const auto& f : fits.fits)
    write_fit(fo, f);
  for (const auto& f : fits.failures)
    fo << f;
  write_text(c.output, "fits.txt", fo.str());

  const int d = table->dimension();
  const int R = table->radius();
  co << "# latdiff bound certificates\n# convention = " << kConventionTag << '\n' << "R = " << R << '\n';
  for (const auto& f : fits.fits) {
    if (f.law == DecayLaw::oz || !f.ok)
      continue;
    if (f.law == DecayLaw::exponential)
      co << "coth_bound(eps=" << format_double(f.rate) << ", C=" << format_double(f.C)
         << ") = " << format_double(coth_bound(f.rate, d, f.C)) << '\n';
    else if (f.rate > d)
      co << "zeta_bound(p=" << format_double(f.rate) << ", C=" << format_double(f.C)
         << ") = " << format_double(zeta_bound(f.rate, d, f.C)) << '\n';
    const auto tail = tail_certificate(f, R);
    co << "tail_certificate_" << to_string(f.law) << " = " << (tail ? format_double(*tail) : std::string("none"))
       << '\n';
  }
  const auto prof = summability_profile(*table);
  co << "partial_sums =";
  for (double s : prof.partial_sums)
    co << ' ' << format_double(s);
  co << "\nlast_increment = " << (prof.increments.empty() ? std::string("none") : format_double(prof.increments.back()))
     << '\n';
  write_text(c.output, "certificates.txt", co.str());
  save_config(c);

  std::size_t poor = 0;
  for (const auto& f : fits.fits)
    poor += (!f.ok || f.poor) ? 1 : 0;
  logger(ctx) << "analyzed " << to_string(table->source()) << " table; fits: " << fits.fits.size() << " completed, "
              << poor << " flagged, " << fits.failures.size() << " without signal\n";
  return kExitOk;
}

int cmd_diffract(const JobConfig& c, const JobContext& ctx) {
  fs::create_directories(c.output);
  std::optional<CorrelationTable> table = load_spin_table(c.output);
  const bool have_samples = fs::exists(c.output / "samples.bin");
  std::optional<SampleRecord> rec;
  if (have_samples && c.analysis.mode == AnalysisMode::mcmc)
    rec = read_samples(c.output / "samples.bin");
  if (!table) {
    if (!rec)
      throw PreconditionError("diffract: missing inputs (no correlation_spin.tsv or samples.bin)");
    table = estimate_correlations(rec->samples, table_window(c));
    table->beta = rec->header.beta;
  }

  const FitSet fits = run_fits(*table, c, false);
  DensityOptions opt;
  opt.grid = c.analysis.grid;
  opt.ferromagnetic = c.J.ferromagnetic();
  opt.threads = ctx.threads == 0 ? 1 : ctx.threads;
  DiffractionResult res = density_series(*table, fits.fits, opt);
  if (fs::exists(c.output / "stats.txt") && c.analysis.mode == AnalysisMode::mcmc) {
    std::ifstream is(c.output / "stats.txt");
    const SampleStats st = read_stats(is);
    apply_magnetisation(res, st.mean_spin, st.mean_spin_err);
  }

  std::ostringstream spec;
  write_spectrum(spec, res);
  write_text(c.output, "spectrum.tsv", spec.str());

  const auto per = periodicity_check(res);
  const auto par = parseval_check(res);
  const auto mx = check_bragg_maxima(res);
  const auto pos = positivity_check(res);
  bool failed = !per.pass || !par.pass || mx.status == CheckStatus::fail || pos.status == CheckStatus::fail;

  std::ostringstream pr;
  pr << "# latdiff spectrum properties\n# convention = " << kConventionTag << '\n'
     << "bragg_weight = " << format_double(res.bragg_weight) << " (" << res.bragg_note << ")\n"
     << "truncation_error = " << (res.truncation_known ? format_double(res.truncation_error) : std::string("unknown (no tail certificate)")) << '\n'
     << "periodicity = " << (per.max_shift_deviation <= 1e-12 ? "PASS" : "FAIL") << " (max deviation "
     << format_double(per.max_shift_deviation) << " over " << per.points << " points)\n"
     << "evenness = " << (per.grid_even && per.max_even_deviation <= 1e-12 ? "PASS" : "FAIL") << " (max deviation "
     << format_double(per.max_even_deviation) << ")\n"
     << "parseval = " << (par.pass ? "PASS" : "FAIL") << " (deviation " << format_double(par.deviation) << ")\n"
     << "maxima_at_bragg = " << to_string(mx.status) << " (" << mx.message << "; margin " << format_double(mx.margin_to_min)
     << ")\n"
     << "positivity = " << to_string(pos.status) << " (min " << format_double(pos.min_value) << ")\n";
  const DecayFit* smooth_fit = nullptr;
  for (const auto& f : fits.fits)
    if (f.ok && !smooth_fit)
      smooth_fit = &f;
  if (smooth_fit) {
    const auto sm = smoothness_indicator(*table, *smooth_fit);
    pr << "smoothness = " << to_string(sm.smoothness) << " (" << sm.note << ")\n";
    for (const auto& [s, b] : sm.derivative_tails)
      pr << "derivative_tail[" << s << "] = " << format_double(b) << '\n';
  } else {
    pr << "smoothness = uncertified (no successful decay fit)\n";
  }

  if (rec) {
    const auto sf = empirical_structure_factor(rec->samples);
    std::ostringstream sfo;
    write_structure_factor(sfo, sf);
    write_text(c.output, "structure_factor.tsv", sfo.str());
    const auto cmp = compare_routes(sf, res);
    pr << "bragg_estimator_raw = " << format_double(sf.bragg_raw.mean) << " +- " << format_double(sf.bragg_raw.std_err)
       << '\n'
       << "bragg_estimator = " << format_double(sf.bragg_weight.mean) << " +- "
       << format_double(sf.bragg_weight.std_err) << '\n'
       << "two_route = " << (cmp.consistent ? "PASS" : "FAIL") << " (worst |I - g| / (3 err + trunc) = "
       << format_double(cmp.worst_ratio) << ")\n"
       << "singular_continuous = "
       << (cmp.consistent ? "consistent with absence (pp + ac reconstruction matches)" : "reconstruction mismatch")
       << '\n';
    failed = failed || !cmp.consistent;
  }
  const std::string text = pr.str();
  write_text(c.output, "properties.txt", text);
  save_config(c);
  logger(ctx) << text;
  return failed ? kExitPropertyFail : kExitOk;
}

int cmd_report(const fs::path& dir, const JobContext& ctx) {
  fs::create_directories(dir);
  const auto bad = verify_manifest(dir);
  if (!bad.empty()) {
    std::string names;
    for (const auto& b : bad)
      names += " " + b;
    throw PreconditionError("integrity error: checksum mismatch for" + names);
  }

  static const std::array<const char*, 10> kSections = {"config.json", "check.txt", "stats.txt", "fits.txt",
                                                        "certificates.txt", "properties.txt", nullptr};
  std::ostringstream os;
  os << "# latdiff report\n\nconvention: " << kConventionTag
     << " (E = -1/2 sum_x sum_r J(r) s_x s_(x+r))\n\n";
  bool any = false;
  for (const char* name : kSections) {
    if (!name)
      break;
    if (!fs::exists(dir / name)) {
      continue;
    }
    any = true;
    os << "## " << name << "\n\n```\n" << slurp(dir / name) << "```\n\n";
  }
  std::vector<std::string> missing;
  for (const char* name : kSections)
    if (name && !fs::exists(dir / name))
      missing.push_back(name);

  std::map<std::string, std::string> outcomes;
  if (fs::exists(dir / "acceptance.txt")) {
    any = true;
    std::ifstream is(dir / "acceptance.txt");
    std::string line;
    while (std::getline(is, line)) {
      const auto tab = line.find('\t');
      if (tab != std::string::npos)
        outcomes[line.substr(0, tab)] = line.substr(tab + 1);
    }
  }
  if (!any) {
    os << "no artifacts found in " << dir.string() << "\n";
  } else {
    if (!missing.empty()) {
      os << "## gaps\n\n";
      for (const auto& m : missing)
        os << "- " << m << ": not present\n";
      os << '\n';
    }
    os << "## acceptance criteria\n\n| criterion | outcome |\n|---|---|\n";
    for (const char* crit : kAcceptanceCriteria) {
      const std::string id = std::string(crit).substr(0, std::string(crit).find(' '));
      auto it = outcomes.find(id);
      os << "| " << crit << " | " << (it == outcomes.end() ? "not run" : it->second) << " |\n";
    }
  }
  write_text(dir, "report.md", os.str());
  logger(ctx) << "wrote " << (dir / "report.md").string() << '\n';
  return kExitOk;
}

} // namespace latdiff
