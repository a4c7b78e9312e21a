#include "latdiff/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "latdiff/numeric.hpp"

namespace latdiff {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0)
    throw PreconditionError("Rng::below: empty range");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

std::string to_string(Algorithm a) { return a == Algorithm::wolff ? "wolff" : "metropolis"; }

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "metropolis")
    return Algorithm::metropolis;
  if (name == "wolff")
    return Algorithm::wolff;
  throw PreconditionError("unknown algorithm `" + name + "` (expected metropolis or wolff)");
}

void validate(const RunParams& p) {
  check_admissible(p.torus, p.J);
  if (p.n_samples == 0)
    throw PreconditionError("run: n_samples must be positive");
  if (p.thin_sweeps == 0)
    throw PreconditionError("run: thin_sweeps must be positive");
  if (!(p.beta >= 0) || !std::isfinite(p.beta))
    throw PreconditionError("run: beta must be finite and nonnegative");
  if (p.algorithm == Algorithm::wolff && !p.J.ferromagnetic())
    throw PreconditionError("run: Wolff updates require a ferromagnetic coupling map");
}

void SampleSet::push_back(std::span<const std::int8_t> spins) {
  if (spins.size() != torus_.sites())
    throw PreconditionError("SampleSet: configuration size mismatch");
  spins_.insert(spins_.end(), spins.begin(), spins.end());
}

SpinConfiguration SampleSet::at(std::size_t i) const {
  auto s = spins(i);
  return SpinConfiguration(torus_, std::vector<std::int8_t>(s.begin(), s.end()));
}

void SampleSet::append(const SampleSet& other) {
  if (!(other.torus_ == torus_))
    throw PreconditionError("SampleSet: cannot append samples from a different torus");
  spins_.insert(spins_.end(), other.spins_.begin(), other.spins_.end());
}

SampleSet SampleSet::reversed() const {
  SampleSet out(torus_);
  for (std::size_t i = size(); i-- > 0;)
    out.push_back(spins(i));
  return out;
}

void metropolis_sweep(SpinConfiguration& config, const NeighbourTable& table, double beta, Rng& rng) {
  auto spins = config.spins();
  for (std::size_t s = 0; s < spins.size(); ++s) {
    const double dE = 2.0 * spins[s] * table.local_field(spins, s);
    const double x = beta * dE;
    bool accept;
    if (x < 0)
      accept = true;
    else if (x == 0)
      accept = rng.coin();
    else
      accept = rng.uniform() < std::exp(-x);
    if (accept)
      spins[s] = static_cast<std::int8_t>(-spins[s]);
  }
}

namespace {

// Per-link activation probabilities, indexed like NeighbourTable::links.
std::vector<double> bond_probabilities(const NeighbourTable& table, double beta) {
  std::vector<double> p;
  if (table.sites() == 0)
    return p;
  for (const auto& l : table.links(0)) {
    if (l.coupling < 0)
      throw PreconditionError("wolff: coupling map is not ferromagnetic");
    p.push_back(-std::expm1(-2.0 * beta * l.coupling));
  }
  return p;
}

// `mark` must be all zero on entry and is left all zero.
std::size_t grow_and_flip(SpinConfiguration& config, const NeighbourTable& table,
                          std::span<const double> prob, Rng& rng, std::vector<std::uint8_t>& mark,
                          std::vector<std::uint32_t>& cluster) {
  auto spins = config.spins();
  const auto seed = static_cast<std::uint32_t>(rng.below(spins.size()));
  const std::int8_t orient = spins[seed];
  cluster.clear();
  cluster.push_back(seed);
  mark[seed] = 1;
  // cluster doubles as the work queue: entries before `next` are processed
  for (std::size_t next = 0; next < cluster.size(); ++next) {
    const std::uint32_t x = cluster[next];
    const auto links = table.links(x);
    for (std::size_t k = 0; k < links.size(); ++k) {
      const std::uint32_t y = links[k].site;
      if (mark[y] || spins[y] != orient)
        continue;
      if (prob[k] > 0 && rng.uniform() < prob[k]) {
        mark[y] = 1;
        cluster.push_back(y);
      }
    }
  }
  for (std::uint32_t x : cluster) {
    spins[x] = static_cast<std::int8_t>(-orient);
    mark[x] = 0;
  }
  return cluster.size();
}

} // namespace

std::size_t wolff_step(SpinConfiguration& config, const NeighbourTable& table, double beta, Rng& rng) {
  const auto prob = bond_probabilities(table, beta);
  std::vector<std::uint8_t> mark(config.size());
  std::vector<std::uint32_t> stack;
  return grow_and_flip(config, table, prob, rng, mark, stack);
}

void wolff_sweep(SpinConfiguration& config, const NeighbourTable& table, double beta, Rng& rng) {
  const auto prob = bond_probabilities(table, beta);
  std::vector<std::uint8_t> mark(config.size());
  std::vector<std::uint32_t> stack;
  std::size_t flipped = 0;
  while (flipped < config.size())
    flipped += grow_and_flip(config, table, prob, rng, mark, stack);
}

std::size_t wolff_steps_per_sweep(const SpinConfiguration& config, const NeighbourTable& table, double beta,
                                  Rng& rng, std::size_t pilot) {
  const auto prob = bond_probabilities(table, beta);
  SpinConfiguration copy = config;
  std::vector<std::uint8_t> mark(copy.size());
  std::vector<std::uint32_t> stack;
  std::size_t flipped = 0, steps = 0;
  while (flipped < pilot * copy.size()) {
    flipped += grow_and_flip(copy, table, prob, rng, mark, stack);
    ++steps;
  }
  const double mean_cluster = static_cast<double>(flipped) / static_cast<double>(steps);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(copy.size()) / mean_cluster)));
}

SampleStats run_streaming(const RunParams& params, const SampleVisitor& visit) {
  validate(params);
  const NeighbourTable table(params.torus, params.J);
  SpinConfiguration config(params.torus);
  Rng rng(params.seed);
  const bool wolff = params.algorithm == Algorithm::wolff;
  for (std::uint64_t i = 0; i < params.burn_in_sweeps; ++i) {
    if (wolff)
      wolff_sweep(config, table, params.beta, rng);
    else
      metropolis_sweep(config, table, params.beta, rng);
  }

  // sampling sweeps use a fixed cluster count so the sampled law is exact
  const std::size_t steps = wolff ? wolff_steps_per_sweep(config, table, params.beta, rng) : 0;
  const auto prob = wolff ? bond_probabilities(table, params.beta) : std::vector<double>{};
  std::vector<std::uint8_t> mark(wolff ? config.size() : 0);
  std::vector<std::uint32_t> cluster;
  auto sweep = [&] {
    if (wolff)
      for (std::size_t k = 0; k < steps; ++k)
        grow_and_flip(config, table, prob, rng, mark, cluster);
    else
      metropolis_sweep(config, table, params.beta, rng);
  };

  const double n_sites = static_cast<double>(params.torus.sites());
  std::vector<double> mags, energies;
  mags.reserve(params.n_samples);
  energies.reserve(params.n_samples);
  for (std::uint64_t s = 0; s < params.n_samples; ++s) {
    for (std::uint64_t i = 0; i < params.thin_sweeps; ++i)
      sweep();
    const auto spins = config.spins();
    long total = 0;
    double e = 0.0;
    for (std::size_t x = 0; x < spins.size(); ++x) {
      total += spins[x];
      e += spins[x] * table.local_field(spins, x);
    }
    mags.push_back(static_cast<double>(total) / n_sites);
    energies.push_back(-0.5 * e / n_sites);
    if (visit)
      visit(config, s);
  }

  SampleStats st;
  st.n_samples = params.n_samples;
  NeumaierSum m, e;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    m.add(mags[i]);
    e.add(energies[i]);
  }
  const double n = static_cast<double>(mags.size());
  st.mean_spin = m.value() / n;
  st.mean_energy_per_site = e.value() / n;
  const double tau = integrated_autocorrelation_time(mags);
  st.integrated_autocorrelation_time = tau * static_cast<double>(params.thin_sweeps);
  if (mags.size() > 1) {
    NeumaierSum ss;
    for (double v : mags)
      ss.add((v - st.mean_spin) * (v - st.mean_spin));
    const double var = ss.value() / (n - 1.0);
    st.mean_spin_err = std::sqrt(var * 2.0 * tau / n);
  }
  return st;
}

RunResult run(const RunParams& params) {
  validate(params);
  RunResult out{SampleSet(params.torus), {}};
  out.stats = run_streaming(params, [&](const SpinConfiguration& c, std::uint64_t) {
    out.samples.push_back(c.spins());
  });
  return out;
}

SampleStats merge_stats(std::span<const SampleStats> stats) {
  SampleStats out;
  if (stats.empty())
    return out;
  if (stats.size() == 1)
    return stats[0];
  NeumaierSum m, e, tau, var;
  double total = 0.0;
  for (const auto& s : stats) {
    const double n = static_cast<double>(s.n_samples);
    total += n;
    m.add(n * s.mean_spin);
    e.add(n * s.mean_energy_per_site);
    tau.add(n * s.integrated_autocorrelation_time);
    var.add(n * n * s.mean_spin_err * s.mean_spin_err);
  }
  out.n_samples = static_cast<std::uint64_t>(total);
  out.mean_spin = m.value() / total;
  out.mean_energy_per_site = e.value() / total;
  out.integrated_autocorrelation_time = tau.value() / total;
  out.mean_spin_err = std::sqrt(var.value()) / total;
  return out;
}

ChainsResult parallel_chains(const std::vector<RunParams>& chains, unsigned threads) {
  if (chains.empty())
    throw PreconditionError("parallel_chains: no chains");
  std::set<std::uint64_t> seeds;
  for (const auto& c : chains) {
    validate(c);
    if (!seeds.insert(c.seed).second)
      throw PreconditionError("parallel_chains: duplicate seed " + std::to_string(c.seed));
    if (!(c.torus == chains.front().torus))
      throw PreconditionError("parallel_chains: chains must share one torus");
  }

  std::vector<std::optional<RunResult>> results(chains.size());
  if (threads == 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(chains.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(chains.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < chains.size(); i = next++) {
      try {
        results[i] = run(chains[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool)
    t.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);

  ChainsResult out{SampleSet(chains.front().torus), {}, {}};
  for (auto& r : results) {
    out.samples.append(r->samples);
    out.per_chain.push_back(r->stats);
  }
  out.merged = merge_stats(out.per_chain);
  return out;
}

std::uint64_t suggest_burn_in(const RunParams& params, std::uint64_t pilot_samples) {
  RunParams pilot = params;
  pilot.burn_in_sweeps = 100;
  pilot.thin_sweeps = 1;
  pilot.n_samples = std::max<std::uint64_t>(pilot_samples, 2);
  const SampleStats st = run_streaming(pilot, nullptr);
  const auto scaled = static_cast<std::uint64_t>(std::ceil(100.0 * st.integrated_autocorrelation_time));
  return std::max<std::uint64_t>(1000, scaled);
}

namespace {

constexpr char kMagic[16] = {'L', 'A', 'T', 'D', 'I', 'F', 'F', '-', 'S', 'A', 'M', 'P', 'L', 'E', 'S', '\0'};
constexpr std::uint32_t kRecordVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i)
    b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw PreconditionError("sample record: truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | b[i];
  return v;
}
std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw PreconditionError("sample record: truncated file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i)
    v = (v << 8) | b[i];
  return v;
}

} // namespace

void write_samples(const std::filesystem::path& path, const SampleRecordHeader& header,
                   const SampleSet& samples) {
  if (!(header.torus == samples.torus()))
    throw PreconditionError("write_samples: header torus does not match samples");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof kMagic);
  put_u32(os, kRecordVersion);
  put_u32(os, static_cast<std::uint32_t>(header.torus.dimension()));
  for (int L : header.torus.sides())
    put_u32(os, static_cast<std::uint32_t>(L));
  put_u64(os, std::bit_cast<std::uint64_t>(header.beta));
  put_u64(os, header.seed);
  put_u32(os, static_cast<std::uint32_t>(header.convention.size()));
  os.write(header.convention.data(), static_cast<std::streamsize>(header.convention.size()));
  put_u64(os, samples.size());
  const std::size_t n = samples.torus().sites();
  std::vector<char> row((n + 7) / 8);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::fill(row.begin(), row.end(), 0);
    const auto s = samples.spins(i);
    for (std::size_t j = 0; j < n; ++j)
      if (s[j] > 0)
        row[j / 8] = static_cast<char>(row[j / 8] | (1 << (j % 8)));
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!os)
    throw std::runtime_error("write failed: " + path.string());
}

SampleRecord read_samples(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw PreconditionError("cannot open sample record " + path.string());
  char magic[16];
  if (!is.read(magic, 16) || !std::equal(magic, magic + 16, kMagic))
    throw PreconditionError("not a sample record: " + path.string());
  if (get_u32(is) != kRecordVersion)
    throw PreconditionError("unsupported sample record version");
  const std::uint32_t d = get_u32(is);
  if (d == 0 || d > 16)
    throw PreconditionError("sample record: bad dimension");
  std::vector<int> sides(d);
  for (auto& L : sides)
    L = static_cast<int>(get_u32(is));
  SampleRecordHeader h{LatticeTorus(sides)};
  h.beta = std::bit_cast<double>(get_u64(is));
  h.seed = get_u64(is);
  const std::uint32_t tag_len = get_u32(is);
  if (tag_len > 256)
    throw PreconditionError("sample record: bad convention tag");
  h.convention.assign(tag_len, '\0');
  is.read(h.convention.data(), tag_len);
  if (h.convention != kConventionTag)
    throw PreconditionError("sample record uses convention `" + h.convention + "`, expected `" +
                            kConventionTag + "`");
  const std::uint64_t count = get_u64(is);
  const std::size_t n = h.torus.sites();
  SampleRecord rec{h, SampleSet(h.torus)};
  std::vector<unsigned char> row((n + 7) / 8);
  std::vector<std::int8_t> spins(n);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
      throw PreconditionError("sample record: truncated file");
    for (std::size_t j = 0; j < n; ++j)
      spins[j] = (row[j / 8] >> (j % 8)) & 1 ? 1 : -1;
    rec.samples.push_back(spins);
  }
  return rec;
}

void write_stats(std::ostream& os, const SampleStats& st) {
  os << "# latdiff sample-stats\n"
     << "# convention = " << kConventionTag << '\n'
     << "n_samples = " << st.n_samples << '\n'
     << "mean_spin = " << format_double(st.mean_spin) << '\n'
     << "mean_spin_err = " << format_double(st.mean_spin_err) << '\n'
     << "mean_energy_per_site = " << format_double(st.mean_energy_per_site) << '\n'
     << "integrated_autocorrelation_time = " << format_double(st.integrated_autocorrelation_time)
     << '\n';
}

SampleStats read_stats(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos)
      throw PreconditionError("stats summary: malformed line `" + line + "`");
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end())
      throw PreconditionError(std::string("stats summary: missing `") + key + "`");
    return it->second;
  };
  SampleStats st;
  st.n_samples = std::stoull(get("n_samples"));
  st.mean_spin = std::stod(get("mean_spin"));
  st.mean_spin_err = std::stod(get("mean_spin_err"));
  st.mean_energy_per_site = std::stod(get("mean_energy_per_site"));
  st.integrated_autocorrelation_time = std::stod(get("integrated_autocorrelation_time"));
  return st;
}

} // namespace latdiff
