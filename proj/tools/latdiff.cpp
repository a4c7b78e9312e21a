// latdiff: condition checks, sampling, correlation analysis and diffraction
// spectra for Ising lattice gases.
//
//   latdiff check    --config job.json
//   latdiff simulate --config job.json [--seed S] [--threads T]
//   latdiff analyze  --config job.json
//   latdiff diffract --config job.json
//   latdiff report   --out DIR
//
// Every option can also come from the environment as LATDIFF_<NAME>.

#include <CLI11.hpp>

#include <iostream>

#include "latdiff/jobs.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 0;
};

latdiff::JobConfig resolve(const Options& o) {
  auto cfg = latdiff::load_config(o.config);
  if (!o.out.empty())
    cfg.output = o.out;
  if (o.seed_set)
    cfg.run.seed = o.seed;
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ising lattice-gas diffraction toolkit (energy convention: unordered-pair)"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opt.config, "JSON job description")->envname("LATDIFF_CONFIG");
    if (needs_config)
      c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (overrides the config)")->envname("LATDIFF_OUT");
    sub->add_option("--threads", opt.threads, "worker threads, 0 = auto")->envname("LATDIFF_THREADS");
  };

  auto* check = app.add_subcommand("check", "Evaluate the Dobrushin and moment conditions");
  auto* simulate = app.add_subcommand("simulate", "Run Markov chains and store samples");
  auto* analyze = app.add_subcommand("analyze", "Estimate correlations, fit decay laws, bound tails");
  auto* diffract = app.add_subcommand("diffract", "Compute the diffraction spectrum and check its properties");
  auto* report = app.add_subcommand("report", "Summarise an output directory");
  for (auto* sub : {check, simulate, analyze, diffract})
    add_common(sub, true);
  add_common(report, false);
  simulate->add_option("--seed", opt.seed, "base seed (overrides the config)")->envname("LATDIFF_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : latdiff::kExitConfig;
  }
  opt.seed_set = simulate->count("--seed") > 0 || std::getenv("LATDIFF_SEED") != nullptr;

  latdiff::JobContext ctx{opt.threads, &std::cout};
  try {
    if (*report) {
      std::filesystem::path dir = opt.out;
      if (dir.empty())
        dir = opt.config.empty() ? std::filesystem::path("latdiff-out") : resolve(opt).output;
      return latdiff::cmd_report(dir, ctx);
    }
    const auto cfg = resolve(opt);
    if (*check)
      return latdiff::cmd_check(cfg, ctx);
    if (*simulate)
      return latdiff::cmd_simulate(cfg, ctx);
    if (*analyze)
      return latdiff::cmd_analyze(cfg, ctx);
    return latdiff::cmd_diffract(cfg, ctx);
  } catch (const latdiff::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return latdiff::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return latdiff::kExitPrecondition;
  }
}
