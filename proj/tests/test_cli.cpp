#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "latdiff/correlation.hpp"
#include "latdiff/jobs.hpp"
#include "latdiff/oracle.hpp"

using namespace latdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("latdiff_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string nn_config(const fs::path& out, int d, int L, double beta, const std::string& extra_run = "",
                      const std::string& analysis = "", double J = 1.0) {
  std::string sides = "[";
  for (int i = 0; i < d; ++i)
    sides += (i ? "," : "") + std::to_string(L);
  sides += "]";
  std::ostringstream os;
  os << R"({"spec_version": 1, "model": {"dimension": )" << d << R"(, "preset": "nearest_neighbour", "J": )" << J
     << R"(}, "run": {"sides": )" << sides << R"(, "beta": )" << beta << extra_run << "}";
  if (!analysis.empty())
    os << R"(, "analysis": )" << analysis;
  os << R"(, "output": ")" << out.string() << R"("})";
  return os.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(LATDIFF_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "job.json";
  std::ofstream(p) << text;
  return p;
}

} // namespace

TEST_CASE("config errors name the field or position") {
  CHECK_THROWS_WITH_AS(parse_config("{\"spec_version\": 1,\n \"model\": {"), "syntax error at line 2, column 12",
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"spec_version": 1, "model": {"dimension": 1, "preset": "nearest_neighbour"}, "run": {"sides": [8], "beta": 0.3}})"),
                       "model.J: missing required field", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"spec_version": 1, "model": {"dimension": 1, "preset": "zero"}, "run": {"sides": [8], "beta": "hot"}})"),
                       "run.beta: wrong type (string)", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"spec_version": 2})"), "spec_version: unsupported version 2", ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"spec_version": 1, "model": {"dimension": 2, "preset": "zero"}, "run": {"sides": [8], "beta": 0.3}})"),
                  ConfigError);
}

TEST_CASE("config round trip through JSON") {
  const auto c = parse_config(nn_config("/tmp/x", 2, 6, 0.25, R"(, "seed": 9, "chains": 3)", R"({"mode": "exact", "r_min": 1.5})"));
  const auto d = parse_config(config_to_json(c).dump());
  CHECK(d.J == c.J);
  CHECK(d.run.seed == 9);
  CHECK(d.run.chains == 3);
  CHECK(d.analysis.mode == AnalysisMode::exact);
  CHECK(d.analysis.fit.r_min == 1.5);
  CHECK(d.output == c.output);
}

TEST_CASE("basis configs map couplings onto Z^d") {
  const auto c = parse_config(R"({"spec_version": 1,
    "model": {"dimension": 2, "basis": [[2, 0], [0, 1]],
              "couplings": [{"displacement": [1, 0], "value": 0.5}]},
    "run": {"sides": [6, 6], "beta": 0.1}})");
  CHECK(c.J.at({2, 0}) == 0.5);
  REQUIRE(c.range_bound);
  CHECK(*c.range_bound == doctest::Approx(2.0));
}

TEST_CASE("check reports the Dobrushin sum and regime") {
  const auto dir = scratch("check");
  std::ostringstream log;
  CHECK(cmd_check(parse_config(nn_config(dir, 1, 8, 0.3)), {1, &log}) == kExitOk);
  const auto text = slurp(dir / "check.txt");
  CHECK(text.find("Dobrushin holds (0.4570 < 1)") != std::string::npos);
  CHECK(text.find("regime: finite-range ferromagnetic; valid for all beta < beta_c") != std::string::npos);
  CHECK(text.find("unordered-pair") != std::string::npos);
  CHECK(log.str() == text);

  cmd_check(parse_config(nn_config(dir, 1, 8, 0.7)));
  CHECK(slurp(dir / "check.txt").find("Dobrushin fails (1.0662 >= 1)") != std::string::npos);

  const auto zero = parse_config(R"({"spec_version": 1, "model": {"dimension": 2, "preset": "zero"},
    "run": {"sides": [4, 4], "beta": 3.0}, "output": ")" + dir.string() + R"("})");
  cmd_check(zero);
  CHECK(slurp(dir / "check.txt").find("all conditions trivially hold") != std::string::npos);

  cmd_check(parse_config(nn_config(dir, 2, 8, 0.3)));
  CHECK(slurp(dir / "check.txt").find("beta_c = 0.44068679350977") != std::string::npos);
}

TEST_CASE("simulate writes parseable, reproducible outputs") {
  const auto dir = scratch("simulate");
  const auto cfg = parse_config(nn_config(dir, 1, 16, 0.4, R"(, "seed": 3, "samples": 300, "burn_in": 100)"));
  CHECK(cmd_simulate(cfg) == kExitOk);
  for (const char* f : {"samples.bin", "stats.txt", "config.json", "MANIFEST"})
    CHECK(fs::exists(dir / f));
  std::ifstream is(dir / "stats.txt");
  const auto st = read_stats(is);
  CHECK(st.n_samples == 300);
  const auto first = slurp(dir / "samples.bin");
  CHECK(cmd_simulate(cfg) == kExitOk);
  CHECK(slurp(dir / "samples.bin") == first);
  CHECK(read_samples(dir / "samples.bin").samples.size() == 300);
}

TEST_CASE("four chains merge to the pooled statistics") {
  const auto dir = scratch("chains");
  const auto cfg = parse_config(nn_config(dir, 1, 16, 0.4, R"(, "seed": 10, "samples": 200, "burn_in": 50, "chains": 4)"));
  CHECK(cmd_simulate(cfg, {4, nullptr}) == kExitOk);
  const auto rec = read_samples(dir / "samples.bin");
  CHECK(rec.samples.size() == 800);
  double m = 0.0;
  for (std::size_t i = 0; i < rec.samples.size(); ++i)
    for (auto v : rec.samples.spins(i))
      m += v;
  m /= 800.0 * 16.0;
  std::ifstream is(dir / "stats.txt");
  CHECK(std::abs(read_stats(is).mean_spin - m) < 1e-12);
  CHECK(fs::exists(dir / "stats_chain_3.txt"));
}

TEST_CASE("analyze in exact mode equals the transfer matrix") {
  const auto dir = scratch("analyze_exact");
  const auto cfg = parse_config(nn_config(dir, 1, 8, 0.5, "", R"({"mode": "exact", "r_min": 1})"));
  CHECK(cmd_analyze(cfg) == kExitOk);
  std::ifstream is(dir / "correlation_spin.tsv");
  const auto t = read_table(is);
  const auto o = transfer_matrix_1d_torus(0.5, 8);
  for (int x = 0; x <= 4; ++x)
    CHECK(std::abs(t.eta({x}) - o.eta({x})) < 1e-10);
  std::ifstream ds(dir / "correlation_density.tsv");
  CHECK(read_table(ds).eta({0}) == doctest::Approx(0.5));
  CHECK(fs::exists(dir / "fits.txt"));
  CHECK(fs::exists(dir / "certificates.txt"));
}

TEST_CASE("analyze in mcmc mode recovers the decay rate") {
  const auto dir = scratch("analyze_mcmc");
  const auto cfg = parse_config(nn_config(dir, 1, 64, 0.5, R"(, "seed": 5, "samples": 10000, "thin": 2, "burn_in": 1000)",
                                          R"({"window": [8]})"));
  REQUIRE(cmd_simulate(cfg) == kExitOk);
  REQUIRE(cmd_analyze(cfg) == kExitOk);
  const auto fits = slurp(dir / "fits.txt");
  const auto block = fits.substr(fits.find("[fit exponential]"));
  const double rate = std::stod(block.substr(block.find("\nrate = ") + 8));
  const double err = std::stod(block.substr(block.find("rate_err = ") + 11));
  CHECK(std::abs(rate + std::log(std::tanh(0.5))) < 3.0 * err);
  CHECK(slurp(dir / "certificates.txt").find("coth_bound") != std::string::npos);
}

TEST_CASE("fits on pure noise complete with flags") {
  const auto dir = scratch("analyze_noise");
  const auto cfg = parse_config(R"({"spec_version": 1, "model": {"dimension": 1, "preset": "zero"},
    "run": {"sides": [32], "beta": 1.0, "samples": 500, "burn_in": 10}, "output": ")" + dir.string() + R"("})");
  REQUIRE(cmd_simulate(cfg) == kExitOk);
  CHECK(cmd_analyze(cfg) == kExitOk);
  CHECK(slurp(dir / "fits.txt").find("insufficient signal") != std::string::npos);
}

TEST_CASE("analyze without samples is a precondition failure") {
  const auto dir = scratch("analyze_missing");
  CHECK_THROWS_AS(cmd_analyze(parse_config(nn_config(dir, 1, 16, 0.5))), PreconditionError);
}

TEST_CASE("diffract on an exact geometric table") {
  const auto dir = scratch("diffract_geom");
  auto table = transfer_matrix_1d_infinite(0.5, 40);
  table.beta = 0.5;
  std::ofstream(dir / "correlation_spin.tsv") << [&] {
    std::ostringstream os;
    write_table(os, table);
    return os.str();
  }();
  std::ostringstream log;
  CHECK(cmd_diffract(parse_config(nn_config(dir, 1, 82, 0.5)), {1, &log}) == kExitOk);
  std::ifstream is(dir / "spectrum.tsv");
  std::string line;
  double trunc = -1.0;
  while (std::getline(is, line) && (line.rfind("#", 0) == 0 || line.rfind("k1", 0) == 0))
    if (line.find("truncation_error") != std::string::npos)
      trunc = std::stod(line.substr(line.find('=') + 1));
  std::istringstream row(line);
  double k = 0.0, g = 0.0;
  row >> k >> g;
  CHECK(k == 0.0);
  CHECK(trunc > 0.0);
  CHECK(std::abs(g - std::exp(2 * 0.5) / 4) <= trunc);
  const auto props = slurp(dir / "properties.txt");
  CHECK(props.find("periodicity = PASS") != std::string::npos);
  CHECK(props.find("evenness = PASS") != std::string::npos);
  CHECK(props.find("maxima_at_bragg = PASS") != std::string::npos);
  CHECK(props.find("parseval = PASS") != std::string::npos);
}

TEST_CASE("diffract on an antiferromagnet warns") {
  const auto dir = scratch("diffract_afm");
  const auto cfg = parse_config(nn_config(dir, 1, 12, 0.5, "", R"({"mode": "exact", "r_min": 1})", -1.0));
  REQUIRE(cmd_analyze(cfg) == kExitOk);
  CHECK(cmd_diffract(cfg) == kExitOk);
  CHECK(slurp(dir / "properties.txt").find("maxima_at_bragg = WARN") != std::string::npos);
}

TEST_CASE("diffract without inputs fails its precondition") {
  const auto dir = scratch("diffract_missing");
  CHECK_THROWS_AS(cmd_diffract(parse_config(nn_config(dir, 1, 16, 0.5))), PreconditionError);
}

TEST_CASE("report collates artifacts and detects tampering") {
  const auto empty = scratch("report_empty");
  CHECK(cmd_report(empty) == kExitOk);
  CHECK(slurp(empty / "report.md").find("no artifacts") != std::string::npos);

  const auto dir = scratch("report_full");
  const auto cfg = parse_config(nn_config(dir, 1, 32, 0.5, R"(, "seed": 4, "samples": 2000, "burn_in": 500)"));
  REQUIRE(cmd_check(cfg) == kExitOk);
  REQUIRE(cmd_simulate(cfg) == kExitOk);
  REQUIRE(cmd_analyze(cfg) == kExitOk);
  REQUIRE(cmd_diffract(cfg) == kExitOk);
  std::ofstream(dir / "acceptance.txt") << "C1\tPASS (tv 0.001)\n";
  CHECK(cmd_report(dir) == kExitOk);
  const auto rep = slurp(dir / "report.md");
  for (const char* c : kAcceptanceCriteria)
    CHECK(rep.find(c) != std::string::npos);
  CHECK(rep.find("PASS (tv 0.001)") != std::string::npos);
  CHECK(rep.find("seeds = 4") != std::string::npos);
  CHECK(rep.find("unordered-pair") != std::string::npos);

  std::ofstream(dir / "correlation_spin.tsv", std::ios::app) << "0\t0.5\t0\n";
  CHECK_THROWS_WITH_AS(cmd_report(dir), "integrity error: checksum mismatch for correlation_spin.tsv",
                       PreconditionError);
}

TEST_CASE("partial directories report their gaps") {
  const auto dir = scratch("report_partial");
  REQUIRE(cmd_check(parse_config(nn_config(dir, 1, 8, 0.3))) == kExitOk);
  CHECK(cmd_report(dir) == kExitOk);
  const auto rep = slurp(dir / "report.md");
  CHECK(rep.find("## gaps") != std::string::npos);
  CHECK(rep.find("- fits.txt: not present") != std::string::npos);
}

TEST_CASE("re-running a config reproduces every output byte for byte") {
  const auto a = scratch("golden_a"), b = scratch("golden_b");
  for (const auto& dir : {a, b}) {
    auto cfg = parse_config(nn_config(dir, 2, 8, 0.3, R"(, "seed": 21, "samples": 400, "burn_in": 200)"));
    cfg.output = dir;
    cmd_check(cfg);
    cmd_simulate(cfg);
    cmd_analyze(cfg);
    cmd_diffract(cfg);
  }
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (name == "config.json" || name == "MANIFEST")
      continue; // these record the output path
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b / name), name.string());
  }
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("exe");
  const auto good = write_config(dir, nn_config(dir / "out", 1, 16, 0.5, R"(, "samples": 500, "burn_in": 100)"));
  CHECK(cli("check --config " + good.string()) == 0);
  CHECK(cli("simulate --config " + good.string() + " --seed 99 --threads 2") == 0);
  CHECK(read_samples(dir / "out" / "samples.bin").header.seed == 99);
  CHECK(cli("analyze --config " + good.string()) == 0);
  CHECK(cli("diffract --config " + good.string()) == 0);
  CHECK(cli("report --out " + (dir / "out").string()) == 0);

  const auto bad = dir / "bad.json";
  std::ofstream(bad) << "{ nope";
  CHECK(cli("check --config " + bad.string()) == kExitConfig);
  CHECK(cli("frobnicate") == kExitConfig);

  const auto small = dir / "small.json";
  std::ofstream(small) << nn_config(dir / "small", 1, 2, 0.5);
  CHECK(cli("simulate --config " + small.string()) == kExitPrecondition);

  std::ofstream(dir / "out" / "stats.txt", std::ios::app) << "tampered = 1\n";
  CHECK(cli("report --out " + (dir / "out").string()) == kExitPrecondition);

  const std::string env = "LATDIFF_CONFIG=" + good.string() + " LATDIFF_SEED=123 " + std::string(LATDIFF_CLI) +
                          " simulate > /dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(env.c_str())) == 0);
  CHECK(read_samples(dir / "out" / "samples.bin").header.seed == 123);
}
