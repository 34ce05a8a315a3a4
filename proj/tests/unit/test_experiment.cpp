#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tsvi/experiment.hpp"

using namespace tsvi;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tsvi_exp_" + name);
  fs::remove_all(p);
  fs::remove_all(p.string() + ".partial");
  return p;
}

json small_snlp_config() {
  return json::parse(R"({
    "problem": {"type": "snlp", "preset": "snlp-small", "seed": 2},
    "method": {"names": ["tr-svi-at", "mp-svgd"], "iterations": 3},
    "run": {"particles": 12, "seeds": [0, 1]},
    "eval": {"metropolis": {"chains": 1, "chain_length": 2000, "burn_in": 100, "thinning": 5}},
    "output": {"trace_wall_time": false}
  })");
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string error_of(const json& j) {
  try {
    parse_experiment_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (const char* n : {"tr-svi-at", "tr-svi-kl", "mp-svgd", "mp-svgd-dlr", "mp-svgd-ag", "svn-ctr", "svgd"}) {
    CHECK(std::string(to_string(method_from_string(n))) == n);
  }
  CHECK_THROWS(method_from_string("adam"));
}

TEST_CASE("hyperparameter table") {
  CHECK(default_hyperparameters("bn-30").lengthscale == 10.0);
  CHECK(default_hyperparameters("bn-30").dlr_decay == 0.999);
  CHECK(default_hyperparameters("bn-80").lengthscale == 60.0);
  CHECK(default_hyperparameters("snlp-large").lengthscale == 3.0);
  CHECK_FALSE(default_hyperparameters("snlp-large").adagrad_step.has_value());
  CHECK(default_hyperparameters("snlp-small").lengthscale == 1.0);
  CHECK_THROWS(default_hyperparameters("nope"));
}

TEST_CASE("config defaults are resolved from the problem family") {
  const auto c = parse_experiment_config(json::parse(R"({"problem": {"type": "bayes_net", "preset": "bn-30"}})"));
  CHECK(c.family == "bn-30");
  CHECK(c.kernel_lengthscale == 10.0);
  CHECK(c.dlr_step == 0.01);
  CHECK(c.ground_truth == "ancestral");
  CHECK(c.particles == 200);
  CHECK(c.seeds.size() == 5);
  CHECK(c.methods == std::vector<Method>{Method::TrSviAt});
  const auto s = parse_experiment_config(small_snlp_config());
  CHECK(s.ground_truth == "metropolis");
  CHECK(s.kernel_lengthscale == 1.0);
}

TEST_CASE("config errors name the offending field") {
  json j = small_snlp_config();
  j["run"]["particles"] = -3;
  CHECK(error_of(j).rfind("run.particles:", 0) == 0);
  j = small_snlp_config();
  j["kernel"] = {{"lengthscale", 0.0}};
  CHECK(error_of(j).rfind("kernel.lengthscale:", 0) == 0);
  j = small_snlp_config();
  j["method"]["names"] = {"tr-svi-at", "bogus"};
  CHECK(error_of(j).rfind("method.names:", 0) == 0);
  j = small_snlp_config();
  j["problem"]["type"] = "mystery";
  CHECK(error_of(j).rfind("problem.type:", 0) == 0);
  j = small_snlp_config();
  j["extra"] = 1;
  CHECK(error_of(j).rfind("extra:", 0) == 0);
  j = small_snlp_config();
  j["problem"]["preset"] = "snlp-large";
  j["method"]["names"] = {"mp-svgd-ag"};
  CHECK(error_of(j).rfind("method.mp_svgd_ag.step:", 0) == 0);
  j["method"]["mp_svgd_ag"] = {{"step", 0.2}};
  CHECK(error_of(j).empty());
  j = small_snlp_config();
  j["eval"]["ground_truth"] = "ancestral";
  CHECK(error_of(j).rfind("eval.ground_truth:", 0) == 0);
  CHECK(error_of(json::parse("{}")).rfind("problem:", 0) == 0);
}

TEST_CASE("run writes every artifact and a complete manifest") {
  const auto out = scratch("full");
  const auto cfg = parse_experiment_config(small_snlp_config());
  run_experiment(cfg, out);
  for (const char* f : {"manifest.json", "problem.json", "metrics.json", "timings.json", "ground_truth.bin",
                        "init_seed0.csv", "init_seed1.csv", "trace_tr-svi-at_seed0.csv",
                        "samples_mp-svgd_seed1.csv"}) {
    CHECK_MESSAGE(fs::exists(out / f), f);
  }
  const json m = read_json(out / "manifest.json");
  CHECK(m["config"]["kernel"]["lengthscale"] == 1.0);
  CHECK(m["config"]["method"]["tr_svi_kl"]["initial_radius"] == 1.0);
  CHECK(m["config"]["method"]["tr_svi_kl"]["nystrom_fraction"] == 0.1);
  CHECK(m["config"]["method"]["mp_svgd_dlr"]["decay"] == 0.99);
  CHECK(m["config"]["eval"]["reference_cap"] == 20000);
  CHECK(m["config"]["eval"]["median_cap"] == 10000);
  CHECK(m["seeds"] == json::array({0, 1}));
  const json metrics = read_json(out / "metrics.json");
  CHECK(metrics["runs"].size() == 4);
  CHECK(metrics["summary"]["tr-svi-at"]["runs"] == 2);
  CHECK(metrics["metric"] == "mmd_squared_biased");
  CHECK_FALSE(fs::exists(out.string() + ".partial"));
  CHECK_THROWS(run_experiment(cfg, out));  // refuses to overwrite
}

TEST_CASE("zero iterations write the initial snapshot") {
  const auto out = scratch("zero");
  json j = small_snlp_config();
  j["method"]["iterations"] = 0;
  j["eval"]["ground_truth"] = "none";
  run_experiment(parse_experiment_config(j), out);
  std::ifstream trace(out / "trace_tr-svi-at_seed0.csv");
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) ++lines;
  CHECK(lines == 2);
  std::ifstream a(out / "samples_tr-svi-at_seed0.csv"), b(out / "init_seed0.csv");
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
  CHECK(read_json(out / "manifest.json").contains("config"));
}

TEST_CASE("failed runs leave no partial output") {
  const auto out = scratch("fail");
  json j = small_snlp_config();
  j["eval"]["ground_truth"] = "file";
  j["eval"]["path"] = (fs::temp_directory_path() / "tsvi_missing_reference.csv").string();
  CHECK_THROWS(run_experiment(parse_experiment_config(j), out));
  CHECK_FALSE(fs::exists(out));
  CHECK_FALSE(fs::exists(out.string() + ".partial"));
}

TEST_CASE("exported marginals reassemble the sample") {
  const auto out = scratch("marg");
  json j = small_snlp_config();
  j["eval"]["ground_truth"] = "none";
  run_experiment(parse_experiment_config(j), out);
  const auto problem = load_problem(out / "problem.json");
  const auto target = make_target(problem);
  std::vector<std::size_t> all;
  for (std::size_t a = 0; a < target->layout().factor_count(); ++a) all.push_back(a);
  std::reverse(all.begin(), all.end());
  const auto files = export_marginals(out / "samples_tr-svi-at_seed0.csv", target->layout(), all, out / "marg");
  CHECK(files.size() == 6);
  const auto full = read_sample_csv(out / "samples_tr-svi-at_seed0.csv");
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto part = read_sample_csv(files[k]);
    const auto& f = target->layout().factor(all[k]);
    CHECK(part.values.cols() == 2);
    CHECK(part.values == full.values.middleCols(static_cast<Eigen::Index>(f.offset), 2));
    CHECK(part.names[0] == full.names[f.offset]);
  }
  CHECK_THROWS_AS(export_marginals(out / "samples_tr-svi-at_seed0.csv", target->layout(), {6}, out / "m2"),
                  std::out_of_range);
}

TEST_CASE("initial particles use the family defaults") {
  const auto cfg = parse_experiment_config(small_snlp_config());
  const auto problem = generate_problem(cfg.problem);
  const RowMatrix x = initial_particles(cfg, problem, 12, 0);
  CHECK(x.rows() == 12);
  CHECK(std::abs(x.mean() - 3.0) < 1.0);
  CHECK(initial_particles(cfg, problem, 12, 0) == x);
  CHECK_FALSE(initial_particles(cfg, problem, 12, 1) == x);
}
