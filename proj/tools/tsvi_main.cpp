#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsvi/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit_json(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  const fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + out + "' for writing");
  f << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tsvi::ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw tsvi::ConfigError("config: " + std::string(e.what()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust-region graphical Stein variational inference"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  auto* generate = app.add_subcommand("generate", "Generate the configured problem (and optionally its ground truth)");
  generate->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  generate->add_option("-o,--out", out, "Output directory")->required();
  generate->add_option("-s,--seed", seed, "Override problem.seed");
  generate->add_option("-w,--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  bool with_truth = false;
  generate->add_flag("--ground-truth", with_truth, "Also write the ground-truth sample");

  auto* run = app.add_subcommand("run", "Run every configured method and seed");
  run->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out, "Artifact directory (must not exist or be empty)")->required();
  run->add_option("-s,--seed", seed, "Run a single initialization seed instead of run.seeds");
  run->add_option("-w,--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Squared MMD of a sample against a reference");
  std::string samples_path;
  std::string reference_path;
  std::optional<double> lengthscale;
  evaluate->add_option("--samples", samples_path, "Candidate sample (.csv or .bin)")->required()->check(CLI::ExistingFile);
  auto* ref_opt = evaluate->add_option("--reference", reference_path, "Reference sample (.csv or .bin)")->check(CLI::ExistingFile);
  evaluate->add_option("-c,--config", config_path, "Config whose ground truth is used when --reference is absent")
      ->check(CLI::ExistingFile)
      ->excludes(ref_opt);
  evaluate->add_option("-o,--out", out, "Report path (default: stdout)");
  evaluate->add_option("-s,--seed", seed, "Subsampling seed (default: eval.seed or 0)");
  evaluate->add_option("-w,--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  evaluate->add_option("--lengthscale", lengthscale, "MMD kernel lengthscale (default: median heuristic)")
      ->check(CLI::PositiveNumber);

  auto* exporter = app.add_subcommand("export-marginals", "Write per-factor columns of a sample CSV");
  std::string problem_path;
  std::vector<std::size_t> factors;
  bool all_factors = false;
  exporter->add_option("--samples", samples_path, "Sample CSV")->required()->check(CLI::ExistingFile);
  exporter->add_option("--problem", problem_path, "problem.json from a run directory")->check(CLI::ExistingFile);
  exporter->add_option("-c,--config", config_path, "Config used to regenerate the problem")->check(CLI::ExistingFile);
  exporter->add_option("--factors", factors, "Factor indices")->delimiter(',');
  exporter->add_flag("--all", all_factors, "Export every factor");
  exporter->add_option("-o,--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      json cfg = read_json(config_path);
      if (seed && cfg.contains("problem") && cfg["problem"].is_object()) cfg["problem"]["seed"] = *seed;
      tsvi::ExperimentConfig config = tsvi::parse_experiment_config(cfg);
      if (workers) config.workers = *workers;
      const tsvi::ProblemSpec problem = tsvi::generate_problem(config.problem);
      fs::create_directories(out);
      tsvi::save_problem(fs::path(out) / "problem.json", problem);
      if (with_truth) {
        const auto target = tsvi::make_target(problem);
        const tsvi::RowMatrix truth = tsvi::generate_ground_truth(config, problem, *target);
        if (config.ground_truth_binary) {
          tsvi::write_sample_binary(fs::path(out) / "ground_truth.bin", truth);
        } else {
          tsvi::write_sample_csv(fs::path(out) / "ground_truth.csv", truth, tsvi::dimension_names(*target));
        }
      }
      std::cout << "wrote " << (fs::path(out) / "problem.json").string() << '\n';
    } else if (run->parsed()) {
      tsvi::ExperimentConfig config = tsvi::load_experiment_config(config_path);
      if (seed) config.seeds = {*seed};
      if (workers) config.workers = *workers;
      tsvi::run_experiment(config, out);
      std::cout << "wrote " << out << '\n';
    } else if (evaluate->parsed()) {
      const tsvi::RowMatrix candidate = tsvi::read_sample(samples_path);
      tsvi::MmdOptions opts;
      opts.lengthscale = lengthscale;
      tsvi::RowMatrix reference;
      if (!reference_path.empty()) {
        reference = tsvi::read_sample(reference_path);
      } else if (!config_path.empty()) {
        tsvi::ExperimentConfig config = tsvi::load_experiment_config(config_path);
        if (workers) config.workers = *workers;
        const tsvi::ProblemSpec problem = tsvi::generate_problem(config.problem);
        reference = tsvi::generate_ground_truth(config, problem, *tsvi::make_target(problem));
        opts.seed = config.eval_seed;
        opts.reference_cap = config.reference_cap;
        opts.median_cap = config.median_cap;
        if (!opts.lengthscale) opts.lengthscale = config.mmd_lengthscale;
      } else {
        throw tsvi::ConfigError("evaluate: one of --reference or --config is required");
      }
      if (reference.rows() == 0) throw tsvi::ConfigError("evaluate: the reference sample is empty");
      if (seed) opts.seed = *seed;
      if (workers) opts.workers = *workers;
      emit_json(tsvi::metric_report_to_json(tsvi::evaluate_mmd(candidate, reference, opts)), out);
    } else if (exporter->parsed()) {
      tsvi::ProblemSpec problem;
      if (!problem_path.empty()) {
        problem = tsvi::load_problem(problem_path);
      } else if (!config_path.empty()) {
        problem = tsvi::generate_problem(tsvi::load_experiment_config(config_path).problem);
      } else {
        throw tsvi::ConfigError("export-marginals: one of --problem or --config is required");
      }
      const auto target = tsvi::make_target(problem);
      if (all_factors) {
        factors.clear();
        for (std::size_t a = 0; a < target->layout().factor_count(); ++a) factors.push_back(a);
      }
      if (factors.empty()) throw tsvi::ConfigError("export-marginals: pass --factors or --all");
      for (const auto& p : tsvi::export_marginals(samples_path, target->layout(), factors, out)) {
        std::cout << "wrote " << p.string() << '\n';
      }
    }
  } catch (const tsvi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
