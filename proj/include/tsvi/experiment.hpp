#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsvi/eval.hpp"
#include "tsvi/io.hpp"

namespace tsvi {

// Invalid configuration; the message starts with the dotted path of the
// offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Method { TrSviAt, TrSviKl, MpSvgd, MpSvgdDlr, MpSvgdAg, SvnCtr, Svgd };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

// Baseline and kernel defaults per problem family.
struct HyperparameterDefaults {
  std::string family;
  double lengthscale = 1.0;
  double dlr_step = 0.1;
  double dlr_decay = 0.99;
  std::optional<double> adagrad_step;
  double svn_radius = 1.0;
};

// Families: "snlp-small", "snlp-large", "bn-30", "bn-80", "generic".
HyperparameterDefaults default_hyperparameters(const std::string& family);

// Fully resolved experiment configuration; every tunable carries a value.
struct ExperimentConfig {
  nlohmann::json problem;  // generator section as given (validated)
  std::string family;

  std::vector<Method> methods;
  std::size_t iterations = 100;
  double kernel_lengthscale = 1.0;
  double tr_kl_initial_radius = 1.0;
  double mp_svgd_step = 0.1;
  double dlr_step = 0.1;
  double dlr_decay = 0.99;
  std::optional<double> adagrad_step;
  double svn_radius = 1.0;
  double svgd_step = 0.1;

  std::size_t particles = 200;
  std::vector<Seed> seeds{0, 1, 2, 3, 4};
  int workers = 1;
  std::optional<std::vector<double>> init_center;
  std::optional<double> init_scale;

  std::string ground_truth = "auto";  // auto | ancestral | exact | metropolis | file | none
  std::size_t ground_truth_size = 100000;
  std::string ground_truth_path;
  Seed eval_seed = 12345;
  std::size_t reference_cap = 20000;
  std::size_t median_cap = 10000;
  std::optional<double> mmd_lengthscale;
  std::size_t metropolis_chains = 4;
  std::size_t metropolis_chain_length = 200000;
  double metropolis_proposal_scale = 0.05;
  std::size_t metropolis_burn_in = 20000;
  std::size_t metropolis_thinning = 10;

  bool samples_binary = false;
  bool ground_truth_binary = true;
  bool trace_wall_time = true;

  nlohmann::json to_json() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Problem generation from a config's problem section.
ProblemSpec generate_problem(const nlohmann::json& problem_section);

// Produces the ground-truth sample configured for `problem` (empty if none).
RowMatrix generate_ground_truth(const ExperimentConfig& config, const ProblemSpec& problem,
                                const TargetModel& target);

// Gaussian initial particles around the configured center.
RowMatrix initial_particles(const ExperimentConfig& config, const ProblemSpec& problem,
                            std::size_t dim, Seed seed);

// Runs every (method, seed) pair and writes the artifact directory. Partial
// outputs are removed if anything fails.
void run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// One CSV per factor holding that factor's columns; returns written paths.
std::vector<std::filesystem::path> export_marginals(const std::filesystem::path& sample_csv,
                                                    const FactorLayout& layout,
                                                    const std::vector<std::size_t>& factors,
                                                    const std::filesystem::path& out_dir);

nlohmann::json metric_report_to_json(const MetricReport& report);

}  // namespace tsvi
