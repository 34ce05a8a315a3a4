#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsvi/bayes_net.hpp"
#include "tsvi/snlp.hpp"
#include "tsvi/trust_region.hpp"

namespace tsvi {

inline constexpr int kProblemSchemaVersion = 1;

struct GaussianProblem {
  Vector mean;
  Matrix covariance;
};

struct ProblemSpec {
  std::variant<BayesNetSpec, SnlpProblem, GaussianProblem> model;

  std::string type_name() const;
};

nlohmann::json problem_to_json(const ProblemSpec& problem);
ProblemSpec problem_from_json(const nlohmann::json& j);
void save_problem(const std::filesystem::path& path, const ProblemSpec& problem);
ProblemSpec load_problem(const std::filesystem::path& path);

std::unique_ptr<TargetModel> make_target(const ProblemSpec& problem);

struct NamedSample {
  std::vector<std::string> names;
  RowMatrix values;
};

// Header row of dimension names, one row per draw, full round-trip precision.
void write_sample_csv(const std::filesystem::path& path, const RowMatrix& sample,
                      const std::vector<std::string>& names);
NamedSample read_sample_csv(const std::filesystem::path& path);

// Little-endian: uint64 rows, uint64 cols, then rows*cols float64 row-major.
void write_sample_binary(const std::filesystem::path& path, const RowMatrix& sample);
RowMatrix read_sample_binary(const std::filesystem::path& path);

// Dispatches on extension: ".bin" is binary, anything else CSV.
RowMatrix read_sample(const std::filesystem::path& path);

std::vector<std::string> dimension_names(const TargetModel& target);

// Columns: iteration, gradient_magnitude, radius_or_step, rho, approx_kl_u,
// approx_kl_o, accepted, wall_ms. Missing values are empty fields.
void write_trace_csv(const std::filesystem::path& path, const Trace& trace, bool include_wall_time);

std::string format_double(double v);

}  // namespace tsvi
