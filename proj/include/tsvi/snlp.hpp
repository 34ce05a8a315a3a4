#pragma once

#include <string>
#include <vector>

#include "tsvi/target.hpp"

namespace tsvi {

using Point2 = Eigen::Vector2d;

// Node indices: [0, unknowns) are sensors to estimate, the rest are anchors.
struct SnlpEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  double measured = 0.0;

  bool operator==(const SnlpEdge&) const = default;
};

struct SnlpProblem {
  std::vector<Point2> true_positions;
  std::vector<Point2> anchors;
  std::vector<SnlpEdge> edges;
  double noise_variance = 0.01;
  double radius = 3.0;
  double side = 1.0;
  // Non-fatal findings, e.g. sensors without any range measurement.
  std::vector<std::string> warnings;

  std::size_t unknowns() const { return true_positions.size(); }
  std::size_t dim() const { return 2 * unknowns(); }
  bool is_anchor(std::size_t node) const { return node >= unknowns(); }
  Point2 node_position(std::size_t node) const {
    return is_anchor(node) ? anchors.at(node - unknowns()) : true_positions.at(node);
  }
  // Stacked true positions of the unknown sensors.
  Vector truth() const;
  void validate() const;
};

struct SnlpConfig {
  std::size_t unknowns = 6;
  std::size_t anchors = 4;
  double side = 6.0;
  double radius = 3.0;
  double noise_variance = 0.01;
  bool noiseless = true;
  Seed seed = 0;

  // 6 unknowns, 4 anchors, 6 x 6 square, r = 3, noiseless.
  static SnlpConfig preset_small(Seed seed);
  // 50 unknowns, 12 anchors, 20 x 20 square, r = 3, sigma^2 = 0.01.
  static SnlpConfig preset_large(Seed seed);
};

// Range edges for every unknown-unknown and unknown-anchor pair closer than
// `radius`. Noise draws come from `seed` unless `noiseless`.
SnlpProblem make_snlp(std::vector<Point2> unknown_positions, std::vector<Point2> anchors,
                      double side, double radius, double noise_variance, bool noiseless,
                      Seed seed);

SnlpProblem build_snlp(const SnlpConfig& config);

FactorLayout snlp_layout(const SnlpProblem& problem);

// Range-only likelihood with an improper flat prior on sensor positions.
class SnlpTarget final : public TargetModel {
 public:
  explicit SnlpTarget(SnlpProblem problem);

  const SnlpProblem& problem() const { return problem_; }
  std::string dim_name(std::size_t d) const override;

 protected:
  double do_log_density(const Vector& x) const override;
  double do_eval(const Vector& x, Vector& grad) const override;
  void do_hessian(const Vector& x, Matrix& hess) const override;

 private:
  Point2 position(const Vector& x, std::size_t node) const;
  double edge_distance(const Vector& x, const SnlpEdge& e, Point2& unit) const;

  SnlpProblem problem_;
  double log_normalizer_ = 0.0;
};

}  // namespace tsvi
