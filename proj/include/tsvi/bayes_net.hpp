#pragma once

#include <array>
#include <string>
#include <vector>

#include "tsvi/target.hpp"

namespace tsvi {

enum class NodeKind { GaussianRoot, LinearGaussian, LinearGmm };

const char* to_string(NodeKind kind);
NodeKind node_kind_from_string(const std::string& s);

struct BayesNode {
  NodeKind kind = NodeKind::GaussianRoot;
  std::vector<std::size_t> parents;
  // One weight vector per mixture component (empty for roots).
  std::vector<std::vector<double>> weights;
  // Component weights; {1, 0} for non-mixture nodes.
  std::array<double, 2> component_weights{1.0, 0.0};
  double mean = 0.0;  // roots only
  double variance = 1.0;

  std::size_t component_count() const { return kind == NodeKind::LinearGmm ? 2 : 1; }
  bool operator==(const BayesNode&) const = default;
};

// Layered Bayes net. Node indices equal state dimensions and follow layer
// order, which is a topological order.
struct BayesNetSpec {
  std::vector<std::vector<std::size_t>> layers;
  std::vector<BayesNode> nodes;

  std::size_t dim() const { return nodes.size(); }
  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  bool operator==(const BayesNetSpec&) const = default;
};

struct BayesNetConfig {
  std::vector<std::size_t> layer_sizes;
  std::size_t max_parents = 3;
  std::size_t gmm_nodes = 0;
  double mean_min = 0.0;
  double mean_max = 2.0;
  double variance_min = 1e-3;
  double variance_max = 1.0;
  double weight_min = -1.0;
  double weight_max = 1.0;
  double first_component_min = 0.4;
  double first_component_max = 0.6;
  Seed seed = 0;

  // 3 x 10 nodes, M = 3, 6 mixture nodes, mu in [0, 2].
  static BayesNetConfig preset_30(Seed seed);
  // 4 x 20 nodes, M = 4, 20 mixture nodes, mu in [0, 4].
  static BayesNetConfig preset_80(Seed seed);
};

BayesNetSpec generate_bayes_net(const BayesNetConfig& config);

// Moralized-graph blankets, one 1-D factor per node.
FactorLayout bayes_net_layout(const BayesNetSpec& spec);

// count x dim matrix of i.i.d. joint draws.
RowMatrix ancestral_sample(const BayesNetSpec& spec, std::size_t count, Seed seed);

class BayesNetTarget final : public TargetModel {
 public:
  explicit BayesNetTarget(BayesNetSpec spec);

  const BayesNetSpec& spec() const { return spec_; }

 protected:
  double do_log_density(const Vector& x) const override;
  double do_eval(const Vector& x, Vector& grad) const override;
  void do_hessian(const Vector& x, Matrix& hess) const override;

 private:
  BayesNetSpec spec_;
};

}  // namespace tsvi
