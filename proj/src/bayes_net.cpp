#include "tsvi/bayes_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace tsvi {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

double gaussian_log_pdf(double residual, double variance) {
  return -0.5 * (kLog2Pi + std::log(variance)) - 0.5 * residual * residual / variance;
}

double component_residual(const BayesNode& node, std::size_t l, std::size_t self,
                          const Vector& x) {
  double mean = node.kind == NodeKind::GaussianRoot ? node.mean : 0.0;
  for (std::size_t k = 0; k < node.parents.size(); ++k) {
    mean += node.weights[l][k] * x[static_cast<Eigen::Index>(node.parents[k])];
  }
  return x[static_cast<Eigen::Index>(self)] - mean;
}

// d residual_l / d (local var v): +1 for the node, -alpha for parent v-1.
double residual_derivative(const BayesNode& node, std::size_t l, std::size_t v) {
  return v == 0 ? 1.0 : -node.weights[l][v - 1];
}

std::size_t local_to_global(const BayesNode& node, std::size_t self, std::size_t v) {
  return v == 0 ? self : node.parents[v - 1];
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::GaussianRoot: return "gaussian_root";
    case NodeKind::LinearGaussian: return "linear_gaussian";
    case NodeKind::LinearGmm: return "linear_gmm";
  }
  return "unknown";
}

NodeKind node_kind_from_string(const std::string& s) {
  if (s == "gaussian_root") return NodeKind::GaussianRoot;
  if (s == "linear_gaussian") return NodeKind::LinearGaussian;
  if (s == "linear_gmm") return NodeKind::LinearGmm;
  throw std::invalid_argument("unknown node kind '" + s + "'");
}

void BayesNetSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("bayes net: no layers");
  std::size_t next = 0;
  std::vector<std::size_t> layer_of(nodes.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].empty()) throw std::invalid_argument("bayes net: empty layer");
    for (std::size_t j : layers[l]) {
      if (j != next) throw std::invalid_argument("bayes net: nodes must be numbered in layer order");
      layer_of.at(j) = l;
      ++next;
    }
  }
  if (next != nodes.size()) throw std::invalid_argument("bayes net: layers do not cover all nodes");

  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const auto& node = nodes[j];
    const std::string where = "bayes net node " + std::to_string(j) + ": ";
    if (!(node.variance > 0.0) || !std::isfinite(node.variance)) {
      throw std::invalid_argument(where + "variance must be positive");
    }
    if (layer_of[j] == 0) {
      if (node.kind != NodeKind::GaussianRoot || !node.parents.empty()) {
        throw std::invalid_argument(where + "first-layer nodes must be parentless Gaussian roots");
      }
      continue;
    }
    if (node.kind == NodeKind::GaussianRoot) {
      throw std::invalid_argument(where + "root kind outside the first layer");
    }
    if (node.parents.empty()) throw std::invalid_argument(where + "non-root node without parents");
    for (std::size_t p : node.parents) {
      if (p >= nodes.size() || layer_of[p] + 1 != layer_of[j]) {
        throw std::invalid_argument(where + "parents must lie in the preceding layer");
      }
    }
    if (node.weights.size() != node.component_count()) {
      throw std::invalid_argument(where + "one weight vector per component required");
    }
    for (const auto& w : node.weights) {
      if (w.size() != node.parents.size()) {
        throw std::invalid_argument(where + "weight count must match parent count");
      }
    }
    if (node.kind == NodeKind::LinearGmm) {
      const auto& om = node.component_weights;
      if (!(om[0] > 0.0 && om[0] < 1.0 && om[1] > 0.0 && om[1] < 1.0) ||
          std::abs(om[0] + om[1] - 1.0) > 1e-12) {
        throw std::invalid_argument(where + "component weights must lie in (0,1) and sum to 1");
      }
    }
  }
}

BayesNetConfig BayesNetConfig::preset_30(Seed seed) {
  BayesNetConfig c;
  c.layer_sizes = {10, 10, 10};
  c.max_parents = 3;
  c.gmm_nodes = 6;
  c.mean_max = 2.0;
  c.seed = seed;
  return c;
}

BayesNetConfig BayesNetConfig::preset_80(Seed seed) {
  BayesNetConfig c;
  c.layer_sizes = {20, 20, 20, 20};
  c.max_parents = 4;
  c.gmm_nodes = 20;
  c.mean_max = 4.0;
  c.seed = seed;
  return c;
}

BayesNetSpec generate_bayes_net(const BayesNetConfig& config) {
  if (config.layer_sizes.empty()) throw std::invalid_argument("generate_bayes_net: no layers");
  if (config.max_parents == 0) throw std::invalid_argument("generate_bayes_net: M must be >= 1");
  std::size_t total = 0;
  for (std::size_t s : config.layer_sizes) {
    if (s == 0) throw std::invalid_argument("generate_bayes_net: empty layer");
    total += s;
  }
  const std::size_t non_root = total - config.layer_sizes.front();
  if (config.gmm_nodes > non_root) {
    throw std::invalid_argument("generate_bayes_net: more mixture nodes than non-root nodes");
  }
  if (!(config.variance_min > 0.0) || config.variance_max < config.variance_min) {
    throw std::invalid_argument("generate_bayes_net: invalid variance range");
  }

  std::mt19937_64 rng(config.seed);
  const auto gmm_picks = sample_without_replacement(non_root, config.gmm_nodes, rng);
  std::set<std::size_t> gmm_set;
  for (std::size_t p : gmm_picks) gmm_set.insert(p + config.layer_sizes.front());

  std::uniform_real_distribution<double> mean_dist(config.mean_min, config.mean_max);
  std::uniform_real_distribution<double> weight_dist(config.weight_min, config.weight_max);
  std::uniform_real_distribution<double> omega_dist(config.first_component_min,
                                                    config.first_component_max);
  std::uniform_real_distribution<double> log_var_dist(std::log10(config.variance_min),
                                                      std::log10(config.variance_max));

  BayesNetSpec spec;
  std::size_t next = 0;
  std::size_t prev_begin = 0;
  std::size_t prev_size = 0;
  for (std::size_t l = 0; l < config.layer_sizes.size(); ++l) {
    std::vector<std::size_t> layer;
    for (std::size_t k = 0; k < config.layer_sizes[l]; ++k, ++next) {
      layer.push_back(next);
      BayesNode node;
      if (l == 0) {
        node.kind = NodeKind::GaussianRoot;
        node.mean = mean_dist(rng);
      } else {
        node.kind = gmm_set.count(next) ? NodeKind::LinearGmm : NodeKind::LinearGaussian;
        std::uniform_int_distribution<std::size_t> count_dist(
            1, std::min(config.max_parents, prev_size));
        const std::size_t count = count_dist(rng);
        for (std::size_t p : sample_without_replacement(prev_size, count, rng)) {
          node.parents.push_back(prev_begin + p);
        }
        node.weights.resize(node.component_count());
        for (auto& w : node.weights) {
          for (std::size_t p = 0; p < count; ++p) w.push_back(weight_dist(rng));
        }
        if (node.kind == NodeKind::LinearGmm) {
          const double om = omega_dist(rng);
          node.component_weights = {om, 1.0 - om};
        }
      }
      node.variance = std::pow(10.0, log_var_dist(rng));
      spec.nodes.push_back(std::move(node));
    }
    prev_begin = layer.front();
    prev_size = layer.size();
    spec.layers.push_back(std::move(layer));
  }
  spec.validate();
  return spec;
}

FactorLayout bayes_net_layout(const BayesNetSpec& spec) {
  const std::size_t n = spec.dim();
  std::vector<std::set<std::size_t>> moral(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& pa = spec.nodes[j].parents;
    for (std::size_t p : pa) {
      moral[j].insert(p);
      moral[p].insert(j);
      for (std::size_t q : pa) {
        if (q != p) moral[p].insert(q);
      }
    }
  }
  std::vector<DimRange> factors;
  std::vector<std::vector<std::size_t>> blankets;
  for (std::size_t j = 0; j < n; ++j) {
    factors.push_back({j, 1});
    blankets.emplace_back(moral[j].begin(), moral[j].end());
  }
  return FactorLayout(std::move(factors), std::move(blankets));
}

RowMatrix ancestral_sample(const BayesNetSpec& spec, std::size_t count, Seed seed) {
  if (count == 0) throw std::invalid_argument("ancestral_sample: count must be >= 1");
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.dim());
  RowMatrix out(static_cast<Eigen::Index>(count), d);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& node = spec.nodes[static_cast<std::size_t>(j)];
      std::size_t l = 0;
      if (node.kind == NodeKind::LinearGmm && unit(rng) >= node.component_weights[0]) l = 1;
      double mean = node.kind == NodeKind::GaussianRoot ? node.mean : 0.0;
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        mean += node.weights[l][k] * out(r, static_cast<Eigen::Index>(node.parents[k]));
      }
      out(r, j) = mean + std::sqrt(node.variance) * normal(rng);
    }
  }
  return out;
}

BayesNetTarget::BayesNetTarget(BayesNetSpec spec)
    : TargetModel(std::make_shared<FactorLayout>(bayes_net_layout(spec))), spec_(std::move(spec)) {
  spec_.validate();
}

double BayesNetTarget::do_log_density(const Vector& x) const {
  double total = 0.0;
  for (std::size_t j = 0; j < spec_.nodes.size(); ++j) {
    const auto& node = spec_.nodes[j];
    if (node.kind != NodeKind::LinearGmm) {
      total += gaussian_log_pdf(component_residual(node, 0, j, x), node.variance);
      continue;
    }
    std::array<double, 2> f{};
    for (std::size_t l = 0; l < 2; ++l) {
      f[l] = std::log(node.component_weights[l]) +
             gaussian_log_pdf(component_residual(node, l, j, x), node.variance);
    }
    const double m = std::max(f[0], f[1]);
    total += m + std::log(std::exp(f[0] - m) + std::exp(f[1] - m));
  }
  return total;
}

double BayesNetTarget::do_eval(const Vector& x, Vector& grad) const {
  double total = 0.0;
  for (std::size_t j = 0; j < spec_.nodes.size(); ++j) {
    const auto& node = spec_.nodes[j];
    const std::size_t nloc = node.parents.size() + 1;
    const std::size_t nc = node.component_count();
    std::array<double, 2> f{}, r{}, resp{1.0, 0.0};
    for (std::size_t l = 0; l < nc; ++l) {
      r[l] = component_residual(node, l, j, x);
      f[l] = std::log(node.component_weights[l]) + gaussian_log_pdf(r[l], node.variance);
    }
    if (nc == 1) {
      total += f[0];
    } else {
      const double m = std::max(f[0], f[1]);
      const double e0 = std::exp(f[0] - m), e1 = std::exp(f[1] - m);
      total += m + std::log(e0 + e1);
      resp = {e0 / (e0 + e1), e1 / (e0 + e1)};
    }
    // d f_l / d local v = -(r_l / s2) * dr_l/dv ; gradient = sum_l resp_l * df_l
    for (std::size_t v = 0; v < nloc; ++v) {
      double g = 0.0;
      for (std::size_t l = 0; l < nc; ++l) {
        g -= resp[l] * r[l] / node.variance * residual_derivative(node, l, v);
      }
      grad[static_cast<Eigen::Index>(local_to_global(node, j, v))] += g;
    }
  }
  return total;
}

void BayesNetTarget::do_hessian(const Vector& x, Matrix& hess) const {
  for (std::size_t j = 0; j < spec_.nodes.size(); ++j) {
    const auto& node = spec_.nodes[j];
    const std::size_t nloc = node.parents.size() + 1;
    const std::size_t nc = node.component_count();
    std::array<double, 2> f{}, r{}, resp{1.0, 0.0};
    for (std::size_t l = 0; l < nc; ++l) {
      r[l] = component_residual(node, l, j, x);
      f[l] = std::log(node.component_weights[l]) + gaussian_log_pdf(r[l], node.variance);
    }
    if (nc == 2) {
      const double m = std::max(f[0], f[1]);
      const double e0 = std::exp(f[0] - m), e1 = std::exp(f[1] - m);
      resp = {e0 / (e0 + e1), e1 / (e0 + e1)};
    }
    // Mixture Hessian: sum_l resp_l (H_l + g_l g_l^T) - g g^T with
    // H_l = -v_l v_l^T / s2 and g_l = -(r_l / s2) v_l.
    Matrix local = Matrix::Zero(static_cast<Eigen::Index>(nloc), static_cast<Eigen::Index>(nloc));
    Vector mix_grad = Vector::Zero(static_cast<Eigen::Index>(nloc));
    for (std::size_t l = 0; l < nc; ++l) {
      Vector v(static_cast<Eigen::Index>(nloc));
      for (std::size_t k = 0; k < nloc; ++k) {
        v[static_cast<Eigen::Index>(k)] = residual_derivative(node, l, k);
      }
      const Vector g = -(r[l] / node.variance) * v;
      local.noalias() += resp[l] * (g * g.transpose() - v * v.transpose() / node.variance);
      mix_grad += resp[l] * g;
    }
    local.noalias() -= mix_grad * mix_grad.transpose();
    for (std::size_t a = 0; a < nloc; ++a) {
      for (std::size_t b = 0; b < nloc; ++b) {
        hess(static_cast<Eigen::Index>(local_to_global(node, j, a)),
             static_cast<Eigen::Index>(local_to_global(node, j, b))) +=
            local(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
  }
}

}  // namespace tsvi
