#include "tsvi/snlp.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace tsvi {

Vector SnlpProblem::truth() const {
  Vector x(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < unknowns(); ++i) x.segment<2>(2 * static_cast<Eigen::Index>(i)) = true_positions[i];
  return x;
}

void SnlpProblem::validate() const {
  if (true_positions.empty()) throw std::invalid_argument("snlp: no unknown sensors");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("snlp: noise variance must be positive");
  if (!(radius > 0.0)) throw std::invalid_argument("snlp: radius must be positive");
  const std::size_t nodes = unknowns() + anchors.size();
  for (const auto& e : edges) {
    if (e.i >= nodes || e.j >= nodes || e.i == e.j) throw std::invalid_argument("snlp: invalid edge");
    if (is_anchor(e.i) && is_anchor(e.j)) throw std::invalid_argument("snlp: anchor-anchor edge");
    if (!(e.measured >= 0.0) || !std::isfinite(e.measured)) {
      throw std::invalid_argument("snlp: measurements must be finite and non-negative");
    }
  }
}

SnlpConfig SnlpConfig::preset_small(Seed seed) {
  SnlpConfig c;
  c.seed = seed;
  return c;
}

SnlpConfig SnlpConfig::preset_large(Seed seed) {
  SnlpConfig c;
  c.unknowns = 50;
  c.anchors = 12;
  c.side = 20.0;
  c.radius = 3.0;
  c.noise_variance = 0.01;
  c.noiseless = false;
  c.seed = seed;
  return c;
}

SnlpProblem make_snlp(std::vector<Point2> unknown_positions, std::vector<Point2> anchors,
                      double side, double radius, double noise_variance, bool noiseless,
                      Seed seed) {
  if (!(radius > 0.0)) throw std::invalid_argument("snlp: radius must be positive");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("snlp: noise variance must be positive");
  SnlpProblem p;
  p.true_positions = std::move(unknown_positions);
  p.anchors = std::move(anchors);
  p.noise_variance = noise_variance;
  p.radius = radius;
  p.side = side;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance));
  const std::size_t nodes = p.unknowns() + p.anchors.size();
  std::vector<bool> measured(p.unknowns(), false);
  for (std::size_t i = 0; i < p.unknowns(); ++i) {
    for (std::size_t j = i + 1; j < nodes; ++j) {
      const double d = (p.node_position(i) - p.node_position(j)).norm();
      if (!(d < radius)) continue;
      double m = d;
      if (!noiseless) m = std::max(0.0, d + noise(rng));
      p.edges.push_back({i, j, m});
      measured[i] = true;
      if (j < p.unknowns()) measured[j] = true;
    }
  }
  for (std::size_t i = 0; i < p.unknowns(); ++i) {
    if (!measured[i]) {
      p.warnings.push_back("sensor " + std::to_string(i) + " has no range measurements");
    }
  }
  p.validate();
  return p;
}

SnlpProblem build_snlp(const SnlpConfig& config) {
  if (!(config.side > 0.0)) throw std::invalid_argument("snlp: side must be positive");
  if (config.unknowns == 0) throw std::invalid_argument("snlp: no unknown sensors");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> coord(0.0, config.side);
  std::vector<Point2> unknowns, anchors;
  for (std::size_t i = 0; i < config.unknowns; ++i) {
    const double x = coord(rng);
    unknowns.emplace_back(x, coord(rng));
  }
  for (std::size_t i = 0; i < config.anchors; ++i) {
    const double x = coord(rng);
    anchors.emplace_back(x, coord(rng));
  }
  return make_snlp(std::move(unknowns), std::move(anchors), config.side, config.radius,
                   config.noise_variance, config.noiseless, rng());
}

FactorLayout snlp_layout(const SnlpProblem& problem) {
  std::vector<DimRange> factors;
  std::vector<std::vector<std::size_t>> blankets(problem.unknowns());
  for (std::size_t i = 0; i < problem.unknowns(); ++i) factors.push_back({2 * i, 2});
  for (const auto& e : problem.edges) {
    if (problem.is_anchor(e.i) || problem.is_anchor(e.j)) continue;
    blankets[e.i].push_back(e.j);
    blankets[e.j].push_back(e.i);
  }
  return FactorLayout(std::move(factors), std::move(blankets));
}

SnlpTarget::SnlpTarget(SnlpProblem problem)
    : TargetModel(std::make_shared<FactorLayout>(snlp_layout(problem))),
      problem_(std::move(problem)) {
  problem_.validate();
  log_normalizer_ = -0.5 * std::log(2.0 * std::numbers::pi * problem_.noise_variance);
}

std::string SnlpTarget::dim_name(std::size_t d) const {
  return "s" + std::to_string(d / 2) + (d % 2 == 0 ? "_x" : "_y");
}

Point2 SnlpTarget::position(const Vector& x, std::size_t node) const {
  if (problem_.is_anchor(node)) return problem_.anchors[node - problem_.unknowns()];
  return x.segment<2>(2 * static_cast<Eigen::Index>(node));
}

double SnlpTarget::edge_distance(const Vector& x, const SnlpEdge& e, Point2& unit) const {
  const Point2 delta = position(x, e.i) - position(x, e.j);
  const double d = delta.norm();
  if (d == 0.0) {
    throw SingularityError("snlp: nodes " + std::to_string(e.i) + " and " + std::to_string(e.j) +
                           " coincide");
  }
  unit = delta / d;
  return d;
}

double SnlpTarget::do_log_density(const Vector& x) const {
  double total = 0.0;
  for (const auto& e : problem_.edges) {
    const double r = e.measured - (position(x, e.i) - position(x, e.j)).norm();
    total += log_normalizer_ - 0.5 * r * r / problem_.noise_variance;
  }
  return total;
}

double SnlpTarget::do_eval(const Vector& x, Vector& grad) const {
  double total = 0.0;
  Point2 unit;
  for (const auto& e : problem_.edges) {
    const double r = e.measured - edge_distance(x, e, unit);
    total += log_normalizer_ - 0.5 * r * r / problem_.noise_variance;
    const Point2 g = (r / problem_.noise_variance) * unit;
    if (!problem_.is_anchor(e.i)) grad.segment<2>(2 * static_cast<Eigen::Index>(e.i)) += g;
    if (!problem_.is_anchor(e.j)) grad.segment<2>(2 * static_cast<Eigen::Index>(e.j)) -= g;
  }
  return total;
}

void SnlpTarget::do_hessian(const Vector& x, Matrix& hess) const {
  Point2 unit;
  for (const auto& e : problem_.edges) {
    const double d = edge_distance(x, e, unit);
    const double r = e.measured - d;
    const Eigen::Matrix2d uu = unit * unit.transpose();
    const Eigen::Matrix2d block =
        (-uu + (r / d) * (Eigen::Matrix2d::Identity() - uu)) / problem_.noise_variance;
    const auto i = 2 * static_cast<Eigen::Index>(e.i);
    const auto j = 2 * static_cast<Eigen::Index>(e.j);
    const bool free_i = !problem_.is_anchor(e.i);
    const bool free_j = !problem_.is_anchor(e.j);
    if (free_i) hess.block<2, 2>(i, i) += block;
    if (free_j) hess.block<2, 2>(j, j) += block;
    if (free_i && free_j) {
      hess.block<2, 2>(i, j) -= block;
      hess.block<2, 2>(j, i) -= block;
    }
  }
}

}  // namespace tsvi
