#include "tsvi/stein.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tsvi/parallel.hpp"

namespace tsvi {

namespace {

constexpr std::size_t kNoPair = std::numeric_limits<std::size_t>::max();

void check_particles(const RowMatrix& particles, std::size_t dim) {
  if (particles.rows() < 1) throw std::invalid_argument("stein: empty particle set");
  if (static_cast<std::size_t>(particles.cols()) != dim) {
    throw std::invalid_argument("stein: particle dimension does not match the target");
  }
  require_finite(particles, "stein: particles");
}

void check_layouts(const TargetModel& target, const FactorLayout& kernel_layout) {
  if (!(target.layout() == kernel_layout)) {
    throw std::invalid_argument("stein: kernel layout does not match the target layout");
  }
}

}  // namespace

ParticleHessian::ParticleHessian(LayoutPtr layout) : layout_(std::move(layout)) {
  const auto& pairs = layout_->block_pairs();
  const std::size_t D = layout_->factor_count();
  pair_lookup_.assign(D * D, kNoPair);
  blocks_.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    blocks_.push_back(Matrix::Zero(static_cast<Eigen::Index>(layout_->factor(a).size),
                                   static_cast<Eigen::Index>(layout_->factor(b).size)));
    pair_lookup_[a * D + b] = p;
    pair_lookup_[b * D + a] = p;
  }
}

Matrix ParticleHessian::block(std::size_t a, std::size_t b) const {
  const std::size_t p = pair_lookup_.at(a * layout_->factor_count() + b);
  if (p == kNoPair) {
    return Matrix::Zero(static_cast<Eigen::Index>(layout_->factor(a).size),
                        static_cast<Eigen::Index>(layout_->factor(b).size));
  }
  return a <= b ? blocks_[p] : Matrix(blocks_[p].transpose());
}

Vector ParticleHessian::apply(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != dim()) {
    throw std::invalid_argument("hessian_apply: vector length mismatch");
  }
  Vector out = Vector::Zero(v.size());
  const auto& pairs = layout_->block_pairs();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    const auto& ca = layout_->factor(a);
    const auto& cb = layout_->factor(b);
    const auto ao = static_cast<Eigen::Index>(ca.offset), as = static_cast<Eigen::Index>(ca.size);
    const auto bo = static_cast<Eigen::Index>(cb.offset), bs = static_cast<Eigen::Index>(cb.size);
    out.segment(ao, as).noalias() += blocks_[p] * v.segment(bo, bs);
    if (a != b) out.segment(bo, bs).noalias() += blocks_[p].transpose() * v.segment(ao, as);
  }
  return out;
}

Matrix ParticleHessian::to_dense() const {
  const auto d = static_cast<Eigen::Index>(dim());
  Matrix out = Matrix::Zero(d, d);
  const auto& pairs = layout_->block_pairs();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    const auto& ca = layout_->factor(a);
    const auto& cb = layout_->factor(b);
    const auto ao = static_cast<Eigen::Index>(ca.offset), as = static_cast<Eigen::Index>(ca.size);
    const auto bo = static_cast<Eigen::Index>(cb.offset), bs = static_cast<Eigen::Index>(cb.size);
    out.block(ao, bo, as, bs) = blocks_[p];
    if (a != b) out.block(bo, ao, bs, as) = blocks_[p].transpose();
  }
  return out;
}

Vector hessian_apply(const ParticleHessian& hessian, const Vector& v) { return hessian.apply(v); }

ParticleEvaluations evaluate_particles(const TargetModel& target, const RowMatrix& particles,
                                       bool with_hessians, int workers) {
  check_particles(particles, target.dim());
  const auto n = particles.rows();
  ParticleEvaluations out;
  out.log_density.resize(n);
  out.scores.resize(n, particles.cols());
  if (with_hessians) out.log_hessians.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t j) {
    const auto r = static_cast<Eigen::Index>(j);
    const Vector x = particles.row(r).transpose();
    TargetEval e = target.eval(x);
    out.log_density[r] = e.log_density;
    out.scores.row(r) = e.gradient.transpose();
    if (with_hessians) out.log_hessians[j] = target.hessian(x);
  });
  return out;
}

SteinGradientField SteinOperator::gradient_field(const RowMatrix& particles,
                                                 const ParticleEvaluations& evals,
                                                 int workers) const {
  SteinGradientField field(particles.rows(), particles.cols());
  parallel_for(static_cast<std::size_t>(particles.rows()), workers, [&](std::size_t i) {
    field.row(static_cast<Eigen::Index>(i)) = gradient(particles, evals, i).transpose();
  });
  return field;
}

// Per pair (j, i): diff = x_j - x_i, k_a = exp(-|diff_{S_a}|^2 / 2l^2) and
// d k_a / d (x_j)_{C_a} = -k_a diff_{C_a} / l^2.
Vector GraphicalStein::gradient(const RowMatrix& particles, const ParticleEvaluations& evals,
                                std::size_t i) const {
  const auto& layout = kernels_.layout();
  const std::size_t D = layout.factor_count();
  const double inv_sq = kernels_.spec().inv_sq();
  const auto n = particles.rows();
  const auto d = particles.cols();
  const auto ri = static_cast<Eigen::Index>(i);

  Vector out = Vector::Zero(d);
  Vector diff(d);
  std::vector<double> factor_sq(D);
  for (Eigen::Index j = 0; j < n; ++j) {
    diff = (particles.row(j) - particles.row(ri)).transpose();
    for (std::size_t b = 0; b < D; ++b) {
      const auto& cb = layout.factor(b);
      factor_sq[b] = diff.segment(static_cast<Eigen::Index>(cb.offset),
                                  static_cast<Eigen::Index>(cb.size)).squaredNorm();
    }
    for (std::size_t a = 0; a < D; ++a) {
      double sq = 0.0;
      for (std::size_t b : layout.blanket_factors(a)) sq += factor_sq[b];
      const double k = std::exp(-0.5 * sq * inv_sq);
      const auto& ca = layout.factor(a);
      const auto o = static_cast<Eigen::Index>(ca.offset);
      const auto s = static_cast<Eigen::Index>(ca.size);
      out.segment(o, s) += k * (evals.scores.row(j).segment(o, s).transpose() - inv_sq * diff.segment(o, s));
    }
  }
  out *= -1.0 / static_cast<double>(n);
  return out;
}

// Block (a, b) accumulates k_a k_b (-d2_ab log p(x_j) + diff_a diff_b^T / l^4):
// the kernel cross term (d_{z_a} k_b)(d_{z_b} k_a)^T reduces to this because
// C_a lies in S_b whenever the pair is materialized.
ParticleHessian GraphicalStein::hessian(const RowMatrix& particles, const ParticleEvaluations& evals,
                                        std::size_t i) const {
  const auto& layout = kernels_.layout();
  if (evals.log_hessians.size() != static_cast<std::size_t>(particles.rows())) {
    throw std::invalid_argument("stein: evaluations were computed without Hessians");
  }
  const std::size_t D = layout.factor_count();
  const double inv_sq = kernels_.spec().inv_sq();
  const auto n = particles.rows();
  const auto d = particles.cols();
  const auto ri = static_cast<Eigen::Index>(i);
  const auto& pairs = layout.block_pairs();

  ParticleHessian out(kernels_.layout_ptr());
  Vector diff(d);
  std::vector<double> factor_sq(D), k(D);
  for (Eigen::Index j = 0; j < n; ++j) {
    diff = (particles.row(j) - particles.row(ri)).transpose();
    for (std::size_t b = 0; b < D; ++b) {
      const auto& cb = layout.factor(b);
      factor_sq[b] = diff.segment(static_cast<Eigen::Index>(cb.offset),
                                  static_cast<Eigen::Index>(cb.size)).squaredNorm();
    }
    for (std::size_t a = 0; a < D; ++a) {
      double sq = 0.0;
      for (std::size_t b : layout.blanket_factors(a)) sq += factor_sq[b];
      k[a] = std::exp(-0.5 * sq * inv_sq);
    }
    const Matrix& hj = evals.log_hessians[static_cast<std::size_t>(j)];
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [a, b] = pairs[p];
      const auto& ca = layout.factor(a);
      const auto& cb = layout.factor(b);
      const auto ao = static_cast<Eigen::Index>(ca.offset), as = static_cast<Eigen::Index>(ca.size);
      const auto bo = static_cast<Eigen::Index>(cb.offset), bs = static_cast<Eigen::Index>(cb.size);
      const double kk = k[a] * k[b];
      out.pair_block(p).noalias() +=
          kk * (inv_sq * inv_sq * diff.segment(ao, as) * diff.segment(bo, bs).transpose() -
                hj.block(ao, bo, as, bs));
    }
  }
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t p = 0; p < pairs.size(); ++p) out.pair_block(p) *= scale;
  return out;
}

GlobalStein::GlobalStein(KernelSpec kernel, std::size_t dim)
    : kernel_(kernel), layout_(std::make_shared<FactorLayout>(FactorLayout::single(dim))) {}

Vector GlobalStein::gradient(const RowMatrix& particles, const ParticleEvaluations& evals,
                             std::size_t i) const {
  const double inv_sq = kernel_.inv_sq();
  const auto n = particles.rows();
  const auto ri = static_cast<Eigen::Index>(i);
  Vector out = Vector::Zero(particles.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector diff = (particles.row(j) - particles.row(ri)).transpose();
    const double k = std::exp(-0.5 * diff.squaredNorm() * inv_sq);
    out += k * (evals.scores.row(j).transpose() - inv_sq * diff);
  }
  out *= -1.0 / static_cast<double>(n);
  return out;
}

ParticleHessian GlobalStein::hessian(const RowMatrix& particles, const ParticleEvaluations& evals,
                                     std::size_t i) const {
  if (evals.log_hessians.size() != static_cast<std::size_t>(particles.rows())) {
    throw std::invalid_argument("stein: evaluations were computed without Hessians");
  }
  const double inv_sq = kernel_.inv_sq();
  const auto n = particles.rows();
  const auto ri = static_cast<Eigen::Index>(i);
  Matrix h = Matrix::Zero(particles.cols(), particles.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector diff = (particles.row(j) - particles.row(ri)).transpose();
    const double k = std::exp(-0.5 * diff.squaredNorm() * inv_sq);
    h.noalias() += (k * k) * (inv_sq * inv_sq * diff * diff.transpose() -
                              evals.log_hessians[static_cast<std::size_t>(j)]);
  }
  ParticleHessian out(layout_);
  out.pair_block(0) = h / static_cast<double>(n);
  return out;
}

SteinGradientField graphical_stein_gradient(const RowMatrix& particles, const TargetModel& target,
                                            const LocalKernelFamily& kernels, int workers) {
  check_layouts(target, kernels.layout());
  const auto evals = evaluate_particles(target, particles, false, workers);
  return GraphicalStein(kernels).gradient_field(particles, evals, workers);
}

SteinGradientField global_stein_gradient(const RowMatrix& particles, const TargetModel& target,
                                         const KernelSpec& kernel, int workers) {
  const auto evals = evaluate_particles(target, particles, false, workers);
  return GlobalStein(kernel, target.dim()).gradient_field(particles, evals, workers);
}

ParticleHessian graphical_hessian(const RowMatrix& particles, const TargetModel& target,
                                  const LocalKernelFamily& kernels, std::size_t i) {
  check_layouts(target, kernels.layout());
  if (i >= static_cast<std::size_t>(particles.rows())) throw std::out_of_range("stein: particle index");
  const auto evals = evaluate_particles(target, particles, true);
  return GraphicalStein(kernels).hessian(particles, evals, i);
}

ParticleHessian global_hessian(const RowMatrix& particles, const TargetModel& target,
                               const KernelSpec& kernel, std::size_t i) {
  if (i >= static_cast<std::size_t>(particles.rows())) throw std::out_of_range("stein: particle index");
  const auto evals = evaluate_particles(target, particles, true);
  return GlobalStein(kernel, target.dim()).hessian(particles, evals, i);
}

}  // namespace tsvi
