#pragma once

#include <memory>
#include <vector>

#include "tsvi/common.hpp"
#include "tsvi/kernels.hpp"
#include "tsvi/target.hpp"

namespace tsvi {

struct ParticleSet {
  RowMatrix positions;  // n x total_dim
  std::size_t iteration = 0;
  Seed seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(positions.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(positions.cols()); }
};

// Row i holds the functional gradient evaluated at particle i.
using SteinGradientField = RowMatrix;

// Symmetric per-particle Hessian stored as one block per unordered factor
// pair with overlapping blankets (FactorLayout::block_pairs order). Blocks
// that are not stored are zero.
class ParticleHessian {
 public:
  explicit ParticleHessian(LayoutPtr layout);

  const FactorLayout& layout() const { return *layout_; }
  std::size_t dim() const { return layout_->total_dim(); }

  // Stored block for pair index p, |C_a| x |C_b| with (a, b) = block_pairs()[p].
  Matrix& pair_block(std::size_t p) { return blocks_[p]; }
  const Matrix& pair_block(std::size_t p) const { return blocks_[p]; }
  // Block (a, b) in either orientation; zero if not materialized.
  Matrix block(std::size_t a, std::size_t b) const;

  Vector apply(const Vector& v) const;
  Matrix to_dense() const;

 private:
  LayoutPtr layout_;
  std::vector<Matrix> blocks_;
  std::vector<std::size_t> pair_lookup_;  // a * D + b -> pair index, or npos
};

// Block-sparse product H v.
Vector hessian_apply(const ParticleHessian& hessian, const Vector& v);

// Target quantities at every particle, computed once per iteration.
struct ParticleEvaluations {
  Vector log_density;                 // n
  RowMatrix scores;                   // n x d, rows are grad log p
  std::vector<Matrix> log_hessians;   // n dense Hessians of log p (optional)
};

ParticleEvaluations evaluate_particles(const TargetModel& target, const RowMatrix& particles,
                                       bool with_hessians, int workers = 1);

// Stein functional gradient and second variation over a particle set. The
// empirical mean runs over all particles (including i itself) in ascending
// index order.
class SteinOperator {
 public:
  virtual ~SteinOperator() = default;

  virtual const LayoutPtr& hessian_layout() const = 0;
  virtual Vector gradient(const RowMatrix& particles, const ParticleEvaluations& evals,
                          std::size_t i) const = 0;
  virtual ParticleHessian hessian(const RowMatrix& particles, const ParticleEvaluations& evals,
                                  std::size_t i) const = 0;

  SteinGradientField gradient_field(const RowMatrix& particles, const ParticleEvaluations& evals,
                                    int workers = 1) const;
};

// Local kernels k_a on the Markov blankets.
class GraphicalStein final : public SteinOperator {
 public:
  explicit GraphicalStein(LocalKernelFamily kernels) : kernels_(std::move(kernels)) {}

  const LocalKernelFamily& kernels() const { return kernels_; }
  const LayoutPtr& hessian_layout() const override { return kernels_.layout_ptr(); }
  Vector gradient(const RowMatrix& particles, const ParticleEvaluations& evals,
                  std::size_t i) const override;
  ParticleHessian hessian(const RowMatrix& particles, const ParticleEvaluations& evals,
                          std::size_t i) const override;

 private:
  LocalKernelFamily kernels_;
};

// One RBF kernel over the full state, dense Hessian.
class GlobalStein final : public SteinOperator {
 public:
  GlobalStein(KernelSpec kernel, std::size_t dim);

  const KernelSpec& kernel() const { return kernel_; }
  const LayoutPtr& hessian_layout() const override { return layout_; }
  Vector gradient(const RowMatrix& particles, const ParticleEvaluations& evals,
                  std::size_t i) const override;
  ParticleHessian hessian(const RowMatrix& particles, const ParticleEvaluations& evals,
                          std::size_t i) const override;

 private:
  KernelSpec kernel_;
  LayoutPtr layout_;
};

SteinGradientField graphical_stein_gradient(const RowMatrix& particles, const TargetModel& target,
                                            const LocalKernelFamily& kernels, int workers = 1);
SteinGradientField global_stein_gradient(const RowMatrix& particles, const TargetModel& target,
                                         const KernelSpec& kernel, int workers = 1);
ParticleHessian graphical_hessian(const RowMatrix& particles, const TargetModel& target,
                                  const LocalKernelFamily& kernels, std::size_t i);
ParticleHessian global_hessian(const RowMatrix& particles, const TargetModel& target,
                               const KernelSpec& kernel, std::size_t i);

}  // namespace tsvi
