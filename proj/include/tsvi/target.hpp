#pragma once

#include <memory>
#include <string>

#include "tsvi/common.hpp"
#include "tsvi/layout.hpp"

namespace tsvi {

struct TargetEval {
  double log_density = 0.0;
  Vector gradient;
};

// Factor-structured target density. Log-densities include all normalizing
// constants. Derivatives are analytic; evaluators are const and safe to call
// concurrently.
class TargetModel {
 public:
  explicit TargetModel(LayoutPtr layout) : layout_(std::move(layout)) {}
  virtual ~TargetModel() = default;

  const FactorLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::size_t dim() const { return layout_->total_dim(); }

  double log_density(const Vector& x) const;
  TargetEval eval(const Vector& x) const;
  // Dense Hessian of log p. Blocks outside the blanket structure are zero.
  Matrix hessian(const Vector& x) const;
  // |C_a| x |C_b| block of the Hessian of log p.
  Matrix hessian_block(std::size_t a, std::size_t b, const Vector& x) const;

  virtual std::string dim_name(std::size_t d) const { return "x" + std::to_string(d); }

 protected:
  virtual double do_log_density(const Vector& x) const = 0;
  virtual double do_eval(const Vector& x, Vector& grad) const = 0;
  virtual void do_hessian(const Vector& x, Matrix& hess) const = 0;

 private:
  void check_input(const Vector& x) const;

  LayoutPtr layout_;
};

// Dimension indices of S_a.
inline const std::vector<std::size_t>& markov_blanket(const TargetModel& target, std::size_t a) {
  return target.layout().blanket_dims(a);
}

// Multivariate normal N(mean, covariance). The precision matrix must be
// block-sparse with respect to the given layout.
class GaussianTarget final : public TargetModel {
 public:
  GaussianTarget(Vector mean, const Matrix& covariance);
  GaussianTarget(Vector mean, const Matrix& covariance, LayoutPtr layout);

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  const Matrix& precision() const { return precision_; }

 protected:
  double do_log_density(const Vector& x) const override;
  double do_eval(const Vector& x, Vector& grad) const override;
  void do_hessian(const Vector& x, Matrix& hess) const override;

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix precision_;
  double log_normalizer_ = 0.0;
};

}  // namespace tsvi
