#include "tsvi/target.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tsvi {

void TargetModel::check_input(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) {
    throw std::invalid_argument("target: state has length " + std::to_string(x.size()) +
                                ", expected " + std::to_string(dim()));
  }
  require_finite(x, "target: state");
}

double TargetModel::log_density(const Vector& x) const {
  check_input(x);
  return do_log_density(x);
}

TargetEval TargetModel::eval(const Vector& x) const {
  check_input(x);
  TargetEval out;
  out.gradient = Vector::Zero(x.size());
  out.log_density = do_eval(x, out.gradient);
  return out;
}

Matrix TargetModel::hessian(const Vector& x) const {
  check_input(x);
  Matrix h = Matrix::Zero(x.size(), x.size());
  do_hessian(x, h);
  return h;
}

Matrix TargetModel::hessian_block(std::size_t a, std::size_t b, const Vector& x) const {
  const auto& ca = layout().factor(a);
  const auto& cb = layout().factor(b);
  if (!layout().in_blanket(a, b)) {
    check_input(x);
    return Matrix::Zero(ca.size, cb.size);
  }
  return hessian(x).block(ca.offset, cb.offset, ca.size, cb.size);
}

GaussianTarget::GaussianTarget(Vector mean, const Matrix& covariance)
    : GaussianTarget(mean, covariance,
                     std::make_shared<FactorLayout>(FactorLayout::single(mean.size()))) {}

GaussianTarget::GaussianTarget(Vector mean, const Matrix& covariance, LayoutPtr layout)
    : TargetModel(std::move(layout)), mean_(std::move(mean)), covariance_(covariance) {
  const auto d = static_cast<Eigen::Index>(this->layout().total_dim());
  if (mean_.size() != d || covariance_.rows() != d || covariance_.cols() != d) {
    throw std::invalid_argument("GaussianTarget: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("GaussianTarget: covariance is not positive definite");
  }
  precision_ = llt.solve(Matrix::Identity(d, d));
  precision_ = 0.5 * (precision_ + precision_.transpose());
  const double log_det_cov = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  log_normalizer_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det_cov);

  const auto& lay = this->layout();
  const double scale = precision_.cwiseAbs().maxCoeff();
  for (std::size_t a = 0; a < lay.factor_count(); ++a) {
    for (std::size_t b = 0; b < lay.factor_count(); ++b) {
      if (lay.in_blanket(a, b)) continue;
      const auto& ca = lay.factor(a);
      const auto& cb = lay.factor(b);
      if (precision_.block(ca.offset, cb.offset, ca.size, cb.size).cwiseAbs().maxCoeff() >
          1e-10 * scale) {
        throw std::invalid_argument("GaussianTarget: precision couples factors outside a blanket");
      }
      precision_.block(ca.offset, cb.offset, ca.size, cb.size).setZero();
    }
  }
}

double GaussianTarget::do_log_density(const Vector& x) const {
  const Vector r = x - mean_;
  return log_normalizer_ - 0.5 * r.dot(precision_ * r);
}

double GaussianTarget::do_eval(const Vector& x, Vector& grad) const {
  const Vector r = x - mean_;
  grad = -(precision_ * r);
  return log_normalizer_ + 0.5 * r.dot(grad);
}

void GaussianTarget::do_hessian(const Vector&, Matrix& hess) const { hess = -precision_; }

}  // namespace tsvi
