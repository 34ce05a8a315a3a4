#include "tsvi/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace tsvi {

KernelSpec::KernelSpec(double l) : lengthscale(l) {
  if (!(l > 0.0) || !std::isfinite(l)) {
    throw std::invalid_argument("kernel lengthscale must be positive and finite");
  }
}

KernelValue rbf_eval(const Vector& x, const Vector& y, double lengthscale) {
  const KernelSpec spec(lengthscale);
  if (x.size() != y.size()) throw std::invalid_argument("rbf_eval: length mismatch");
  require_finite(x, "rbf_eval: x");
  require_finite(y, "rbf_eval: y");
  const Vector diff = x - y;
  KernelValue out;
  out.value = std::exp(-0.5 * diff.squaredNorm() * spec.inv_sq());
  out.grad_x = -(out.value * spec.inv_sq()) * diff;
  return out;
}

Matrix rbf_gram(const RowMatrix& points, double lengthscale) {
  const KernelSpec spec(lengthscale);
  const auto m = points.rows();
  Matrix k(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double v = std::exp(-0.5 * (points.row(i) - points.row(j)).squaredNorm() * spec.inv_sq());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

LocalKernelFamily::LocalKernelFamily(LayoutPtr layout, KernelSpec spec)
    : layout_(std::move(layout)), spec_(spec) {
  if (!layout_) throw std::invalid_argument("LocalKernelFamily: null layout");
}

double LocalKernelFamily::value(std::size_t a, const Vector& x, const Vector& y) const {
  double sq = 0.0;
  for (std::size_t d : layout_->blanket_dims(a)) {
    const double t = x[static_cast<Eigen::Index>(d)] - y[static_cast<Eigen::Index>(d)];
    sq += t * t;
  }
  return std::exp(-0.5 * sq * spec_.inv_sq());
}

LocalKernelValue LocalKernelFamily::eval(std::size_t a, const Vector& x, const Vector& y) const {
  const auto total = static_cast<Eigen::Index>(layout_->total_dim());
  if (x.size() != total || y.size() != total) {
    throw std::invalid_argument("local kernel: state length mismatch");
  }
  require_finite(x, "local kernel: x");
  require_finite(y, "local kernel: y");
  const auto& dims = layout_->blanket_dims(a);
  Vector diff(static_cast<Eigen::Index>(dims.size()));
  for (std::size_t s = 0; s < dims.size(); ++s) {
    diff[static_cast<Eigen::Index>(s)] =
        x[static_cast<Eigen::Index>(dims[s])] - y[static_cast<Eigen::Index>(dims[s])];
  }
  LocalKernelValue out;
  out.value = std::exp(-0.5 * diff.squaredNorm() * spec_.inv_sq());
  out.grad_blanket = -(out.value * spec_.inv_sq()) * diff;
  const auto& ca = layout_->factor(a);
  out.grad_factor.resize(static_cast<Eigen::Index>(ca.size));
  for (std::size_t s = 0; s < dims.size(); ++s) {
    if (ca.contains(dims[s])) {
      out.grad_factor[static_cast<Eigen::Index>(dims[s] - ca.offset)] =
          out.grad_blanket[static_cast<Eigen::Index>(s)];
    }
  }
  return out;
}

double median_heuristic(const RowMatrix& sample, Seed seed, std::size_t max_rows) {
  if (sample.rows() < 2) throw std::invalid_argument("median_heuristic: need at least 2 rows");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(sample.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  if (rows.size() > max_rows) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < max_rows; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(max_rows);
    std::sort(rows.begin(), rows.end());
  }
  std::vector<double> dist;
  dist.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      dist.push_back((sample.row(rows[i]) - sample.row(rows[j])).norm());
    }
  }
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) {
    if (*std::max_element(dist.begin(), dist.end()) == 0.0) {
      throw DegenerateSampleError("median_heuristic: all rows are identical");
    }
    throw DegenerateSampleError("median_heuristic: median pairwise distance is zero");
  }
  return median;
}

}  // namespace tsvi
