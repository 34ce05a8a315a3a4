#pragma once

#include "tsvi/common.hpp"
#include "tsvi/layout.hpp"

namespace tsvi {

// RBF kernel k(x, y) = exp(-||x - y||^2 / (2 l^2)).
struct KernelSpec {
  double lengthscale = 1.0;

  explicit KernelSpec(double l = 1.0);
  double inv_sq() const { return 1.0 / (lengthscale * lengthscale); }
};

struct KernelValue {
  double value = 0.0;
  Vector grad_x;  // gradient with respect to the first argument
};

KernelValue rbf_eval(const Vector& x, const Vector& y, double lengthscale);

// m x m Gram matrix over the rows of `points`.
Matrix rbf_gram(const RowMatrix& points, double lengthscale);

struct LocalKernelValue {
  double value = 0.0;
  Vector grad_factor;   // d k_a / d x restricted to C_a
  Vector grad_blanket;  // d k_a / d x restricted to S_a, in blanket_dims order
};

// Local kernels k_a(x, y) = RBF on the S_a coordinates, one shared lengthscale.
class LocalKernelFamily {
 public:
  LocalKernelFamily(LayoutPtr layout, KernelSpec spec);

  const FactorLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  const KernelSpec& spec() const { return spec_; }
  double lengthscale() const { return spec_.lengthscale; }

  LocalKernelValue eval(std::size_t a, const Vector& x, const Vector& y) const;
  double value(std::size_t a, const Vector& x, const Vector& y) const;

 private:
  LayoutPtr layout_;
  KernelSpec spec_;
};

// Median of pairwise Euclidean distances between rows. Samples with more
// than `max_rows` rows are first reduced to a seeded uniform subsample.
double median_heuristic(const RowMatrix& sample, Seed seed = 0, std::size_t max_rows = 10000);

}  // namespace tsvi
