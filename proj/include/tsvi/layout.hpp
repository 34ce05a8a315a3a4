#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

namespace tsvi {

struct DimRange {
  std::size_t offset = 0;
  std::size_t size = 0;

  std::size_t end() const { return offset + size; }
  bool contains(std::size_t dim) const { return dim >= offset && dim < end(); }
};

// Partition of the state dimensions into contiguous factors C_1..C_D, each
// with a Markov blanket S_a = C_a plus the dimensions of its blanket factors.
//
// Blankets are stored at factor granularity: S_a is always a union of whole
// factors. Construction validates the partition, that a is in its own
// blanket, and that the blanket relation is symmetric.
class FactorLayout {
 public:
  FactorLayout(std::vector<DimRange> factors,
               std::vector<std::vector<std::size_t>> blanket_factors);

  // Single factor spanning all dimensions (the global-kernel case).
  static FactorLayout single(std::size_t total_dim);
  // Factors of equal size `factor_dim` with every factor in every blanket.
  static FactorLayout fully_connected(std::size_t factor_count, std::size_t factor_dim);

  std::size_t total_dim() const { return total_dim_; }
  std::size_t factor_count() const { return factors_.size(); }
  const DimRange& factor(std::size_t a) const { return factors_.at(a); }
  const std::vector<DimRange>& factors() const { return factors_; }

  // Factor indices b whose dimensions intersect S_a (sorted, includes a).
  const std::vector<std::size_t>& blanket_factors(std::size_t a) const {
    return blanket_factors_.at(a);
  }
  // Dimension indices of S_a (sorted).
  const std::vector<std::size_t>& blanket_dims(std::size_t a) const {
    return blanket_dims_.at(a);
  }
  bool in_blanket(std::size_t a, std::size_t b) const;

  // Unordered factor pairs (a, b), a <= b, whose blankets overlap; these are
  // the only Hessian blocks that can be nonzero. Sorted lexicographically.
  const std::vector<std::pair<std::size_t, std::size_t>>& block_pairs() const {
    return pairs_;
  }
  std::size_t factor_of_dim(std::size_t dim) const { return dim_to_factor_.at(dim); }

  bool operator==(const FactorLayout& other) const {
    return total_dim_ == other.total_dim_ && blanket_factors_ == other.blanket_factors_ &&
           dim_to_factor_ == other.dim_to_factor_;
  }

 private:
  std::vector<DimRange> factors_;
  std::vector<std::vector<std::size_t>> blanket_factors_;
  std::vector<std::vector<std::size_t>> blanket_dims_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<std::size_t> dim_to_factor_;
  std::size_t total_dim_ = 0;
};

using LayoutPtr = std::shared_ptr<const FactorLayout>;

}  // namespace tsvi
