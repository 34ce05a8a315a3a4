#include "tsvi/layout.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace tsvi {

FactorLayout::FactorLayout(std::vector<DimRange> factors,
                           std::vector<std::vector<std::size_t>> blanket_factors)
    : factors_(std::move(factors)), blanket_factors_(std::move(blanket_factors)) {
  if (factors_.empty()) throw std::invalid_argument("FactorLayout: no factors");
  if (blanket_factors_.size() != factors_.size()) {
    throw std::invalid_argument("FactorLayout: one blanket per factor required");
  }
  std::size_t expected = 0;
  for (std::size_t a = 0; a < factors_.size(); ++a) {
    if (factors_[a].size == 0) {
      throw std::invalid_argument("FactorLayout: factor " + std::to_string(a) + " is empty");
    }
    if (factors_[a].offset != expected) {
      throw std::invalid_argument("FactorLayout: factors must tile the state contiguously");
    }
    expected = factors_[a].end();
  }
  total_dim_ = expected;

  dim_to_factor_.resize(total_dim_);
  for (std::size_t a = 0; a < factors_.size(); ++a) {
    for (std::size_t d = factors_[a].offset; d < factors_[a].end(); ++d) dim_to_factor_[d] = a;
  }

  const std::size_t D = factors_.size();
  for (std::size_t a = 0; a < D; ++a) {
    auto& bl = blanket_factors_[a];
    bl.push_back(a);
    std::sort(bl.begin(), bl.end());
    bl.erase(std::unique(bl.begin(), bl.end()), bl.end());
    if (bl.back() >= D) throw std::invalid_argument("FactorLayout: blanket factor out of range");
  }
  for (std::size_t a = 0; a < D; ++a) {
    for (std::size_t b : blanket_factors_[a]) {
      if (!std::binary_search(blanket_factors_[b].begin(), blanket_factors_[b].end(), a)) {
        throw std::invalid_argument("FactorLayout: blanket relation is not symmetric (" +
                                    std::to_string(a) + ", " + std::to_string(b) + ")");
      }
    }
  }

  blanket_dims_.resize(D);
  for (std::size_t a = 0; a < D; ++a) {
    for (std::size_t b : blanket_factors_[a]) {
      for (std::size_t d = factors_[b].offset; d < factors_[b].end(); ++d) {
        blanket_dims_[a].push_back(d);
      }
    }
    for (std::size_t b : blanket_factors_[a]) {
      if (b >= a) pairs_.emplace_back(a, b);
    }
  }
}

FactorLayout FactorLayout::single(std::size_t total_dim) {
  return FactorLayout({DimRange{0, total_dim}}, {{}});
}

FactorLayout FactorLayout::fully_connected(std::size_t factor_count, std::size_t factor_dim) {
  std::vector<DimRange> factors;
  std::vector<std::vector<std::size_t>> blankets(factor_count);
  for (std::size_t a = 0; a < factor_count; ++a) {
    factors.push_back({a * factor_dim, factor_dim});
    for (std::size_t b = 0; b < factor_count; ++b) blankets[a].push_back(b);
  }
  return FactorLayout(std::move(factors), std::move(blankets));
}

bool FactorLayout::in_blanket(std::size_t a, std::size_t b) const {
  const auto& bl = blanket_factors_.at(a);
  return std::binary_search(bl.begin(), bl.end(), b);
}

}  // namespace tsvi
