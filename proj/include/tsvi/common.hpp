#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tsvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Particle and sample matrices hold one point per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Seed = std::uint64_t;

// Raised when a log-density or its derivatives are undefined at the query
// point (e.g. two sensors joined by a range edge sit at the same position).
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised for all-identical samples where a distance-based statistic is
// undefined.
class DegenerateSampleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}

}  // namespace tsvi
