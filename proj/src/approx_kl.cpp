#include "tsvi/approx_kl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsvi {

std::vector<std::size_t> nystrom_subset(std::size_t population, std::size_t count,
                                        std::mt19937_64& rng) {
  if (count < 1 || count > population) {
    throw std::invalid_argument("approx_kl: Nystrom size must lie in [1, n]");
  }
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double nystrom_entropy_term(const RowMatrix& particles, const std::vector<std::size_t>& subset,
                            const KernelSpec& kernel) {
  RowMatrix points(static_cast<Eigen::Index>(subset.size()), particles.cols());
  for (std::size_t s = 0; s < subset.size(); ++s) {
    points.row(static_cast<Eigen::Index>(s)) = particles.row(static_cast<Eigen::Index>(subset[s]));
  }
  const Matrix scaled = rbf_gram(points, kernel.lengthscale) / static_cast<double>(particles.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(scaled, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw std::runtime_error("approx_kl: eigendecomposition failed");
  double h = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double lambda = eig.eigenvalues()[i];
    if (lambda > kEigenvalueFloor) h += lambda * std::log(lambda);
  }
  return h;
}

double approx_kl_subset(const RowMatrix& particles, const Vector& log_densities,
                        const std::vector<std::size_t>& subset, const KernelSpec& kernel) {
  if (log_densities.size() != particles.rows()) {
    throw std::invalid_argument("approx_kl: one log-density per particle required");
  }
  if (subset.empty() || subset.size() > static_cast<std::size_t>(particles.rows())) {
    throw std::invalid_argument("approx_kl: Nystrom size must lie in [1, n]");
  }
  const double cross = log_densities.mean();
  return -cross + nystrom_entropy_term(particles, subset, kernel);
}

double approx_kl(const RowMatrix& particles, const TargetModel& target, std::size_t nystrom_size,
                 const KernelSpec& kernel, Seed seed) {
  const auto n = static_cast<std::size_t>(particles.rows());
  if (nystrom_size < 1 || nystrom_size > n) {
    throw std::invalid_argument("approx_kl: Nystrom size must lie in [1, n]");
  }
  std::mt19937_64 rng(seed);
  const auto subset = nystrom_subset(n, nystrom_size, rng);
  Vector logp(particles.rows());
  for (Eigen::Index i = 0; i < particles.rows(); ++i) {
    logp[i] = target.log_density(particles.row(i).transpose());
  }
  return approx_kl_subset(particles, logp, subset, kernel);
}

}  // namespace tsvi
