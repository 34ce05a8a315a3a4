#pragma once

#include <random>
#include <vector>

#include "tsvi/common.hpp"
#include "tsvi/kernels.hpp"
#include "tsvi/target.hpp"

namespace tsvi {

// Eigenvalues at or below this are dropped from the entropy sum.
inline constexpr double kEigenvalueFloor = 1e-12;

// `count` distinct indices drawn uniformly from [0, population), ascending.
std::vector<std::size_t> nystrom_subset(std::size_t population, std::size_t count,
                                        std::mt19937_64& rng);

// sum_i lambda_i log lambda_i over the eigenvalues of K_S / n, where K_S is
// the Gram matrix of the subset rows and n the full particle count.
double nystrom_entropy_term(const RowMatrix& particles, const std::vector<std::size_t>& subset,
                            const KernelSpec& kernel);

// -mean(log p) + sum lambda log lambda with a caller-chosen subset.
double approx_kl_subset(const RowMatrix& particles, const Vector& log_densities,
                        const std::vector<std::size_t>& subset, const KernelSpec& kernel);

// KL(q || p) estimate from a particle set (up to the constant that the
// kernel entropy approximation leaves out); the Nystrom subset is drawn from
// `seed`.
double approx_kl(const RowMatrix& particles, const TargetModel& target, std::size_t nystrom_size,
                 const KernelSpec& kernel, Seed seed);

}  // namespace tsvi
