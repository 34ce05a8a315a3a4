#pragma once

#include <optional>
#include <string>

#include "tsvi/common.hpp"
#include "tsvi/stein.hpp"
#include "tsvi/target.hpp"

namespace tsvi {

// Biased (V-statistic) squared MMD with an RBF kernel:
//   mean k(X, X) - 2 mean k(X, Y) + mean k(Y, Y).
// Exactly symmetric in its two sample arguments.
double mmd(const RowMatrix& x, const RowMatrix& y, double lengthscale, int workers = 1);

// Fixed reference sample with its self-similarity term precomputed.
class MmdReference {
 public:
  MmdReference(RowMatrix reference, double lengthscale, int workers = 1);

  double lengthscale() const { return lengthscale_; }
  const RowMatrix& reference() const { return reference_; }
  double operator()(const RowMatrix& candidate, int workers = 1) const;

 private:
  RowMatrix reference_;
  double lengthscale_;
  double self_term_;
};

// Seeded uniform row subsample without replacement, original row order kept.
// Returns the input unchanged if it has at most `max_rows` rows.
RowMatrix subsample_rows(const RowMatrix& sample, std::size_t max_rows, Seed seed);

struct MmdOptions {
  std::optional<double> lengthscale;  // default: median heuristic on the reference
  std::size_t reference_cap = 20000;
  std::size_t median_cap = 10000;
  Seed seed = 0;
  int workers = 1;
};

struct MetricReport {
  std::string metric = "mmd_squared_biased";
  double value = 0.0;
  double lengthscale = 0.0;
  std::size_t candidate_size = 0;
  std::size_t reference_size = 0;
  std::size_t reference_subsample = 0;
  Seed seed = 0;
};

MetricReport evaluate_mmd(const RowMatrix& candidate, const RowMatrix& reference,
                          const MmdOptions& options = {});

// sqrt(sum_i ||g_i||^2), rows summed in order.
double gradient_magnitude(const SteinGradientField& field);

struct MetropolisResult {
  RowMatrix samples;
  double acceptance_rate = 0.0;
};

// Random-walk Metropolis with isotropic Gaussian proposals. Keeps every
// `thinning`-th state after `burn_in` steps, `chain_length` steps in total.
MetropolisResult metropolis_reference(const TargetModel& target, const Vector& initial,
                                      std::size_t chain_length, double proposal_scale,
                                      std::size_t burn_in, std::size_t thinning, Seed seed);

// Single accept/reject rule: always accept when log_ratio >= 0, otherwise
// accept when log(uniform) < log_ratio.
bool metropolis_accept(double log_ratio, double uniform01);

}  // namespace tsvi
