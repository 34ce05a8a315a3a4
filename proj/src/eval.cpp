#include "tsvi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "tsvi/kernels.hpp"
#include "tsvi/parallel.hpp"

namespace tsvi {

namespace {

double kernel_sq(const RowMatrix& a, Eigen::Index i, const RowMatrix& b, Eigen::Index j) {
  double s = 0.0;
  const double* pa = a.data() + i * a.cols();
  const double* pb = b.data() + j * b.cols();
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double t = pa[c] - pb[c];
    s += t * t;
  }
  return s;
}

// Mean of k over all ordered pairs of rows of `a`.
double self_mean(const RowMatrix& a, double inv_sq, int workers) {
  const auto n = a.rows();
  std::vector<double> rows(static_cast<std::size_t>(n), 0.0);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    double s = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) s += std::exp(-0.5 * inv_sq * kernel_sq(a, i, a, j));
    rows[ii] = s;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return (static_cast<double>(n) + 2.0 * total) / (static_cast<double>(n) * static_cast<double>(n));
}

double cross_mean(const RowMatrix& a, const RowMatrix& b, double inv_sq, int workers) {
  std::vector<double> rows(static_cast<std::size_t>(a.rows()), 0.0);
  parallel_for(static_cast<std::size_t>(a.rows()), workers, [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    double s = 0.0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) s += std::exp(-0.5 * inv_sq * kernel_sq(a, i, b, j));
    rows[ii] = s;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

// Strict weak order on samples so the cross term is always summed from the
// same side.
bool sample_less(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

void check_pair(const RowMatrix& x, const RowMatrix& y) {
  if (x.rows() < 1 || y.rows() < 1) throw std::invalid_argument("mmd: empty sample");
  if (x.cols() != y.cols()) throw std::invalid_argument("mmd: column count mismatch");
}

}  // namespace

double mmd(const RowMatrix& x, const RowMatrix& y, double lengthscale, int workers) {
  check_pair(x, y);
  const double inv_sq = KernelSpec(lengthscale).inv_sq();
  const double xx = self_mean(x, inv_sq, workers);
  const double yy = self_mean(y, inv_sq, workers);
  const double xy = sample_less(y, x) ? cross_mean(y, x, inv_sq, workers)
                                      : cross_mean(x, y, inv_sq, workers);
  return (xx + yy) - 2.0 * xy;
}

MmdReference::MmdReference(RowMatrix reference, double lengthscale, int workers)
    : reference_(std::move(reference)), lengthscale_(KernelSpec(lengthscale).lengthscale) {
  if (reference_.rows() < 1) throw std::invalid_argument("mmd: empty reference");
  self_term_ = self_mean(reference_, 1.0 / (lengthscale_ * lengthscale_), workers);
}

double MmdReference::operator()(const RowMatrix& candidate, int workers) const {
  check_pair(candidate, reference_);
  const double inv_sq = 1.0 / (lengthscale_ * lengthscale_);
  const double xx = self_mean(candidate, inv_sq, workers);
  const double xy = cross_mean(candidate, reference_, inv_sq, workers);
  return (xx + self_term_) - 2.0 * xy;
}

RowMatrix subsample_rows(const RowMatrix& sample, std::size_t max_rows, Seed seed) {
  const auto n = static_cast<std::size_t>(sample.rows());
  if (n <= max_rows) return sample;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < max_rows; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  RowMatrix out(static_cast<Eigen::Index>(max_rows), sample.cols());
  for (std::size_t r = 0; r < max_rows; ++r) {
    out.row(static_cast<Eigen::Index>(r)) = sample.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

MetricReport evaluate_mmd(const RowMatrix& candidate, const RowMatrix& reference,
                          const MmdOptions& options) {
  MetricReport report;
  report.seed = options.seed;
  report.candidate_size = static_cast<std::size_t>(candidate.rows());
  report.reference_size = static_cast<std::size_t>(reference.rows());
  report.lengthscale = options.lengthscale
                           ? *options.lengthscale
                           : median_heuristic(reference, options.seed, options.median_cap);
  const RowMatrix ref = subsample_rows(reference, options.reference_cap, options.seed);
  report.reference_subsample = static_cast<std::size_t>(ref.rows());
  report.value = MmdReference(ref, report.lengthscale, options.workers)(candidate, options.workers);
  return report;
}

double gradient_magnitude(const SteinGradientField& field) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < field.rows(); ++i) total += field.row(i).squaredNorm();
  return std::sqrt(total);
}

bool metropolis_accept(double log_ratio, double uniform01) {
  if (log_ratio >= 0.0) return true;
  return std::log(uniform01) < log_ratio;
}

MetropolisResult metropolis_reference(const TargetModel& target, const Vector& initial,
                                      std::size_t chain_length, double proposal_scale,
                                      std::size_t burn_in, std::size_t thinning, Seed seed) {
  if (!(proposal_scale > 0.0)) throw std::invalid_argument("metropolis: proposal scale must be positive");
  if (thinning == 0) throw std::invalid_argument("metropolis: thinning must be >= 1");
  double current_logp = target.log_density(initial);
  if (!std::isfinite(current_logp)) {
    throw std::invalid_argument("metropolis: log-density is not finite at the initial point");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t kept = chain_length > burn_in ? (chain_length - burn_in + thinning - 1) / thinning : 0;
  MetropolisResult out;
  out.samples.resize(static_cast<Eigen::Index>(kept), initial.size());
  Vector current = initial;
  Vector proposal(initial.size());
  std::size_t accepted = 0;
  Eigen::Index row = 0;
  for (std::size_t step = 0; step < chain_length; ++step) {
    for (Eigen::Index c = 0; c < proposal.size(); ++c) proposal[c] = current[c] + proposal_scale * normal(rng);
    const double logp = target.log_density(proposal);
    const double u = 1.0 - unit(rng);  // (0, 1]
    if (std::isfinite(logp) && metropolis_accept(logp - current_logp, u)) {
      current.swap(proposal);
      current_logp = logp;
      ++accepted;
    }
    if (step >= burn_in && (step - burn_in) % thinning == 0) out.samples.row(row++) = current.transpose();
  }
  out.acceptance_rate = chain_length ? static_cast<double>(accepted) / static_cast<double>(chain_length) : 0.0;
  return out;
}

}  // namespace tsvi
