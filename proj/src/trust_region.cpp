#include "tsvi/trust_region.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "tsvi/approx_kl.hpp"
#include "tsvi/eval.hpp"
#include "tsvi/parallel.hpp"

namespace tsvi {

namespace {

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

Vector log_densities(const TargetModel& target, const RowMatrix& particles, int workers) {
  Vector out(particles.rows());
  parallel_for(static_cast<std::size_t>(particles.rows()), workers, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out[r] = target.log_density(particles.row(r).transpose());
  });
  return out;
}

double kl_lengthscale(const RowMatrix& particles, double fallback) {
  try {
    return median_heuristic(particles);
  } catch (const DegenerateSampleError&) {
    return fallback;
  }
}

}  // namespace

SteinLinearization linearize(const RowMatrix& particles, const TargetModel& target,
                             const SteinOperator& stein, int workers) {
  if (!(target.layout().total_dim() == stein.hessian_layout()->total_dim())) {
    throw std::invalid_argument("linearize: Stein operator dimension does not match the target");
  }
  const auto evals = evaluate_particles(target, particles, true, workers);
  SteinLinearization lin;
  lin.log_density = evals.log_density;
  lin.gradient.resize(particles.rows(), particles.cols());
  lin.hessians.assign(static_cast<std::size_t>(particles.rows()), ParticleHessian(stein.hessian_layout()));
  parallel_for(static_cast<std::size_t>(particles.rows()), workers, [&](std::size_t i) {
    lin.gradient.row(static_cast<Eigen::Index>(i)) = stein.gradient(particles, evals, i).transpose();
    lin.hessians[i] = stein.hessian(particles, evals, i);
  });
  lin.gradient_magnitude = gradient_magnitude(lin.gradient);
  return lin;
}

NewtonSteps solve_newton_steps(const SteinLinearization& lin, double radius, int workers) {
  const auto n = lin.gradient.rows();
  NewtonSteps out;
  out.steps = RowMatrix::Zero(n, lin.gradient.cols());
  out.status.resize(static_cast<std::size_t>(n));
  std::vector<double> model(static_cast<std::size_t>(n), 0.0);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Vector g = lin.gradient.row(r).transpose();
    const SteihaugResult res = cg_steihaug(lin.hessians[i], g, radius);
    out.steps.row(r) = res.step.transpose();
    out.status[i] = res.status;
    model[i] = res.model_change;
  });
  for (double m : model) out.model_change += m;
  return out;
}

TrustRegionKLState::TrustRegionKLState(double initial_radius) : radius_(initial_radius) {
  if (!(initial_radius > 0.0) || !std::isfinite(initial_radius)) {
    throw std::invalid_argument("TR-SVI-KL: initial radius must be positive");
  }
}

KlDecision TrustRegionKLState::update(double u, double o, double model_change,
                                      double gradient_magnitude) {
  ++iteration_;
  KlDecision d;
  if (model_change >= 0.0) {
    if (gradient_magnitude == 0.0) {
      d.converged = true;
      d.accepted = false;
      d.radius = radius_;
      last_rho_ = kNaN;
      return d;
    }
    radius_ *= kShrinkFactor;
    d.accepted = false;
    d.radius = radius_;
    last_rho_ = kNaN;
    return d;
  }
  const double rho = (u - o) / model_change;
  last_rho_ = rho;
  d.rho = rho;
  if (!std::isfinite(rho)) {
    radius_ *= kShrinkFactor;
    d.accepted = false;
    d.radius = radius_;
    return d;
  }
  if (rho < kShrinkBelow) {
    radius_ *= kShrinkFactor;
  } else if (rho > kExpandAbove) {
    radius_ *= kExpandFactor;
  }
  d.accepted = !(rho < 0.0);
  d.radius = radius_;
  return d;
}

AdaTrustState::AdaTrustState(double g0) : b_(g0), w_(g0), g_(g0), b_max_(g0) {
  if (!(g0 > 0.0) || !std::isfinite(g0)) {
    throw std::invalid_argument("TR-SVI-AT: initial gradient magnitude must be positive");
  }
}

void AdaTrustState::update(double g) {
  g_ = g;
  if (g < kImprovement * w_) {
    b_ = std::max(kBMin, kShrinkB * b_);
    w_ = g;
  } else {
    b_ = std::min(b_max_, b_ + g * g / b_);
  }
}

RunResult tr_svi_kl_run(ParticleSet particles, const TargetModel& target,
                        const LocalKernelFamily& kernels, double initial_radius,
                        std::size_t iterations, Seed seed, const DriverOptions& options) {
  const GraphicalStein stein(kernels);
  Stopwatch clock(options.record_wall_time);
  TrustRegionKLState state(initial_radius);
  std::mt19937_64 rng(seed);
  const std::size_t n = particles.size();
  const std::size_t nystrom = std::max<std::size_t>(1, n / 10);

  RunResult result;
  result.trace.method = "tr-svi-kl";
  SteinLinearization lin = linearize(particles.positions, target, stein, options.workers);
  TraceRow row0;
  row0.gradient_magnitude = lin.gradient_magnitude;
  row0.radius_or_step = state.radius();
  row0.wall_ms = clock.ms();
  result.trace.rows.push_back(row0);
  if (lin.gradient_magnitude == 0.0) result.trace.converged = true;

  for (std::size_t t = 1; t <= iterations && !result.trace.converged; ++t) {
    const double radius = state.radius();
    const NewtonSteps steps = solve_newton_steps(lin, radius, options.workers);
    const RowMatrix proposal = particles.positions + steps.steps;
    const auto subset = nystrom_subset(n, nystrom, rng);
    const Vector proposal_logp = log_densities(target, proposal, options.workers);
    const double u = approx_kl_subset(proposal, proposal_logp, subset,
                                      KernelSpec(kl_lengthscale(proposal, kernels.lengthscale())));
    const double o = approx_kl_subset(particles.positions, lin.log_density, subset,
                                      KernelSpec(kl_lengthscale(particles.positions, kernels.lengthscale())));
    const KlDecision decision = state.update(u, o, steps.model_change, lin.gradient_magnitude);
    if (decision.converged) {
      result.trace.converged = true;
      break;
    }
    if (decision.accepted) {
      particles.positions = proposal;
      lin = linearize(particles.positions, target, stein, options.workers);
    }
    ++particles.iteration;

    TraceRow row;
    row.iteration = t;
    row.gradient_magnitude = lin.gradient_magnitude;
    row.radius_or_step = radius;
    row.rho = decision.rho;
    row.approx_kl_u = u;
    row.approx_kl_o = o;
    row.model_change = steps.model_change;
    row.accepted = decision.accepted;
    row.wall_ms = clock.ms();
    result.trace.rows.push_back(row);
    if (lin.gradient_magnitude == 0.0) result.trace.converged = true;
  }
  result.particles = std::move(particles);
  return result;
}

RunResult tr_svi_at_run(ParticleSet particles, const TargetModel& target,
                        const LocalKernelFamily& kernels, std::size_t iterations,
                        const DriverOptions& options) {
  return tr_svi_at_run(std::move(particles), target, GraphicalStein(kernels), iterations, options);
}

RunResult tr_svi_at_run(ParticleSet particles, const TargetModel& target,
                        const SteinOperator& stein, std::size_t iterations,
                        const DriverOptions& options) {
  Stopwatch clock(options.record_wall_time);
  RunResult result;
  result.trace.method = "tr-svi-at";
  SteinLinearization lin = linearize(particles.positions, target, stein, options.workers);

  TraceRow row0;
  row0.gradient_magnitude = lin.gradient_magnitude;
  if (lin.gradient_magnitude == 0.0) {
    row0.wall_ms = clock.ms();
    result.trace.rows.push_back(row0);
    result.trace.converged = true;
    result.particles = std::move(particles);
    return result;
  }
  AdaTrustState state(lin.gradient_magnitude);
  if (state.g() < AdaTrustState::kBMin) {
    result.trace.warnings.push_back(
        "initial gradient magnitude is below b_min; the first improving step raises b above b_max");
  }
  row0.radius_or_step = state.radius();
  row0.b = state.b();
  row0.w = state.w();
  row0.wall_ms = clock.ms();
  result.trace.rows.push_back(row0);

  for (std::size_t t = 1; t <= iterations; ++t) {
    const double radius = state.radius();
    const NewtonSteps steps = solve_newton_steps(lin, radius, options.workers);
    particles.positions += steps.steps;
    ++particles.iteration;
    lin = linearize(particles.positions, target, stein, options.workers);

    TraceRow row;
    row.iteration = t;
    row.gradient_magnitude = lin.gradient_magnitude;
    row.radius_or_step = radius;
    row.model_change = steps.model_change;
    if (lin.gradient_magnitude == 0.0) {
      row.wall_ms = clock.ms();
      result.trace.rows.push_back(row);
      result.trace.converged = true;
      break;
    }
    state.update(lin.gradient_magnitude);
    row.b = state.b();
    row.w = state.w();
    row.wall_ms = clock.ms();
    result.trace.rows.push_back(row);
  }
  result.particles = std::move(particles);
  return result;
}

}  // namespace tsvi
