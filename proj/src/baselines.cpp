#include "tsvi/baselines.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "tsvi/eval.hpp"

namespace tsvi {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start, bool enabled) {
  if (!enabled) return 0.0;
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

SteinGradientField field_at(const RowMatrix& particles, const TargetModel& target,
                            const SteinOperator& stein, int workers) {
  const auto evals = evaluate_particles(target, particles, false, workers);
  return stein.gradient_field(particles, evals, workers);
}

// Shared loop for first-order methods: x <- x + displacement(-field, t).
template <typename Displacement>
RunResult run_first_order(const char* method, ParticleSet particles, const TargetModel& target,
                          const SteinOperator& stein, std::size_t iterations,
                          const DriverOptions& options, Displacement&& displacement,
                          const std::function<double(std::size_t)>& step_size) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  result.trace.method = method;
  SteinGradientField field = field_at(particles.positions, target, stein, options.workers);
  TraceRow row0;
  row0.gradient_magnitude = gradient_magnitude(field);
  row0.radius_or_step = step_size(0);
  row0.wall_ms = elapsed_ms(start, options.record_wall_time);
  result.trace.rows.push_back(row0);
  for (std::size_t t = 0; t < iterations; ++t) {
    particles.positions += displacement(RowMatrix(-field), t);
    ++particles.iteration;
    field = field_at(particles.positions, target, stein, options.workers);
    TraceRow row;
    row.iteration = t + 1;
    row.gradient_magnitude = gradient_magnitude(field);
    row.radius_or_step = step_size(t);
    row.wall_ms = elapsed_ms(start, options.record_wall_time);
    result.trace.rows.push_back(row);
  }
  result.particles = std::move(particles);
  return result;
}

}  // namespace

const char* to_string(StepKind kind) {
  switch (kind) {
    case StepKind::Static: return "static";
    case StepKind::Decayed: return "decayed";
    case StepKind::AdaGrad: return "adagrad";
  }
  return "unknown";
}

StepSchedule::StepSchedule(StepKind kind, double step, double decay)
    : kind_(kind), step_(step), decay_(decay) {
  if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("step schedule: step must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("step schedule: decay must lie in (0, 1]");
}

StepSchedule StepSchedule::fixed(double step) { return {StepKind::Static, step, 1.0}; }
StepSchedule StepSchedule::decayed(double step, double decay) { return {StepKind::Decayed, step, decay}; }
StepSchedule StepSchedule::adagrad(double step) { return {StepKind::AdaGrad, step, 1.0}; }

double StepSchedule::step_size(std::size_t t) const {
  if (kind_ == StepKind::Decayed) return step_ * std::pow(decay_, static_cast<double>(t));
  return step_;
}

RowMatrix StepSchedule::displacement(const RowMatrix& direction, std::size_t t) {
  if (kind_ != StepKind::AdaGrad) return step_size(t) * direction;
  if (accum_.size() == 0) accum_ = RowMatrix::Zero(direction.rows(), direction.cols());
  if (accum_.rows() != direction.rows() || accum_.cols() != direction.cols()) {
    throw std::invalid_argument("step schedule: direction shape changed between steps");
  }
  accum_.array() += direction.array().square();
  return (step_ * direction.array() / (accum_.array().sqrt() + kEpsilon)).matrix();
}

RowMatrix svgd_step(const RowMatrix& particles, const TargetModel& target, const KernelSpec& kernel,
                    double step, int workers) {
  if (!(step > 0.0)) throw std::invalid_argument("svgd_step: step must be positive");
  return particles - step * global_stein_gradient(particles, target, kernel, workers);
}

RowMatrix mp_svgd_step(const RowMatrix& particles, const TargetModel& target,
                       const LocalKernelFamily& kernels, StepSchedule& schedule, std::size_t t,
                       int workers) {
  const RowMatrix direction = -graphical_stein_gradient(particles, target, kernels, workers);
  return particles + schedule.displacement(direction, t);
}

RowMatrix svn_ctr_step(const RowMatrix& particles, const TargetModel& target,
                       const KernelSpec& kernel, double radius, int workers) {
  if (!(radius > 0.0)) throw std::invalid_argument("svn_ctr_step: radius must be positive");
  const GlobalStein stein(kernel, target.dim());
  const auto lin = linearize(particles, target, stein, workers);
  return particles + solve_newton_steps(lin, radius, workers).steps;
}

RunResult run_svgd(ParticleSet particles, const TargetModel& target, const KernelSpec& kernel,
                   double step, std::size_t iterations, const DriverOptions& options) {
  if (!(step > 0.0)) throw std::invalid_argument("svgd: step must be positive");
  const GlobalStein stein(kernel, target.dim());
  return run_first_order(
      "svgd", std::move(particles), target, stein, iterations, options,
      [step](const RowMatrix& d, std::size_t) { return RowMatrix(step * d); },
      [step](std::size_t) { return step; });
}

RunResult run_mp_svgd(ParticleSet particles, const TargetModel& target,
                      const LocalKernelFamily& kernels, StepSchedule schedule,
                      std::size_t iterations, const DriverOptions& options) {
  const GraphicalStein stein(kernels);
  const char* name = schedule.kind() == StepKind::Static    ? "mp-svgd"
                     : schedule.kind() == StepKind::Decayed ? "mp-svgd-dlr"
                                                            : "mp-svgd-ag";
  return run_first_order(
      name, std::move(particles), target, stein, iterations, options,
      [&schedule](const RowMatrix& d, std::size_t t) { return schedule.displacement(d, t); },
      [&schedule](std::size_t t) { return schedule.step_size(t); });
}

RunResult run_svn_ctr(ParticleSet particles, const TargetModel& target, const KernelSpec& kernel,
                      double radius, std::size_t iterations, const DriverOptions& options) {
  if (!(radius > 0.0)) throw std::invalid_argument("svn-ctr: radius must be positive");
  const auto start = std::chrono::steady_clock::now();
  const GlobalStein stein(kernel, target.dim());
  RunResult result;
  result.trace.method = "svn-ctr";
  SteinLinearization lin = linearize(particles.positions, target, stein, options.workers);
  TraceRow row0;
  row0.gradient_magnitude = lin.gradient_magnitude;
  row0.radius_or_step = radius;
  row0.wall_ms = elapsed_ms(start, options.record_wall_time);
  result.trace.rows.push_back(row0);
  for (std::size_t t = 1; t <= iterations; ++t) {
    const NewtonSteps steps = solve_newton_steps(lin, radius, options.workers);
    particles.positions += steps.steps;
    ++particles.iteration;
    lin = linearize(particles.positions, target, stein, options.workers);
    TraceRow row;
    row.iteration = t;
    row.gradient_magnitude = lin.gradient_magnitude;
    row.radius_or_step = radius;
    row.model_change = steps.model_change;
    row.wall_ms = elapsed_ms(start, options.record_wall_time);
    result.trace.rows.push_back(row);
  }
  result.particles = std::move(particles);
  return result;
}

}  // namespace tsvi
