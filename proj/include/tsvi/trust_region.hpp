#pragma once

#include <limits>
#include <string>
#include <vector>

#include "tsvi/stein.hpp"
#include "tsvi/steihaug.hpp"

namespace tsvi {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One trace row per iteration; row 0 is the initial snapshot.
struct TraceRow {
  std::size_t iteration = 0;
  double gradient_magnitude = 0.0;
  double radius_or_step = kNaN;
  double rho = kNaN;
  double approx_kl_u = kNaN;
  double approx_kl_o = kNaN;
  double model_change = kNaN;
  double b = kNaN;
  double w = kNaN;
  bool accepted = true;
  double wall_ms = 0.0;
};

struct Trace {
  std::string method;
  std::vector<TraceRow> rows;
  std::vector<std::string> warnings;
  bool converged = false;
};

struct RunResult {
  ParticleSet particles;
  Trace trace;
};

// Stein gradient field and per-particle Hessians at one particle set.
struct SteinLinearization {
  SteinGradientField gradient;
  std::vector<ParticleHessian> hessians;
  Vector log_density;
  double gradient_magnitude = 0.0;
};

SteinLinearization linearize(const RowMatrix& particles, const TargetModel& target,
                             const SteinOperator& stein, int workers = 1);

struct NewtonSteps {
  RowMatrix steps;
  // sum_i [1/2 w_i^T H_i w_i + g_i^T w_i]
  double model_change = 0.0;
  std::vector<SteihaugStatus> status;
};

// Solves H_i w_i = -g_i for every particle with CG-Steihaug in the ball of
// radius `radius`; the subproblems are independent.
NewtonSteps solve_newton_steps(const SteinLinearization& lin, double radius, int workers = 1);

struct KlDecision {
  double rho = kNaN;
  bool accepted = false;
  bool converged = false;
  double radius = 0.0;  // radius for the next iteration
};

// Radius control driven by observed versus predicted change of the KL
// estimate.
class TrustRegionKLState {
 public:
  static constexpr double kShrinkBelow = 1e-4;
  static constexpr double kExpandAbove = 0.7;
  static constexpr double kShrinkFactor = 0.5;
  static constexpr double kExpandFactor = 1.5;

  explicit TrustRegionKLState(double initial_radius);

  double radius() const { return radius_; }
  std::size_t iteration() const { return iteration_; }
  double last_rho() const { return last_rho_; }

  // u: estimate after the step, o: before, model_change: predicted change.
  // A non-negative predicted change with a nonzero gradient counts as a
  // failed model (reject and shrink); with a zero gradient it is convergence.
  KlDecision update(double u, double o, double model_change, double gradient_magnitude);

 private:
  double radius_;
  std::size_t iteration_ = 0;
  double last_rho_ = kNaN;
};

// Gradient-magnitude-driven radius g / b.
class AdaTrustState {
 public:
  static constexpr double kBMin = 0.1;
  static constexpr double kImprovement = 0.999;
  static constexpr double kShrinkB = 0.9;

  // b = w = b_max = g = g0.
  explicit AdaTrustState(double initial_gradient_magnitude);

  double b() const { return b_; }
  double w() const { return w_; }
  double g() const { return g_; }
  double b_max() const { return b_max_; }
  double radius() const { return g_ / b_; }

  void update(double gradient_magnitude);

 private:
  double b_;
  double w_;
  double g_;
  double b_max_;
};

struct DriverOptions {
  int workers = 1;
  // Record wall-clock milliseconds per trace row; zero otherwise.
  bool record_wall_time = true;
};

RunResult tr_svi_kl_run(ParticleSet particles, const TargetModel& target,
                        const LocalKernelFamily& kernels, double initial_radius,
                        std::size_t iterations, Seed seed, const DriverOptions& options = {});

RunResult tr_svi_at_run(ParticleSet particles, const TargetModel& target,
                        const LocalKernelFamily& kernels, std::size_t iterations,
                        const DriverOptions& options = {});

// Same as tr_svi_at_run with an arbitrary Stein operator.
RunResult tr_svi_at_run(ParticleSet particles, const TargetModel& target,
                        const SteinOperator& stein, std::size_t iterations,
                        const DriverOptions& options = {});

}  // namespace tsvi
