#pragma once

#include <string>

#include "tsvi/stein.hpp"
#include "tsvi/trust_region.hpp"

namespace tsvi {

enum class StepKind { Static, Decayed, AdaGrad };

const char* to_string(StepKind kind);

// First-order step rule for MP-SVGD. The AdaGrad accumulator is per particle
// coordinate and grows by the squared direction before each step.
class StepSchedule {
 public:
  static constexpr double kEpsilon = 1e-8;

  static StepSchedule fixed(double step);
  static StepSchedule decayed(double step, double decay);
  static StepSchedule adagrad(double step);

  StepKind kind() const { return kind_; }
  double initial_step() const { return step_; }
  double decay() const { return decay_; }
  const RowMatrix& accumulator() const { return accum_; }

  // Step size for iteration t (0-based); for AdaGrad the base step.
  double step_size(std::size_t t) const;
  // Displacement for ascent direction `direction` at iteration t.
  RowMatrix displacement(const RowMatrix& direction, std::size_t t);

 private:
  StepSchedule(StepKind kind, double step, double decay);

  StepKind kind_;
  double step_;
  double decay_;
  RowMatrix accum_;
};

// x_i += xi * (1/n) sum_j [k(x_j, x_i) grad log p(x_j) + grad_{x_j} k(x_j, x_i)].
RowMatrix svgd_step(const RowMatrix& particles, const TargetModel& target, const KernelSpec& kernel,
                    double step, int workers = 1);

RowMatrix mp_svgd_step(const RowMatrix& particles, const TargetModel& target,
                       const LocalKernelFamily& kernels, StepSchedule& schedule, std::size_t t,
                       int workers = 1);

// Global-kernel Newton step per particle, CG-Steihaug with a fixed radius.
RowMatrix svn_ctr_step(const RowMatrix& particles, const TargetModel& target,
                       const KernelSpec& kernel, double radius, int workers = 1);

RunResult run_svgd(ParticleSet particles, const TargetModel& target, const KernelSpec& kernel,
                   double step, std::size_t iterations, const DriverOptions& options = {});

RunResult run_mp_svgd(ParticleSet particles, const TargetModel& target,
                      const LocalKernelFamily& kernels, StepSchedule schedule,
                      std::size_t iterations, const DriverOptions& options = {});

RunResult run_svn_ctr(ParticleSet particles, const TargetModel& target, const KernelSpec& kernel,
                      double radius, std::size_t iterations, const DriverOptions& options = {});

}  // namespace tsvi
