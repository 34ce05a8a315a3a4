#pragma once

#include <functional>

#include "tsvi/common.hpp"
#include "tsvi/stein.hpp"

namespace tsvi {

enum class SteihaugStatus { Interior, Boundary, NegativeCurvature };

const char* to_string(SteihaugStatus status);

struct SteihaugResult {
  Vector step;
  SteihaugStatus status = SteihaugStatus::Interior;
  std::size_t iterations = 0;
  double model_change = 0.0;  // g^T w + 1/2 w^T H w
};

using HessianOperator = std::function<Vector(const Vector&)>;

// Truncated conjugate gradient for min g^T w + 1/2 w^T H w s.t. ||w|| <= radius.
// Stops on relative residual below `tol`, on reaching the boundary, or on
// negative curvature (then moves to the boundary along the current direction).
SteihaugResult cg_steihaug(const HessianOperator& apply, const Vector& g, double radius,
                           double tol, std::size_t max_iters);

// Inexact-Newton forcing: tol = min(0.1, sqrt(||g||)), max_iters = dim.
SteihaugResult cg_steihaug(const ParticleHessian& hessian, const Vector& g, double radius);

double default_cg_tolerance(double gradient_norm);

}  // namespace tsvi
