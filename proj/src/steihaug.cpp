#include "tsvi/steihaug.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsvi {

namespace {

double model(const Vector& g, const Vector& w, const Vector& hw) {
  return g.dot(w) + 0.5 * w.dot(hw);
}

// Both roots of ||z + tau d|| = radius; tau_neg <= 0 <= tau_pos when z is
// inside the ball.
std::pair<double, double> boundary_roots(const Vector& z, const Vector& d, double radius) {
  const double dd = d.squaredNorm();
  const double zd = z.dot(d);
  const double zz = z.squaredNorm();
  const double disc = std::sqrt(std::max(0.0, zd * zd - dd * (zz - radius * radius)));
  // Cancellation-free form of (-zd +/- disc) / dd.
  const double q = zd >= 0.0 ? -(zd + disc) : -(zd - disc);
  double t1 = q / dd;
  double t2 = q != 0.0 ? (zz - radius * radius) / q : -t1;
  if (t1 > t2) std::swap(t1, t2);
  return {t1, t2};
}

}  // namespace

const char* to_string(SteihaugStatus status) {
  switch (status) {
    case SteihaugStatus::Interior: return "interior";
    case SteihaugStatus::Boundary: return "boundary";
    case SteihaugStatus::NegativeCurvature: return "neg-curvature";
  }
  return "unknown";
}

double default_cg_tolerance(double gradient_norm) {
  return std::min(0.1, std::sqrt(gradient_norm));
}

SteihaugResult cg_steihaug(const HessianOperator& apply, const Vector& g, double radius,
                           double tol, std::size_t max_iters) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("cg_steihaug: radius must be positive and finite");
  }
  require_finite(g, "cg_steihaug: gradient");
  SteihaugResult out;
  out.step = Vector::Zero(g.size());
  const double g_norm = g.norm();
  if (g_norm == 0.0) return out;

  Vector z = Vector::Zero(g.size());
  Vector hz = Vector::Zero(g.size());
  Vector r = g;
  Vector d = -g;
  double rr = r.squaredNorm();
  const double stop = tol * g_norm;

  auto finish_on_boundary = [&](const Vector& hd, SteihaugStatus status) {
    const auto [t_neg, t_pos] = boundary_roots(z, d, radius);
    const Vector w_pos = z + t_pos * d;
    const Vector hw_pos = hz + t_pos * hd;
    const double m_pos = model(g, w_pos, hw_pos);
    if (status == SteihaugStatus::NegativeCurvature) {
      const Vector w_neg = z + t_neg * d;
      const Vector hw_neg = hz + t_neg * hd;
      const double m_neg = model(g, w_neg, hw_neg);
      if (m_neg < m_pos) {
        out.step = w_neg;
        out.model_change = m_neg;
        out.status = status;
        return;
      }
    }
    out.step = w_pos;
    out.model_change = m_pos;
    out.status = status;
  };

  for (std::size_t it = 0; it < std::max<std::size_t>(1, max_iters); ++it) {
    out.iterations = it + 1;
    const Vector hd = apply(d);
    const double dhd = d.dot(hd);
    if (dhd <= 0.0) {
      finish_on_boundary(hd, SteihaugStatus::NegativeCurvature);
      return out;
    }
    const double alpha = rr / dhd;
    const Vector z_next = z + alpha * d;
    if (z_next.norm() >= radius) {
      finish_on_boundary(hd, SteihaugStatus::Boundary);
      return out;
    }
    z = z_next;
    hz += alpha * hd;
    r += alpha * hd;
    const double rr_next = r.squaredNorm();
    if (std::sqrt(rr_next) < stop) break;
    d = -r + (rr_next / rr) * d;
    rr = rr_next;
  }
  out.step = z;
  out.model_change = model(g, z, hz);
  out.status = SteihaugStatus::Interior;
  return out;
}

SteihaugResult cg_steihaug(const ParticleHessian& hessian, const Vector& g, double radius) {
  return cg_steihaug([&](const Vector& v) { return hessian.apply(v); }, g, radius,
                     default_cg_tolerance(g.norm()), hessian.dim());
}

}  // namespace tsvi
