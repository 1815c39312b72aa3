#include "saferl/action_sets.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "saferl/errors.hpp"

namespace saferl {

ActionBox ActionBox::make(std::vector<double> lower, std::vector<double> upper) {
  ActionBox box{std::move(lower), std::move(upper)};
  box.validate();
  return box;
}

ActionBox ActionBox::cube(std::size_t dim, double lo, double hi) {
  return make(std::vector<double>(dim, lo), std::vector<double>(dim, hi));
}

void ActionBox::validate() const {
  if (lower.size() != upper.size() || lower.empty()) {
    throw DimensionMismatch("ActionBox: bound vectors must be non-empty and equal length");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw DomainError("ActionBox: bounds must be finite");
    }
    if (lower[i] > upper[i]) {
      throw DomainError("ActionBox: lower bound exceeds upper bound in dim " +
                        std::to_string(i));
    }
  }
}

double ActionBox::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim(); ++i) v *= upper[i] - lower[i];
  return v;
}

std::vector<double> ActionBox::width() const {
  std::vector<double> w(dim());
  for (std::size_t i = 0; i < dim(); ++i) w[i] = upper[i] - lower[i];
  return w;
}

bool ActionBox::contains(std::span<const double> u, double tol) const {
  if (u.size() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(u[i] >= lower[i] - tol && u[i] <= upper[i] + tol)) return false;
  }
  return true;
}

std::vector<double> ActionBox::clip(std::span<const double> u) const {
  if (u.size() != dim()) throw DimensionMismatch("ActionBox::clip: dimension mismatch");
  std::vector<double> out(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    out[i] = std::clamp(u[i], lower[i], upper[i]);
  }
  return out;
}

std::vector<double> ActionBox::center() const {
  std::vector<double> c(dim());
  for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return c;
}

std::vector<double> ActionBox::sample_uniform(Rng& rng) const {
  std::vector<double> u(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    u[i] = lower[i] == upper[i] ? lower[i] : rng.uniform(lower[i], upper[i]);
  }
  return u;
}

SafeActionSet SafeActionSet::interval(double lo, double hi) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw DomainError("SafeActionSet::interval: need finite lo <= hi");
  }
  SafeActionSet s;
  s.shape_ = Shape::kInterval;
  s.box_ = ActionBox::make({lo}, {hi});
  s.volume_ = hi - lo;
  return s;
}

SafeActionSet SafeActionSet::box(ActionBox box) {
  box.validate();
  SafeActionSet s;
  s.shape_ = Shape::kBox;
  s.volume_ = box.volume();
  s.box_ = std::move(box);
  return s;
}

SafeActionSet SafeActionSet::halfspace_box(std::vector<double> a_row, double b,
                                           ActionBox box, ActionBox inner) {
  box.validate();
  inner.validate();
  if (a_row.size() != box.dim() || inner.dim() != box.dim()) {
    throw DimensionMismatch("SafeActionSet::halfspace_box: dimension mismatch");
  }
  if (box.dim() != 2) {
    throw DimensionMismatch("SafeActionSet::halfspace_box: only 2-D sets are supported");
  }
  SafeActionSet s;
  s.shape_ = Shape::kHalfspaceBox;
  s.volume_ = clipped_box_area(box, a_row, b);
  s.box_ = std::move(box);
  s.inner_ = std::move(inner);
  s.a_row_ = std::move(a_row);
  s.b_ = b;
  return s;
}

bool SafeActionSet::contains(std::span<const double> u, double tol) const {
  if (!box_.contains(u, tol)) return false;
  if (shape_ != Shape::kHalfspaceBox) return true;
  double lhs = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) lhs += a_row_[i] * u[i];
  return lhs <= b_ + tol;
}

const ActionBox& SafeActionSet::sampling_box() const {
  return shape_ == Shape::kHalfspaceBox ? inner_ : box_;
}

std::vector<double> SafeActionSet::sample_uniform(Rng& rng) const {
  if (shape_ != Shape::kHalfspaceBox) return box_.sample_uniform(rng);
  if (!(volume_ > 0.0)) {
    throw SafeSetEmpty("SafeActionSet::sample_uniform: set has zero area");
  }
  // The acceptance rate is volume / box volume; the inner box guarantees it is
  // bounded away from zero whenever the set has interior.
  for (;;) {
    auto u = box_.sample_uniform(rng);
    if (contains(u, 0.0)) return u;
  }
}

double clipped_box_area(const ActionBox& box, std::span<const double> a_row,
                        double b) {
  if (box.dim() != 2 || a_row.size() != 2) {
    throw DimensionMismatch("clipped_box_area: 2-D only");
  }
  // Sutherland-Hodgman clip of the box polygon against one halfspace, then
  // the shoelace formula.
  const double xs[4] = {box.lower[0], box.upper[0], box.upper[0], box.lower[0]};
  const double ys[4] = {box.lower[1], box.lower[1], box.upper[1], box.upper[1]};
  std::vector<std::pair<double, double>> poly;
  for (int i = 0; i < 4; ++i) {
    const int j = (i + 1) % 4;
    const double fi = a_row[0] * xs[i] + a_row[1] * ys[i] - b;
    const double fj = a_row[0] * xs[j] + a_row[1] * ys[j] - b;
    if (fi <= 0.0) poly.emplace_back(xs[i], ys[i]);
    if ((fi < 0.0 && fj > 0.0) || (fi > 0.0 && fj < 0.0)) {
      const double t = fi / (fi - fj);
      poly.emplace_back(xs[i] + t * (xs[j] - xs[i]), ys[i] + t * (ys[j] - ys[i]));
    }
  }
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    twice += p.first * q.second - q.first * p.second;
  }
  return 0.5 * std::abs(twice);
}

}  // namespace saferl
