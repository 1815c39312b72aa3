#ifndef SAFERL_ACTION_SETS_HPP_
#define SAFERL_ACTION_SETS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "saferl/stochastics.hpp"

namespace saferl {

// Axis-aligned box [lower, upper] in control units.
struct ActionBox {
  std::vector<double> lower;
  std::vector<double> upper;

  static ActionBox make(std::vector<double> lower, std::vector<double> upper);
  static ActionBox cube(std::size_t dim, double lo, double hi);

  std::size_t dim() const { return lower.size(); }
  void validate() const;
  double volume() const;
  std::vector<double> width() const;
  bool contains(std::span<const double> u, double tol = 0.0) const;
  std::vector<double> clip(std::span<const double> u) const;
  std::vector<double> center() const;
  std::vector<double> sample_uniform(Rng& rng) const;

  bool operator==(const ActionBox&) const = default;
};

// State-dependent admissible control region C(x).
class SafeActionSet {
 public:
  enum class Shape { kInterval, kBox, kHalfspaceBox };

  static SafeActionSet interval(double lo, double hi);
  static SafeActionSet box(ActionBox box);
  // {u in box : a_row . u <= b} with a precomputed inner box inside it.
  static SafeActionSet halfspace_box(std::vector<double> a_row, double b,
                                     ActionBox box, ActionBox inner);

  Shape shape() const { return shape_; }
  std::size_t dim() const { return box_.dim(); }

  // Lebesgue measure of C(x): interval length, box volume, or the area of the
  // polygon box ∩ halfspace.
  double volume() const { return volume_; }

  // Tests the defining inequalities with slack `tol`.
  bool contains(std::span<const double> u, double tol = 1e-9) const;

  // Box a box-supported policy samples from: the interval itself, the box, or
  // the inner box of a halfspace shape.
  const ActionBox& sampling_box() const;

  // The enclosing box (actuator limits for halfspace shapes).
  const ActionBox& outer_box() const { return box_; }

  const std::vector<double>& halfspace_row() const { return a_row_; }
  double halfspace_offset() const { return b_; }

  // Uniform draw from C(x) (rejection from the outer box for halfspaces).
  std::vector<double> sample_uniform(Rng& rng) const;

 private:
  SafeActionSet() = default;

  Shape shape_ = Shape::kBox;
  ActionBox box_;
  ActionBox inner_;
  std::vector<double> a_row_;
  double b_ = 0.0;
  double volume_ = 0.0;
};

// Area of the convex polygon [lower, upper]^2 ∩ {a . u <= b}.
double clipped_box_area(const ActionBox& box, std::span<const double> a_row,
                        double b);

}  // namespace saferl

#endif  // SAFERL_ACTION_SETS_HPP_
