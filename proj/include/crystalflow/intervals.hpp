#pragma once
#include <limits>
#include <vector>

namespace cf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Finite union of disjoint open intervals, endpoints possibly infinite.
// Components are kept sorted; two components may share an endpoint (a pinch
// point), which matters for erosions — merging them is a separate,
// deliberate operation (interior_closure).
struct IntervalSet {
  std::vector<double> lo, hi;

  static IntervalSet empty() { return {}; }
  static IntervalSet whole();
  static IntervalSet open(double a, double b);

  int count() const { return (int)lo.size(); }
  bool is_empty() const { return lo.empty(); }
  bool contains(double x) const;
  double dist(double x) const;       // distance to the set
  double dist_comp(double x) const;  // distance to the complement
  double measure() const;
  bool bounded() const;

  IntervalSet nbd(double rho) const;  // dilation (rho>0) / erosion (rho<0)
  IntervalSet interior_closure() const;
  IntervalSet complement_interior() const;
  IntervalSet unite(const IntervalSet& o) const;
  IntervalSet intersect(const IntervalSet& o) const;
  bool subset_of(const IntervalSet& o, double tol = 0.0) const;
  bool same_as(const IntervalSet& o, double tol = 1e-12) const;
};

IntervalSet make_intervals(std::vector<double> lo, std::vector<double> hi);

}  // namespace cf
