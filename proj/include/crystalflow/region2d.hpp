#pragma once
#include <functional>
#include <vector>

#include "crystalflow/geometry.hpp"

namespace cf {

struct Loop {
  std::vector<Vec> pts;  // closed: last connects back to first
  double signed_area() const;
  double length() const;
  void reverse();
};

// Open planar region: even-odd interior of a set of closed polyline loops,
// optionally complemented (so unbounded regions are representable). Loops are
// oriented with the region on the left.
struct Region2D {
  std::vector<Loop> loops;
  bool complemented = false;

  static Region2D empty() { return {}; }
  static Region2D whole();
  static Region2D box(Vec lo, Vec hi);

  bool is_empty() const { return loops.empty() && !complemented; }
  bool is_whole() const { return loops.empty() && complemented; }
  bool inside(const Vec& x) const;
  double boundary_dist(const Vec& x) const;
  double sdist(const Vec& x) const;  // negative inside
  double dist_to(const Vec& x) const { return std::max(sdist(x), 0.0); }
  double dist_to_comp(const Vec& x) const { return std::max(-sdist(x), 0.0); }
  void bbox(Vec& lo, Vec& hi) const;  // of the loops
  double diameter() const;
};

// {sdist_A < rho} recontoured on a working grid with exact-distance edge
// refinement. cells ~ resolution along the longer bbox side.
Region2D nbd2(const Region2D& A, double rho, int resolution = 512);

// Marching squares on nx*ny samples (x fastest), linear interpolation at
// `level`, loops oriented with {f < level} on the left. `exact`, when given,
// refines vertices by bisection along cell edges.
std::vector<Loop> contour_grid(const std::vector<double>& f, int nx, int ny,
                               Vec origin, double hx, double hy, double level,
                               const std::function<double(const Vec&)>& exact = {});

// Exact squared Euclidean distance transform (two-pass) to the true samples;
// inf where no true sample exists.
std::vector<double> edt_sq_1d(const std::vector<double>& fsq);
std::vector<double> edt_sq_2d(const std::vector<char>& mask, int nx, int ny);

}  // namespace cf
