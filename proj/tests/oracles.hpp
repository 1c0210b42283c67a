#pragma once
// Slow reference implementations used to pin down expected values. Everything
// here is deliberately written with a different algorithm than the library:
// dense sweeps, plain projected gradients, O(n^2) scans, closed forms.
#include <vector>

#include "crystalflow/anisotropy.hpp"
#include "crystalflow/grid.hpp"
#include "crystalflow/pairs.hpp"

namespace oracle {

// max x·p / W(p) over a dense set of directions
double polar_value(const cf::PolyhedralFn& W, const cf::Vec& x, int ndirs = 20000);

// indices of pieces within tol of the max, by direct evaluation
std::vector<int> active_pieces(const cf::PolyhedralFn& W, const cf::Vec& p, double tol);

// shape of dW(0) for the hand-coded projections below
enum class Frank { Box, CrossPoly };

// min_phi a*E_W(phi) + 1/2 ||phi - psi||^2 on the torus by FISTA on the dual,
// with explicit box / l1-ball projections. radius scales dW(0).
cf::GridFn prox_tv(Frank kind, double radius, const cf::GridFn& psi, double a,
                   int iters = 20000);

// exact squared distance transform by full O(n^2) scan
std::vector<double> edt_sq_brute(const std::vector<char>& mask, int nx, int ny);

// side length of a square shrinking by V = div z under W = |.|_1
double square_side(double L0, double t);
// radius of a disc shrinking by V = curvature
double disc_radius(double r0, double t);

// divergence of the admissible field across a 1-d facet [lo, hi];
// side flags: true if the adjacent component is a plus component
double facet_div_1d(double lo, double hi, bool plus_left, bool plus_right,
                    double w_minus, double w_plus);

// symmetric Hausdorff distance between two point clouds
double hausdorff_points(const std::vector<cf::Vec>& A, const std::vector<cf::Vec>& B);

// deterministic xorshift stream for reproducible random instances
struct Rng {
  uint64_t s;
  explicit Rng(uint64_t seed) : s(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  uint64_t next() {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return s;
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * (double)(next() >> 11) / 9007199254740992.0;
  }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + (int)(next() % (uint64_t)(hi - lo + 1));
  }
};

}  // namespace oracle
