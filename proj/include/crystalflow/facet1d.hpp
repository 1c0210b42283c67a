#pragma once
#include <vector>

#include "crystalflow/anisotropy.hpp"
#include "crystalflow/pairs.hpp"

namespace cf {

// Continuous piecewise-linear function given by breakpoints; constant beyond
// the first and last breakpoint.
struct PLFunction {
  std::vector<double> x, y;
  double eval(double t) const;
  double slope(double t) const;  // one-sided from the containing segment
  double max_slope() const;
};

struct Facet1DResult {
  FacetPair G;
  std::vector<double> comp_lo, comp_hi;  // components of G_- u G_+, sorted
  std::vector<int> sigma;                // +1 if the component is in G_+
  double delta = 0.0, eps = 0.0;
  PLFunction psi, z;
  double w_minus = 0.0, w_plus = 0.0;

  int facet_count() const { return std::max(0, (int)comp_lo.size() - 1); }
  double facet_lo(int i) const { return comp_hi[i]; }
  double facet_hi(int i) const { return comp_lo[i + 1]; }
};

Facet1DResult admissible_approx_1d(const PolyhedralFn& W, const FacetPair& A,
                                   double rho1, double rho2);
// Constant divergence of z across facet i (z linear there).
double lambda_1d_exact(const Facet1DResult& res, int facet_index);

}  // namespace cf
