#pragma once
#include <string>
#include <vector>

#include "crystalflow/intervals.hpp"
#include "crystalflow/region2d.hpp"

namespace cf {

// Scalar field sampled on a regular grid (1D: ny == 1). Values at
// origin + (i*h, j*h); eval() interpolates multilinearly and clamps outside.
struct SampledFn {
  int dim = 1;
  Vec origin;
  double h = 1.0;
  int nx = 0, ny = 1;
  bool periodic = false;
  std::vector<double> v;

  double& at(int i, int j = 0) { return v[(size_t)j * nx + i]; }
  double at(int i, int j = 0) const { return v[(size_t)j * nx + i]; }
  Vec point(int i, int j = 0) const;
  double eval(const Vec& x) const;
  double lipschitz() const;
  double max_abs() const;
};

// Ordered pair (minus, plus) of disjoint open sets; the facet is the closed
// complement of their union.
struct FacetPair {
  int dim = 1;
  IntervalSet minus1, plus1;
  Region2D minus2, plus2;

  static FacetPair make1d(IntervalSet minus, IntervalSet plus);
  static FacetPair make2d(Region2D minus, Region2D plus);
  bool bounded() const;
  FacetPair negated() const;  // swaps the roles of minus and plus
};

IntervalSet nbd(const IntervalSet& A, double rho);
Region2D nbd(const Region2D& A, double rho, int resolution = 512);
FacetPair pair_nbd(const FacetPair& P, double rho, int resolution = 512);
bool order(const FacetPair& P, const FacetPair& Q, double tol = 0.0,
           int resolution = 192);
SampledFn support_function(const FacetPair& P, int resolution = 256);
FacetPair pair_of(const SampledFn& psi, double tau_zero = -1.0);

// Tabulated monotone modulus theta with theta(0)=0, theta(phi(x)) <= psi(x).
struct ThetaTable {
  std::vector<double> s, th;
  double m_final = 0.0;
  double operator()(double x) const;
};
ThetaTable theta_ordering(const SampledFn& phi, const SampledFn& psi);

FacetPair load_pair_csv(const std::string& path);
void save_pair_csv(const FacetPair& P, const std::string& path);

}  // namespace cf
