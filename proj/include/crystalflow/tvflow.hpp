#pragma once
#include <vector>

#include "crystalflow/anisotropy.hpp"
#include "crystalflow/grid.hpp"
#include "crystalflow/pairs.hpp"

namespace cf {

double energy(const PolyhedralFn& W, const GridFn& psi);
double energy_smooth(const SmoothAnisotropy& Wm, const GridFn& psi);

struct ResolventResult {
  GridFn psi_a;
  GridFn h_a;       // (psi_a - psi)/a
  GridVecField z;   // in dW(0) cellwise
  double residual = 0.0;
  int iterations = 0;
};

// prox of a*E_W at psi via accelerated primal-dual iterations; the dual
// variable is projected onto the Frank body exactly.
ResolventResult resolvent(const PolyhedralFn& W, const GridFn& psi, double a,
                          double tol, const GridFn* warm_phi = nullptr,
                          const GridVecField* warm_z = nullptr);

// prox of a*E_{W_m} (quadratic-growth kind) by Newton iterations with a
// conjugate-gradient inner solve.
ResolventResult resolvent_smooth(const SmoothAnisotropy& Wm, const GridFn& psi,
                                 double a, double tol);

struct MinimalSectionResult {
  GridFn h;             // raw h_{a_J}
  GridFn h_richardson;  // (4 h_J - h_{J-1}) / 3
  std::vector<double> schedule;
  int J = 0;
  bool settled = true;
  double last_diff = 0.0;
  double last_residual = 0.0;
};

MinimalSectionResult minimal_section(const PolyhedralFn& W, const GridFn& psi,
                                     std::vector<double> schedule = {},
                                     const std::vector<char>* mask = nullptr,
                                     double tol_ms = -1.0);

struct LambdaResult {
  GridTorus torus;
  Vec origin;            // world coordinates of grid node (0,...,0)
  GridFn lambda;         // -h_a, meaningful on the facet mask
  GridFn psi_per;        // the periodized clipped support function
  std::vector<char> mask;
  double ess_inf = 0.0, ess_sup = 0.0;
  double delta_clip = 0.0;
  MinimalSectionResult ms;
};

// Crystalline curvature on the facet of `pair`, computed by periodizing the
// support function and driving the sliced minimal section. Sign convention:
// positive on a facet with negative surroundings (a shrinking square facet of
// side L has lambda = +2/L under W = |.|_1), i.e. the negation of div z for
// the divergence-minimizing Cahn-Hoffman field.
LambdaResult lambda_p(const PolyhedralFn& W, const Vec& p,
                      const SampledFn& psi_bar, const FacetPair& pair,
                      int N = 0, const Vec* ball_center = nullptr,
                      double ball_radius = -1.0,
                      std::vector<double> schedule = {});

GridVecField patch_fields(const GridVecField& z1, const GridFn& psi1,
                          const GridVecField& z2, const GridFn& psi2,
                          double alpha, double beta, double tau_zero = -1.0);

struct SlicingReport {
  double max_diff = 0.0;
  double tol_bound = 0.0;
  int N = 0;
};

// Builds psi(x) = psi_bar(x') + f(x'') on the product torus in the stratum
// frame of p, solves the resolvent of the directional energy, and compares
// with the sliced solve plus f.
SlicingReport slicing_check(const PolyhedralFn& W, const Vec& p,
                            const GridFn& psi_bar, const GridFn& f, double a,
                            double tol = 1e-9);

}  // namespace cf
