#pragma once
#include <vector>

#include "crystalflow/anisotropy.hpp"
#include "crystalflow/pairs.hpp"
#include "crystalflow/region2d.hpp"

namespace cf {

// Closed polyline boundary with per-vertex frames. `nu` is the construction
// normal: the direction in which the local support function increases. For a
// plus-side region it points into the region, for a minus-side region out of
// it. `mark[i] >= 0` tags vertices that belong to a flattened segment.
struct BoundaryCurve {
  struct Loop {
    std::vector<Vec> pts;
    std::vector<Vec> nu;
    std::vector<double> kappa;
    std::vector<double> s;  // cumulative arclength, s[0] = 0
    std::vector<int> mark;
    double length = 0.0;
  };
  std::vector<Loop> loops;
  bool nu_is_left = true;  // nu = left normal of the traversal direction

  void compute_frames();
  double diameter() const;
  double dist(const Vec& x) const;
  bool empty() const { return loops.empty(); }
};

struct SmoothPair2D {
  BoundaryCurve minus, plus;
  FacetPair pair;  // H as regions, for membership queries
  double rho = 0.0;
};

// Single component Gamma of the boundary decomposition plus its evaluation
// data. Flat components carry the corner-coordinate system (v, w, cG, alpha).
struct Patch {
  bool flat = false;
  std::vector<Vec> pts;  // polyline of Gamma (endpoints shared with neighbors)
  Vec v, w;
  Vec nu0;                    // flat: exact critical normal
  Vec cG;                     // flat: corner point
  double alpha = 0.0;         // flat: level of Gamma in xi coordinates
  Vec xv, xw;                 // flat: endpoints, xv adjacent to the v-arc
  double blo[2] = {0, 0}, bhi[2] = {0, 0};
};

struct PatchDecomposition {
  std::vector<Patch> patches;
  double mu = 0.0;
  double delta_theta = 0.0, delta_mu = 0.0, delta_s = 0.0, delta = 0.0;
  double K = 0.0;  // max |p| over {W(p) <= 1}

  // Evaluate the patchwise support function at x. Returns false if x is not
  // covered (outside the delta-collar or an unresolved sliver).
  bool eval(const Vec& x, double* psi, Vec* z, Vec* grad) const;
};

struct Facet2DResult {
  FacetPair G;
  SampledFn psi;
  SampledFn zx, zy;
  double eta = 0.0, delta = 0.0;
  double membership_failure_rate = 0.0;
  double lip_psi = 0.0, lip_z = 0.0;
};

// Mollified level-set approximation of the pair: the output satisfies
// U^{shift+rho/2}(A) <= H <= U^{shift+3rho/4}(A), verified per-sample on the
// work grid. h_work defaults to rho/32.
SmoothPair2D smooth_pair_approx(const FacetPair& A, double rho,
                                double h_work = -1.0, double level_shift = 0.0);

// Smallest angle from the deterministic schedule {0, +-0.5deg, ..., +-10deg}
// such that every boundary vertex whose (rotated) normal is within 2deg of a
// critical direction of W has |kappa| >= 0.05/diameter.
double critical_rotation(const BoundaryCurve& H, const PolyhedralFn& W);

// Cut a flat segment with the exact critical normal at every critical
// crossing; Hausdorff distance to the input <= 2*eta with
// eta = 0.9*min(eta_cap, min distance between crossings / 20).
BoundaryCurve flatten(const BoundaryCurve& V, const PolyhedralFn& W,
                      double eta_cap);

PatchDecomposition build_patches(const BoundaryCurve& Vhat,
                                 const PolyhedralFn& W);

// Global support function of (G_-, G_+) on a uniform n x n grid over the
// curves' bounding box: clipped patch values near the boundaries, constants
// +-eta deep inside, 0 on the facet. z = z^- phi^- + z^+ phi^+ with
// clamped-linear cutoffs supported in the 3delta/4 collars.
Facet2DResult glue_support(const PolyhedralFn& W, const BoundaryCurve& Vm,
                           const PatchDecomposition& Pm, const BoundaryCurve& Vp,
                           const PatchDecomposition& Pp, const FacetPair& G,
                           double delta, double eta_cap, int n, double pad);

// End-to-end pipeline: mollify, rotate into generic position, flatten,
// build patches on both sides, glue. The anisotropy is re-centered so that
// 0 lies inside dW(0); the returned z is offset back.
Facet2DResult admissible_approx_2d(const PolyhedralFn& W, const FacetPair& A,
                                   double rho1, double rho2, int grid_n = 256);

}  // namespace cf
