#pragma once
#include <functional>
#include <string>
#include <vector>

#include "crystalflow/anisotropy.hpp"
#include "crystalflow/pairs.hpp"
#include "crystalflow/tvflow.hpp"

namespace cf {

// Normal velocity law V = f(n, lambda); monotone nondecreasing in lambda,
// |f(n,l)| <= C_f(|l|+1). Builtin laws are affine and keep (c0, c1) so the
// stepper can avoid std::function calls in the hot loop.
struct SpeedLaw {
  std::function<double(const Vec&, double)> f;
  double C_f = 1.0;
  double lambda_slope = 1.0;  // bound on d f / d lambda, used by the CFL bound
  bool affine = false;
  double c0 = 0.0, c1 = 1.0;  // f = c0 + c1*lambda when affine
  std::string name;

  double operator()(const Vec& n, double lambda) const {
    return affine ? c0 + c1 * lambda : f(n, lambda);
  }

  static SpeedLaw kappa();                       // f = lambda
  static SpeedLaw kappa_plus_one();              // f = lambda + 1
  static SpeedLaw linear(double c0, double c1);  // f = c0 + c1*lambda
};

// F(p, xi) = -|p| f(-p/|p|, xi), with F(0, .) = 0 (curvature-free at p = 0).
struct GeometricF {
  SpeedLaw law;
  double operator()(const Vec& p, double xi) const;
};

// Non-periodic node-centered box grid on [-L/2, L/2]^dim; the outermost node
// ring is never updated.
struct BoxGrid {
  int dim = 2;
  int N = 65;      // nodes per axis
  double L = 5.0;  // box side

  double h() const { return L / (N - 1); }
  size_t size() const {
    size_t s = 1;
    for (int d = 0; d < dim; ++d) s *= (size_t)N;
    return s;
  }
  size_t idx(int i, int j, int l = 0) const {
    size_t s = (size_t)i + (size_t)N * j;
    if (dim >= 3) s += (size_t)N * N * l;
    return s;
  }
  Vec point(int i, int j, int l = 0) const {
    Vec x = Vec::zero(dim);
    x[0] = -L / 2 + i * h();
    x[1] = -L / 2 + j * h();
    if (dim >= 3) x[2] = -L / 2 + l * h();
    return x;
  }
  bool same_shape(const BoxGrid& o) const {
    return dim == o.dim && N == o.N && L == o.L;
  }
};

struct LevelSetState {
  BoxGrid g;
  std::vector<double> u;
  double t = 0.0;
  int m = 0;        // regularization index, bookkeeping only
  double c = 1.0;   // far-field value is -c
  std::vector<char> active;  // empty: update every interior node
  std::vector<double> dt_hist;
  std::vector<double> scratch;  // stepper double-buffer
  // 2-d stepper work area: index lists for the active cells and the faces
  // touching them, plus per-face flux/stiffness buffers. Rebuilt on remask.
  std::vector<unsigned> cells, xfaces, yfaces;
  std::vector<double> fzx, fhx, fzy, fhy;
};

// Samples u on the grid nodes; far-field cells get exactly -c.
LevelSetState make_state(const BoxGrid& g,
                         const std::function<double(const Vec&)>& u0, int m,
                         double c);

struct StepInfo {
  double dt = 0.0;
  double max_center = 0.0;  // stiffest explicit rate seen (1/time units)
  double sup_change = 0.0;
};

// Largest dt the monotone explicit update accepts for the current state.
double cfl_dt(const LevelSetState& s, const SmoothAnisotropy& Wm,
              const GeometricF& F);

// One explicit Euler step. The curvature argument
// xi = tr[Hess W_m(grad u) Hess u] is evaluated in conservation form for the
// quadratic-growth kind (2-d): xi = D^-(grad W_m(D^+ u)), the same central
// second-order stencil with the Hessian taken at staggered gradients, which
// keeps the total Cahn-Hoffman flux across a facet exact at any resolution.
// Other kinds use the pointwise trace with sign-adapted, clamped cross
// stencils. Godunov upwinding handles the zero-curvature part of f. Throws
// CFLViolation before committing if dt is too large.
StepInfo step(LevelSetState& s, const SmoothAnisotropy& Wm, const GeometricF& F,
              double dt);

struct Snapshot {
  double t = 0.0;
  std::vector<Loop> zero_set;  // 2D marching-squares loops
  double len_x = 0.0, len_y = 0.0;  // zero-contour extent on the center axes
  double volume = 0.0;              // measure of {u > 0}
  std::vector<double> u;            // field copy when kept
};

struct Trajectory {
  BoxGrid g;
  int m = 0;
  double c = 1.0;
  std::vector<Snapshot> snaps;
  const Snapshot& final() const { return snaps.back(); }
};

struct EvolveOptions {
  int N = 129;
  double boxL = 5.0;
  int n_snapshots = 5;    // geometric schedule T/16, T/8, ..., T
  std::vector<double> times;  // overrides the schedule when non-empty
  bool keep_fields = true;
  bool band = true;            // freeze nodes far from the zero level
  double band_halfwidth = -1;  // distance from the zero level; default 16h
  SmoothKind kind = SmoothKind::QuadraticGrowth;
  std::function<double(double)> u0_transform;      // monotone relabeling
  std::function<double(const Vec&)> u0_perturb;    // added inside the far cutoff
};

// u0 = -min(dist(x, D0), 1) + dist(x, D0^c), evolved under W_m and f with
// snapshots of the zero level set.
Trajectory evolve_crystal(const Region2D& D0, const SpeedLaw& f,
                          const PolyhedralFn& W, int m, double T,
                          const EvolveOptions& opt = {});

double hausdorff_dist(const std::vector<Loop>& A, const std::vector<Loop>& B);

// Initial shapes from a compact spec: square:L | disc:r | wulff:s | file:path.
// wulff scales the unit Wulff shape of W; file loads a loop CSV.
Region2D make_shape(const std::string& spec, const PolyhedralFn& W);

// Zero-crossing points of u on grid edges (3D states).
std::vector<Vec> zero_points3(const BoxGrid& g, const std::vector<double>& u);

// psi+ = a (Wm°(x - x0) - b t)_+ and psi- = -a (Wm°(x0 - x) - b t)_+ for the
// polar of a smooth one-homogeneous regularization of W.
struct Barrier {
  SmoothAnisotropy Wm;
  double a = 1.0, b = 1.0;
  Vec x0;
  double polar(const Vec& x) const;
  double plus(const Vec& x, double t) const;
  double minus(const Vec& x, double t) const;
};
Barrier barrier(const PolyhedralFn& W, int m, double a, double b, const Vec& x0);

struct EvolveProblem {
  Region2D D0;
  SpeedLaw f;
  PolyhedralFn W;
  double T = 0.1;
  EvolveOptions opt;
};

struct ConvergenceReport {
  std::vector<int> m_values;
  std::vector<double> sup_diffs;       // ||u_{m_i} - u_{m_{i+1}}||_inf, window
  std::vector<double> zero_hausdorff;  // consecutive final zero sets
  std::vector<double> eps_values;
  std::vector<double> eps_hausdorff;   // perturbed vs base final zero set
  bool decreasing(double slack = 0.15) const;
};

// Cauchy table for already-computed runs: consecutive sup differences over
// the window |x|_inf <= window_frac * L at the final time, plus zero-set
// Hausdorff distances.
ConvergenceReport convergence_from_runs(const std::vector<Trajectory>& runs,
                                        double window_frac = 0.35);

// Runs the problem across the m schedule (and optionally across perturbation
// amplitudes at the largest m). Trajectories are returned through `runs` so
// callers can reuse them.
ConvergenceReport convergence_study(const EvolveProblem& prob,
                                    const std::vector<int>& m_schedule,
                                    const std::vector<double>& eps_schedule = {},
                                    std::vector<Trajectory>* runs = nullptr);

struct InvarianceReport {
  std::vector<double> times;
  std::vector<double> dists;
  double bound = 0.0;
  bool pass = true;
};

// Evolves u0 and theta(u0) (theta nondecreasing, theta(0) = 0) and compares
// the zero sets at the snapshot times against 2h + slack.
InvarianceReport invariance_check(const EvolveProblem& prob, int m,
                                  const std::function<double(double)>& theta);

// phi(x,t) = psi_bar(x' - xhat') + fpart(x'' - xhat'') + phat.x + g(t) in the
// stratum frame of phat; tests the solution from above (subsolution) or below.
struct StratifiedTestFn {
  Vec xhat;
  double that = 0.0;
  Vec phat;
  SampledFn psi_bar;  // argument x' - xhat', in facet coordinates
  FacetPair pair;
  std::function<double(const Vec&)> fpart;  // f(0)=0, grad f(0)=0; empty = 0
  std::function<double(double)> g;          // empty = 0
  double delta = 0.0;  // B_delta(0) inside the facet interior
  bool subsolution = true;

  double eval(const Stratum& S, const Vec& x, double t) const;
};

struct TestVerdict {
  bool pass = false;
  double margin = 0.0;  // slack in the viscosity inequality (>= 0 passes)
  double lambda_lo = 0.0, lambda_hi = 0.0;  // ess range of div z on the ball
  double gp_gap = 0.0;  // worst slack seen in the contact-position sampling
  int k = 0;
};

// Verifies the contact (general-position) condition of `test` against the
// sampled trajectory, then evaluates the faceted viscosity inequality with
// the facet curvature from tvflow. k = 0 strata reduce to the classical test.
TestVerdict faceted_test_check(const Trajectory& traj,
                               const StratifiedTestFn& test, const GeometricF& F,
                               const PolyhedralFn& W, double rho = -1.0,
                               double tol_gp = -1.0);

}  // namespace cf
