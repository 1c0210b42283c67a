#pragma once
#include <string>
#include <utility>
#include <vector>

#include "crystalflow/polytope.hpp"

namespace cf {

// Finite max-of-affine convex function W(p) = max_i (a_i·p + b_i).
// Construction prunes redundant pieces, so for one-homogeneous W the pieces
// are exactly the vertices of the Frank body conv{a_i}.
struct PolyhedralFn {
  int dim = 0;
  std::vector<Vec> a;
  std::vector<double> b;
  bool one_homogeneous = true;
  std::string name;

  int pieces() const { return (int)a.size(); }
  double eval(const Vec& p) const;
  double operator()(const Vec& p) const { return eval(p); }
  // Pieces within tau of the max; tau < 0 picks the default 1e-9*(1+|W(p)|).
  std::vector<int> active_set(const Vec& p, double tau = -1.0) const;
  double max_grad_norm() const;
};

PolyhedralFn make_polyhedral(int dim, std::vector<Vec> a, std::vector<double> b,
                             std::string name = "");
PolyhedralFn load_anisotropy(const std::string& path);

// Maximal relatively open set where dW is constant, with the orthogonal
// splitting R^n = V + U, V parallel to aff dW.
struct Stratum {
  std::vector<int> active;
  Vec representative;
  Polytope subdiff;
  int k = 0;
  std::vector<Vec> V_basis;
  std::vector<Vec> U_basis;

  bool contains(const PolyhedralFn& W, const Vec& p, double tau = -1.0) const;
  Vec to_V(const Vec& x) const;  // coordinates in V_basis, dim = k
  Vec to_U(const Vec& x) const;
  Vec from_VU(const Vec& zv, const Vec& zu) const;
  Vec xi_U() const;  // common U-part of the subdifferential
};

Polytope subdifferential(const PolyhedralFn& W, const Vec& p, double tau = -1.0);
std::vector<Stratum> strata(const PolyhedralFn& W);
PolyhedralFn directional_derivative(const PolyhedralFn& W, const Vec& p0);
std::pair<PolyhedralFn, Stratum> sliced(const PolyhedralFn& W, const Vec& p0);
double local_radius(const PolyhedralFn& W, const Vec& p0);
double coercivity_margin(const PolyhedralFn& Wsl, const Vec& xi0_V);
PolyhedralFn polar(const PolyhedralFn& W);
Polytope wulff(const PolyhedralFn& W);

enum class SmoothKind { QuadraticGrowth, OneHomogeneous, Euclidean };

// C^2 regularization of W. QuadraticGrowth: log-sum-exp smooth max plus
// |p|^2/(2m), Hessian eigenvalues in [1/a_m, a_m]. OneHomogeneous: 2m-power
// mean of the positive parts plus a coercive power term. Euclidean: |p| with
// a 1/m Hessian floor (for isotropic comparisons; ignores the piece list).
struct SmoothAnisotropy {
  PolyhedralFn base;
  int m = 1;
  SmoothKind kind = SmoothKind::QuadraticGrowth;
  double a_m = 0.0;
  double C_W = 0.0;
  // When the piece list is a full sign pattern {(+-s_1, ..., +-s_d)} the
  // log-sum-exp splits per axis; gradient and Hessian are then diagonal and
  // each component depends on one p_d only (quadratic-growth kind).
  bool separable = false;
  Vec sep_scale;

  double value(const Vec& p) const;
  Vec gradient(const Vec& p) const;
  void hessian(const Vec& p, double* H) const;  // row-major dim x dim
  // 2D fast path used by the level-set stepper.
  void hessian2(double px, double py, double& h11, double& h12, double& h22) const;
  // dW_m/dp_d and d2W_m/dp_d^2 for separable bases.
  void axis_flux(int d, double pd, double& z, double& Hdd) const;
  double max_hessian_norm_sampled(double radius = 2.0) const;

  static SmoothAnisotropy euclidean(int dim, int m);
};

SmoothAnisotropy regularize(const PolyhedralFn& W, int m, SmoothKind kind);

double default_tau_act(const PolyhedralFn& W, const Vec& p);
inline constexpr double kTauGeom = 1e-9;

}  // namespace cf
