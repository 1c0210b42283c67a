#include "crystalflow/facet1d.hpp"

#include <algorithm>
#include <cmath>

#include "crystalflow/errors.hpp"

namespace cf {

double PLFunction::eval(double t) const {
  if (x.empty()) return 0.0;
  if (t <= x.front()) return y.front();
  if (t >= x.back()) return y.back();
  auto it = std::upper_bound(x.begin(), x.end(), t);
  size_t k = it - x.begin();
  double u = (t - x[k - 1]) / (x[k] - x[k - 1]);
  return (1 - u) * y[k - 1] + u * y[k];
}

double PLFunction::slope(double t) const {
  if (x.size() < 2 || t <= x.front() || t >= x.back()) return 0.0;
  auto it = std::upper_bound(x.begin(), x.end(), t);
  size_t k = it - x.begin();
  return (y[k] - y[k - 1]) / (x[k] - x[k - 1]);
}

double PLFunction::max_slope() const {
  double s = 0;
  for (size_t k = 1; k < x.size(); ++k)
    if (x[k] > x[k - 1])
      s = std::max(s, std::abs((y[k] - y[k - 1]) / (x[k] - x[k - 1])));
  return s;
}

namespace {

void push_bp(PLFunction& f, double xx, double yy) {
  if (!f.x.empty() && xx <= f.x.back() + 1e-15) {
    if (xx <= f.x.back()) return;  // keep first value at coincident points
  }
  f.x.push_back(xx);
  f.y.push_back(yy);
}

}  // namespace

Facet1DResult admissible_approx_1d(const PolyhedralFn& W, const FacetPair& A,
                                   double rho1, double rho2) {
  if (A.dim != 1) throw ConfigInvalid("admissible_approx_1d: pair must be 1D");
  if (W.dim != 1) throw ConfigInvalid("admissible_approx_1d: W must be on R");
  if (!W.one_homogeneous)
    throw NonHomogeneous("admissible_approx_1d: W must be one-homogeneous");
  if (!(rho2 > rho1) || rho1 < 0)
    throw ConfigInvalid("admissible_approx_1d: need 0 <= rho1 < rho2");
  if (A.minus1.is_empty() && A.plus1.is_empty())
    throw DegenerateInput("admissible_approx_1d: both sides empty");
  if (!A.bounded())
    throw DegenerateInput("admissible_approx_1d: pair must have compact facet");

  double w_plus = W.eval(Vec(1.0));
  double w_minus = -W.eval(Vec(-1.0));
  if (w_plus <= 0 || w_minus >= 0)
    throw NotCoercive("admissible_approx_1d: W must be positive off 0");

  double r1 = rho1 > 0 ? rho1 : rho2 / 4.0;
  double eps = (rho2 - r1) / 3.0;

  IntervalSet Gm = A.minus1.nbd(-rho2).nbd(eps).interior_closure();
  IntervalSet Gp = A.plus1.nbd(r1 + eps).interior_closure();

  Facet1DResult R;
  R.G = FacetPair::make1d(Gm, Gp);
  R.eps = eps;
  R.w_minus = w_minus;
  R.w_plus = w_plus;

  // merge components of both sides into one sorted list with signs
  struct Comp {
    double lo, hi;
    int s;
  };
  std::vector<Comp> comps;
  for (int i = 0; i < Gm.count(); ++i) comps.push_back({Gm.lo[i], Gm.hi[i], -1});
  for (int i = 0; i < Gp.count(); ++i) comps.push_back({Gp.lo[i], Gp.hi[i], +1});
  std::sort(comps.begin(), comps.end(),
            [](const Comp& a, const Comp& b) { return a.lo < b.lo; });
  if (comps.empty())
    throw DegenerateInput("admissible_approx_1d: construction emptied the pair");

  double min_len = kInf;
  for (const Comp& c : comps) {
    R.comp_lo.push_back(c.lo);
    R.comp_hi.push_back(c.hi);
    R.sigma.push_back(c.s);
    if (std::isfinite(c.lo) && std::isfinite(c.hi))
      min_len = std::min(min_len, c.hi - c.lo);
  }
  for (size_t i = 1; i < comps.size(); ++i)
    min_len = std::min(min_len, comps[i].lo - comps[i - 1].hi);
  R.delta = std::isfinite(min_len) ? min_len / 3.0 : eps;
  if (R.delta <= 0)
    throw DegenerateInput("admissible_approx_1d: degenerate gap structure");
  const double d = R.delta;

  auto wz = [&](int s) { return s > 0 ? w_plus : w_minus; };

  // psi: clipped distance trapezoid on each component, zero on facets
  for (size_t i = 0; i < comps.size(); ++i) {
    const Comp& c = comps[i];
    double v = c.s * d;
    if (std::isfinite(c.lo)) {
      push_bp(R.psi, c.lo, 0.0);
      push_bp(R.psi, c.lo + d, v);
    }
    if (std::isfinite(c.hi)) {
      push_bp(R.psi, c.hi - d, v);
      push_bp(R.psi, c.hi, 0.0);
    }
  }
  // z: W'(psi') where psi' != 0, linear across plateaus and facets
  for (size_t i = 0; i < comps.size(); ++i) {
    const Comp& c = comps[i];
    if (std::isfinite(c.lo)) {
      push_bp(R.z, c.lo, wz(c.s));
      push_bp(R.z, c.lo + d, wz(c.s));
    }
    if (std::isfinite(c.hi)) {
      push_bp(R.z, c.hi - d, wz(-c.s));
      push_bp(R.z, c.hi, wz(-c.s));
    }
  }
  return R;
}

double lambda_1d_exact(const Facet1DResult& res, int facet_index) {
  if (facet_index < 0 || facet_index >= res.facet_count())
    throw ConfigInvalid("lambda_1d_exact: bad facet index");
  double lo = res.facet_lo(facet_index);
  double hi = res.facet_hi(facet_index);
  double zl = res.sigma[facet_index] > 0 ? res.w_minus : res.w_plus;
  double zr = res.sigma[facet_index + 1] > 0 ? res.w_plus : res.w_minus;
  return (zr - zl) / (hi - lo);
}

}  // namespace cf
