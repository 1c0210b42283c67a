#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

using cf::GridFn;
using cf::GridTorus;
using cf::GridVecField;
using cf::PolyhedralFn;
using cf::Vec;

double polar_value(const PolyhedralFn& W, const Vec& x, int ndirs) {
  double best = 0.0;
  auto consider = [&](Vec p) {
    double w = W.eval(p);
    if (w > 1e-12) best = std::max(best, x.dot(p) / w);
  };
  if (W.dim == 1) {
    consider(Vec(1.0));
    consider(Vec(-1.0));
    return best;
  }
  if (W.dim == 2) {
    for (int i = 0; i < ndirs; ++i) {
      double th = 2 * M_PI * i / ndirs;
      consider(Vec(std::cos(th), std::sin(th)));
    }
    return best;
  }
  int n = (int)std::sqrt((double)ndirs);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2 * n; ++j) {
      double ph = M_PI * (i + 0.5) / n, th = M_PI * j / n;
      consider(Vec(std::sin(ph) * std::cos(th), std::sin(ph) * std::sin(th),
                   std::cos(ph)));
    }
  return best;
}

std::vector<int> active_pieces(const PolyhedralFn& W, const Vec& p, double tol) {
  double m = -1e300;
  for (int i = 0; i < W.pieces(); ++i)
    m = std::max(m, W.a[i].dot(p) + W.b[i]);
  std::vector<int> out;
  for (int i = 0; i < W.pieces(); ++i)
    if (W.a[i].dot(p) + W.b[i] >= m - tol) out.push_back(i);
  return out;
}

namespace {

void project_cell(Frank kind, double r, double* q, int k) {
  if (kind == Frank::Box) {
    for (int c = 0; c < k; ++c) q[c] = std::clamp(q[c], -r, r);
    return;
  }
  // l1 ball of radius r: soft threshold against the sorted magnitudes
  double l1 = 0;
  for (int c = 0; c < k; ++c) l1 += std::abs(q[c]);
  if (l1 <= r) return;
  double mag[3];
  for (int c = 0; c < k; ++c) mag[c] = std::abs(q[c]);
  std::sort(mag, mag + k, std::greater<double>());
  double cum = 0, theta = 0;
  for (int c = 0; c < k; ++c) {
    cum += mag[c];
    double cand = (cum - r) / (c + 1);
    if (c + 1 == k || cand >= mag[c + 1]) {
      theta = cand;
      break;
    }
  }
  for (int c = 0; c < k; ++c) {
    double m = std::max(std::abs(q[c]) - theta, 0.0);
    q[c] = q[c] < 0 ? -m : m;
  }
}

}  // namespace

GridFn prox_tv(Frank kind, double radius, const GridFn& psi, double a, int iters) {
  const GridTorus& g = psi.g;
  GridVecField zeta(g), y(g), zold(g);
  GridFn cur = psi;
  double step = 0.9 * g.h() * g.h() / (4.0 * g.k);
  double tk = 1.0;
  const double r = radius * a;
  for (int it = 0; it < iters; ++it) {
    // grad of 1/2||psi + div y||^2 wrt y is -D+(psi + div y)
    GridFn div = dminus(y);
    for (size_t i = 0; i < cur.v.size(); ++i) cur.v[i] = psi.v[i] + div.v[i];
    GridVecField grad = dplus(cur);
    zold.v = zeta.v;
    for (size_t cell = 0; cell < g.size(); ++cell) {
      double q[3];
      for (int c = 0; c < g.k; ++c) q[c] = y.at(cell, c) + step * grad.at(cell, c);
      project_cell(kind, r, q, g.k);
      for (int c = 0; c < g.k; ++c) zeta.at(cell, c) = q[c];
    }
    double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    double beta = (tk - 1.0) / tn;
    for (size_t i = 0; i < zeta.v.size(); ++i)
      y.v[i] = zeta.v[i] + beta * (zeta.v[i] - zold.v[i]);
    tk = tn;
  }
  GridFn div = dminus(zeta);
  GridFn out = psi;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += div.v[i];
  return out;
}

std::vector<double> edt_sq_brute(const std::vector<char>& mask, int nx, int ny) {
  std::vector<double> out((size_t)nx * ny, std::numeric_limits<double>::infinity());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double best = out[(size_t)j * nx + i];
      for (int q = 0; q < ny; ++q)
        for (int p = 0; p < nx; ++p)
          if (mask[(size_t)q * nx + p]) {
            double d = (double)(i - p) * (i - p) + (double)(j - q) * (j - q);
            best = std::min(best, d);
          }
      out[(size_t)j * nx + i] = best;
    }
  return out;
}

double square_side(double L0, double t) {
  return std::sqrt(std::max(L0 * L0 - 8.0 * t, 0.0));
}

double disc_radius(double r0, double t) {
  return std::sqrt(std::max(r0 * r0 - 2.0 * t, 0.0));
}

double facet_div_1d(double lo, double hi, bool plus_left, bool plus_right,
                    double w_minus, double w_plus) {
  // psi rises to 0 from a minus component and falls from a plus component,
  // so z at the left endpoint is w_plus against minus, w_minus against plus
  double zl = plus_left ? w_minus : w_plus;
  double zr = plus_right ? w_plus : w_minus;
  return (zr - zl) / (hi - lo);
}

double hausdorff_points(const std::vector<Vec>& A, const std::vector<Vec>& B) {
  if (A.empty() && B.empty()) return 0.0;
  if (A.empty() || B.empty()) return std::numeric_limits<double>::infinity();
  double h = 0.0;
  for (const Vec& a : A) {
    double d = 1e300;
    for (const Vec& b : B) d = std::min(d, cf::dist(a, b));
    h = std::max(h, d);
  }
  for (const Vec& b : B) {
    double d = 1e300;
    for (const Vec& a : A) d = std::min(d, cf::dist(a, b));
    h = std::max(h, d);
  }
  return h;
}

}  // namespace oracle
