#include "crystalflow/tvflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crystalflow/errors.hpp"

namespace cf {

namespace {

template <class F>
void for_cells(const GridTorus& g, F&& f) {
  int nj = g.k >= 2 ? g.N : 1;
  int nl = g.k >= 3 ? g.N : 1;
  for (int l = 0; l < nl; ++l)
    for (int j = 0; j < nj; ++j)
      for (int i = 0; i < g.N; ++i) f(i, j, l);
}

void dplus_into(const GridFn& f, GridVecField& z) {
  const double ih = 1.0 / f.g.h();
  const GridTorus& g = f.g;
  for_cells(g, [&](int i, int j, int l) {
    size_t c = g.idx(i, j, l);
    z.at(c, 0) = (f.v[g.idx(i + 1, j, l)] - f.v[c]) * ih;
    if (g.k >= 2) z.at(c, 1) = (f.v[g.idx(i, j + 1, l)] - f.v[c]) * ih;
    if (g.k >= 3) z.at(c, 2) = (f.v[g.idx(i, j, l + 1)] - f.v[c]) * ih;
  });
}

void dminus_into(const GridVecField& z, GridFn& f) {
  const double ih = 1.0 / z.g.h();
  const GridTorus& g = z.g;
  for_cells(g, [&](int i, int j, int l) {
    size_t c = g.idx(i, j, l);
    double s = z.at(c, 0) - z.at(g.idx(i - 1, j, l), 0);
    if (g.k >= 2) s += z.at(c, 1) - z.at(g.idx(i, j - 1, l), 1);
    if (g.k >= 3) s += z.at(c, 2) - z.at(g.idx(i, j, l - 1), 2);
    f.v[c] = s * ih;
  });
}

// Exact projection onto the Frank body, with closed forms for intervals,
// axis boxes, and convex polygons; Dykstra only for general 3D bodies.
struct ProjOp {
  enum Kind { Interval, Box, Poly2, General } kind = Interval;
  int k = 1;
  double lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
  std::vector<double> vx, vy;        // polygon vertices, CCW
  std::vector<double> en1, en2, ec;  // polygon edge outward normals/offsets
  Polytope P;

  explicit ProjOp(const Polytope& P0) : P(P0) {
    k = P0.dim;
    for (int c = 0; c < k; ++c) {
      lo[c] = 1e300;
      hi[c] = -1e300;
    }
    for (const Vec& v : P0.vertices)
      for (int c = 0; c < k; ++c) {
        lo[c] = std::min(lo[c], v.c[c]);
        hi[c] = std::max(hi[c], v.c[c]);
      }
    if (k == 1) {
      kind = Interval;
      return;
    }
    // box iff every bbox corner belongs to the body
    bool box = P0.affdim == k;
    for (int m = 0; m < (1 << k) && box; ++m) {
      Vec corner = Vec::zero(k);
      for (int c = 0; c < k; ++c) corner.c[c] = (m >> c & 1) ? hi[c] : lo[c];
      for (const Halfspace& h : P0.halfspaces)
        if (dot(h.n, corner) > h.c + 1e-12) box = false;
    }
    if (box) {
      kind = Box;
      return;
    }
    if (k == 2 && P0.affdim == 2) {
      kind = Poly2;
      int n = (int)P0.vertices.size();
      for (int i = 0; i < n; ++i) {
        const Vec& a = P0.vertices[i];
        const Vec& b = P0.vertices[(i + 1) % n];
        vx.push_back(a.c[0]);
        vy.push_back(a.c[1]);
        Vec e = b - a;
        Vec nrm = Vec(e.c[1], -e.c[0]).normalized();
        en1.push_back(nrm.c[0]);
        en2.push_back(nrm.c[1]);
        ec.push_back(nrm.c[0] * a.c[0] + nrm.c[1] * a.c[1]);
      }
      return;
    }
    kind = General;
  }

  void project(double* q) const {
    switch (kind) {
      case Interval:
        q[0] = std::min(hi[0], std::max(lo[0], q[0]));
        return;
      case Box:
        for (int c = 0; c < k; ++c) q[c] = std::min(hi[c], std::max(lo[c], q[c]));
        return;
      case Poly2: {
        bool in = true;
        int n = (int)vx.size();
        for (int i = 0; i < n && in; ++i)
          if (en1[i] * q[0] + en2[i] * q[1] > ec[i] + 1e-14) in = false;
        if (in) return;
        double bx = 0, by = 0, bd = 1e300;
        for (int i = 0; i < n; ++i) {
          double ax = vx[i], ay = vy[i];
          double cx = vx[(i + 1) % n], cy = vy[(i + 1) % n];
          double ex = cx - ax, ey = cy - ay;
          double t = ((q[0] - ax) * ex + (q[1] - ay) * ey) / (ex * ex + ey * ey);
          t = std::max(0.0, std::min(1.0, t));
          double px = ax + t * ex, py = ay + t * ey;
          double d = (q[0] - px) * (q[0] - px) + (q[1] - py) * (q[1] - py);
          if (d < bd) {
            bd = d;
            bx = px;
            by = py;
          }
        }
        q[0] = bx;
        q[1] = by;
        return;
      }
      case General: {
        Vec x = Vec::zero(k);
        for (int c = 0; c < k; ++c) x.c[c] = q[c];
        Vec y = P.project(x);
        for (int c = 0; c < k; ++c) q[c] = y.c[c];
        return;
      }
    }
  }
};

}  // namespace

double energy(const PolyhedralFn& W, const GridFn& psi) {
  if (W.dim != psi.g.k) throw ConfigInvalid("energy: dimension mismatch");
  GridVecField q = dplus(psi);
  double s = 0;
  Vec p = Vec::zero(W.dim);
  for (size_t cell = 0; cell < psi.v.size(); ++cell) {
    for (int c = 0; c < W.dim; ++c) p.c[c] = q.at(cell, c);
    s += W.eval(p);
  }
  return s * std::pow(psi.g.h(), psi.g.k);
}

double energy_smooth(const SmoothAnisotropy& Wm, const GridFn& psi) {
  GridVecField q = dplus(psi);
  double s = 0;
  Vec p = Vec::zero(psi.g.k);
  for (size_t cell = 0; cell < psi.v.size(); ++cell) {
    for (int c = 0; c < psi.g.k; ++c) p.c[c] = q.at(cell, c);
    s += Wm.value(p);
  }
  return s * std::pow(psi.g.h(), psi.g.k);
}

ResolventResult resolvent(const PolyhedralFn& W, const GridFn& psi, double a,
                          double tol, const GridFn* warm_phi,
                          const GridVecField* warm_z) {
  const GridTorus& g = psi.g;
  if (W.dim != g.k) throw ConfigInvalid("resolvent: dimension mismatch");
  if (!W.one_homogeneous)
    throw NonHomogeneous("resolvent: W must be one-homogeneous");
  if (a < 0) throw ConfigInvalid("resolvent: a must be >= 0");

  ResolventResult R;
  if (a == 0.0) {
    R.psi_a = psi;
    R.h_a = GridFn(g, 0.0);
    R.z = GridVecField(g);
    return R;
  }

  Polytope P0 = subdifferential(W, Vec::zero(W.dim));
  ProjOp proj(P0);

  GridFn phi = warm_phi && warm_phi->g.same_shape(g) ? *warm_phi : psi;
  GridVecField z(g);
  if (warm_z && warm_z->g.same_shape(g)) {
    z = *warm_z;
    for (double& x : z.v) x *= a;  // internal dual lives in a*dW(0)
    for (size_t cell = 0; cell < g.size(); ++cell) {
      double q[3];
      for (int c = 0; c < g.k; ++c) q[c] = z.at(cell, c) / a;
      proj.project(q);
      for (int c = 0; c < g.k; ++c) z.at(cell, c) = q[c] * a;
    }
  }
  GridFn phibar = phi, phiold = phi, div(g), grad_buf_f(g);
  GridVecField grad(g);

  const double Knorm = 2.0 * std::sqrt((double)g.k) / g.h();
  double tau = 1.0 / Knorm, sigma = 1.0 / Knorm;
  const int max_iter = 200000;
  const double hk = std::pow(g.h(), g.k);

  auto residual_sup = [&]() {
    dminus_into(z, div);
    double r = 0;
    for (size_t i = 0; i < phi.v.size(); ++i)
      r = std::max(r, std::abs(phi.v[i] - psi.v[i] - div.v[i]));
    return r;
  };

  double res = residual_sup();
  int it = 0;
  Vec pvec = Vec::zero(g.k);
  while (res > tol) {
    if (it >= max_iter) {
      std::ostringstream os;
      os << "resolvent: no convergence after " << max_iter
         << " iterations, residual " << res;
      throw NoConvergence(os.str());
    }
    // dual ascent + projection
    dplus_into(phibar, grad);
    for (size_t cell = 0; cell < g.size(); ++cell) {
      double q[3];
      for (int c = 0; c < g.k; ++c)
        q[c] = (z.at(cell, c) + sigma * grad.at(cell, c)) / a;
      proj.project(q);
      for (int c = 0; c < g.k; ++c) z.at(cell, c) = q[c] * a;
    }
    // primal prox + extrapolation
    dminus_into(z, div);
    std::swap(phiold.v, phi.v);
    double theta = 1.0 / std::sqrt(1.0 + 2.0 * tau);
    for (size_t i = 0; i < phi.v.size(); ++i) {
      phi.v[i] = (phiold.v[i] + tau * (div.v[i] + psi.v[i])) / (1.0 + tau);
      phibar.v[i] = phi.v[i] + theta * (phi.v[i] - phiold.v[i]);
    }
    tau *= theta;
    sigma /= theta;
    ++it;
    if (it % 16 == 0 || it < 4) {
      res = residual_sup();
      if (res <= tol) {
        // secondary certificate: primal-dual gap
        double prim = 0, dual = 0;
        for (size_t i = 0; i < phi.v.size(); ++i) {
          double d = phi.v[i] - psi.v[i];
          prim += 0.5 * d * d;
          dual += -0.5 * div.v[i] * div.v[i] - psi.v[i] * div.v[i];
        }
        prim *= hk;
        dual *= hk;
        dplus_into(phi, grad);
        double ew = 0;
        for (size_t cell = 0; cell < g.size(); ++cell) {
          for (int c = 0; c < g.k; ++c) pvec.c[c] = grad.at(cell, c);
          ew += W.eval(pvec);
        }
        prim += a * ew * hk;
        if (prim - dual > tol * (1.0 + std::abs(prim))) res = tol * 1.0001;
      }
    }
  }

  R.psi_a = phi;
  R.h_a = GridFn(g);
  for (size_t i = 0; i < phi.v.size(); ++i)
    R.h_a.v[i] = (phi.v[i] - psi.v[i]) / a;
  R.z = z;
  for (double& x : R.z.v) x /= a;
  R.residual = res;
  R.iterations = it;
  return R;
}

ResolventResult resolvent_smooth(const SmoothAnisotropy& Wm, const GridFn& psi,
                                 double a, double tol) {
  const GridTorus& g = psi.g;
  if (Wm.base.dim != g.k)
    throw ConfigInvalid("resolvent_smooth: dimension mismatch");
  if (Wm.kind == SmoothKind::OneHomogeneous)
    throw ConfigInvalid("resolvent_smooth: needs the quadratic-growth kind");
  if (a < 0) throw ConfigInvalid("resolvent_smooth: a must be >= 0");

  ResolventResult R;
  if (a == 0.0) {
    R.psi_a = psi;
    R.h_a = GridFn(g, 0.0);
    R.z = GridVecField(g);
    return R;
  }

  const int k = g.k;
  GridFn phi = psi, gres(g), div(g);
  GridVecField q(g), zfield(g), Hq(g);
  std::vector<double> Hcell(g.size() * k * k);
  Vec p = Vec::zero(k);
  double H[9];

  auto compute_residual = [&]() {
    dplus_into(phi, q);
    for (size_t cell = 0; cell < g.size(); ++cell) {
      for (int c = 0; c < k; ++c) p.c[c] = q.at(cell, c);
      Vec gw = Wm.gradient(p);
      for (int c = 0; c < k; ++c) zfield.at(cell, c) = gw.c[c];
    }
    dminus_into(zfield, div);
    double r = 0;
    for (size_t i = 0; i < phi.v.size(); ++i) {
      gres.v[i] = phi.v[i] - psi.v[i] - a * div.v[i];
      r = std::max(r, std::abs(gres.v[i]));
    }
    return r;
  };

  auto merit = [&](const GridFn& f) {
    double m = 0;
    for (size_t i = 0; i < f.v.size(); ++i) {
      double d = f.v[i] - psi.v[i];
      m += 0.5 * d * d;
    }
    return m * std::pow(g.h(), k) + a * energy_smooth(Wm, f);
  };

  double res = compute_residual();
  int newton = 0;
  for (; newton < 80 && res > tol; ++newton) {
    // freeze cellwise Hessians
    dplus_into(phi, q);
    for (size_t cell = 0; cell < g.size(); ++cell) {
      for (int c = 0; c < k; ++c) p.c[c] = q.at(cell, c);
      Wm.hessian(p, H);
      for (int c = 0; c < k * k; ++c) Hcell[cell * k * k + c] = H[c];
    }
    auto applyJ = [&](const GridFn& vin, GridFn& vout) {
      dplus_into(vin, q);
      for (size_t cell = 0; cell < g.size(); ++cell) {
        const double* Hc = &Hcell[cell * k * k];
        for (int r = 0; r < k; ++r) {
          double s = 0;
          for (int c = 0; c < k; ++c) s += Hc[r * k + c] * q.at(cell, c);
          Hq.at(cell, r) = s;
        }
      }
      dminus_into(Hq, vout);
      for (size_t i = 0; i < vin.v.size(); ++i)
        vout.v[i] = vin.v[i] - a * vout.v[i];
    };
    // CG on J d = -g
    GridFn d(g, 0.0), r(g), pr(g), Ap(g);
    for (size_t i = 0; i < r.v.size(); ++i) r.v[i] = -gres.v[i];
    pr = r;
    double rr = inner(r, r);
    double cg_tol2 = std::pow(0.1 * std::min(1.0, res), 2) * rr;
    for (int cg = 0; cg < 500 && rr > cg_tol2 && rr > 1e-300; ++cg) {
      applyJ(pr, Ap);
      double alpha = rr / std::max(inner(pr, Ap), 1e-300);
      for (size_t i = 0; i < d.v.size(); ++i) {
        d.v[i] += alpha * pr.v[i];
        r.v[i] -= alpha * Ap.v[i];
      }
      double rr2 = inner(r, r);
      double beta = rr2 / rr;
      rr = rr2;
      for (size_t i = 0; i < pr.v.size(); ++i) pr.v[i] = r.v[i] + beta * pr.v[i];
    }
    // Armijo backtracking on the convex merit
    double m0 = merit(phi), gd = inner(gres, d);
    double t = 1.0;
    GridFn trial(g);
    for (int ls = 0; ls < 30; ++ls) {
      for (size_t i = 0; i < phi.v.size(); ++i)
        trial.v[i] = phi.v[i] + t * d.v[i];
      if (merit(trial) <= m0 + 1e-4 * t * gd || t < 1e-12) break;
      t *= 0.5;
    }
    for (size_t i = 0; i < phi.v.size(); ++i) phi.v[i] += t * d.v[i];
    res = compute_residual();
  }
  if (res > tol) {
    std::ostringstream os;
    os << "resolvent_smooth: stalled with residual " << res;
    throw NoConvergence(os.str());
  }

  R.psi_a = phi;
  R.h_a = GridFn(g);
  for (size_t i = 0; i < phi.v.size(); ++i)
    R.h_a.v[i] = (phi.v[i] - psi.v[i]) / a;
  R.z = zfield;
  R.residual = res;
  R.iterations = newton;
  return R;
}

namespace {

double masked_sup_diff(const GridFn& x, const GridFn& y,
                       const std::vector<char>* mask) {
  double m = 0;
  for (size_t i = 0; i < x.v.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    m = std::max(m, std::abs(x.v[i] - y.v[i]));
  }
  return m;
}

}  // namespace

MinimalSectionResult minimal_section(const PolyhedralFn& W, const GridFn& psi,
                                     std::vector<double> schedule,
                                     const std::vector<char>* mask,
                                     double tol_ms) {
  if (schedule.empty()) {
    double a0 = 0.1 * std::pow(psi.g.L / 4.0, 2);
    for (int j = 0; j <= 6; ++j) schedule.push_back(a0 * std::pow(4.0, -j));
  }
  MinimalSectionResult M;
  M.schedule = schedule;

  GridFn prev_h;
  GridFn warm = psi;
  GridVecField warm_z;
  bool have_warm_z = false;
  double scale = psi.max_abs();

  for (size_t j = 0; j < schedule.size(); ++j) {
    double a = schedule[j];
    double tol = tol_ms > 0 ? std::max(1e-13, 0.1 * std::min(1.0, a) * tol_ms)
                            : 1e-8 * (1.0 + scale);
    ResolventResult R = resolvent(W, psi, a, tol, &warm,
                                  have_warm_z ? &warm_z : nullptr);
    warm = R.psi_a;
    warm_z = R.z;
    have_warm_z = true;
    M.last_residual = R.residual;
    if (j == 0 && tol_ms <= 0) {
      double hmax = 0;
      for (size_t i = 0; i < R.h_a.v.size(); ++i)
        if (!mask || (*mask)[i]) hmax = std::max(hmax, std::abs(R.h_a.v[i]));
      tol_ms = 1e-3 * (hmax > 0 ? hmax : 1.0);
    }
    if (j > 0) {
      M.last_diff = masked_sup_diff(R.h_a, prev_h, mask);
      if (M.last_diff < tol_ms) {
        M.h = R.h_a;
        M.h_richardson = GridFn(psi.g);
        for (size_t i = 0; i < M.h.v.size(); ++i)
          M.h_richardson.v[i] = (4.0 * R.h_a.v[i] - prev_h.v[i]) / 3.0;
        M.J = (int)j;
        M.settled = true;
        return M;
      }
    }
    if (j + 1 == schedule.size()) {
      M.h = R.h_a;
      M.h_richardson = GridFn(psi.g);
      if (j > 0) {
        for (size_t i = 0; i < M.h.v.size(); ++i)
          M.h_richardson.v[i] = (4.0 * R.h_a.v[i] - prev_h.v[i]) / 3.0;
      } else {
        M.h_richardson = R.h_a;
      }
      M.J = (int)j;
      M.settled = false;
    }
    prev_h = R.h_a;
  }
  return M;
}

LambdaResult lambda_p(const PolyhedralFn& W, const Vec& p,
                      const SampledFn& psi_bar, const FacetPair& pair,
                      int N, const Vec* ball_center, double ball_radius,
                      std::vector<double> schedule) {
  auto [Wsl, S] = sliced(W, p);
  const int k = S.k;
  if (psi_bar.dim != k)
    throw ConfigInvalid("lambda_p: support sample dimension != dim dW(p)");
  if (pair.dim != k) throw ConfigInvalid("lambda_p: pair dimension != slice dim");
  if (k > 2) throw ConfigInvalid("lambda_p: only k = 1, 2 supported");
  if (N <= 0) N = k == 1 ? 256 : 128;

  // region membership tests in slice coordinates
  auto in_plus = [&](const Vec& x) {
    return k == 1 ? pair.plus1.contains(x.c[0]) : pair.plus2.sdist(x) < 0;
  };
  auto in_minus = [&](const Vec& x) {
    return k == 1 ? pair.minus1.contains(x.c[0]) : pair.minus2.sdist(x) < 0;
  };
  auto depth_plus = [&](const Vec& x) {
    return k == 1 ? pair.plus1.dist_comp(x.c[0]) : pair.plus2.dist_to_comp(x);
  };
  auto depth_minus = [&](const Vec& x) {
    return k == 1 ? pair.minus1.dist_comp(x.c[0]) : pair.minus2.dist_to_comp(x);
  };

  // validate that psi_bar is a support function of the pair
  const double hbar = psi_bar.h;
  const double lip = psi_bar.lipschitz();
  const double tau_zero = hbar * (lip + 1e-12);
  int nyb = k == 1 ? 1 : psi_bar.ny;
  std::vector<Vec> facet_nodes;
  for (int j = 0; j < nyb; ++j)
    for (int i = 0; i < psi_bar.nx; ++i) {
      Vec x = psi_bar.point(i, j);
      double val = psi_bar.at(i, j);
      if (depth_plus(x) > hbar && val <= 0)
        throw NotSupport("lambda_p: sample not positive inside plus");
      if (depth_minus(x) > hbar && val >= 0)
        throw NotSupport("lambda_p: sample not negative inside minus");
      bool facet = !in_plus(x) && !in_minus(x);
      if (facet) {
        if (std::abs(val) > tau_zero)
          throw NotSupport("lambda_p: sample not ~0 on the facet");
        facet_nodes.push_back(x);
      }
    }
  if (facet_nodes.empty())
    throw DegenerateInput("lambda_p: facet not resolved by the sample grid");

  // facet must sit strictly inside the sampling window
  double min_edge_abs = kInf;
  for (int j = 0; j < nyb; ++j)
    for (int i = 0; i < psi_bar.nx; ++i) {
      bool edge = i == 0 || i == psi_bar.nx - 1 ||
                  (k == 2 && (j == 0 || j == nyb - 1));
      if (edge) min_edge_abs = std::min(min_edge_abs, std::abs(psi_bar.at(i, j)));
    }
  if (!(min_edge_abs > tau_zero))
    throw FacetTooLarge("lambda_p: facet reaches the sampling window edge");
  double delta_clip = 0.9 * min_edge_abs;

  Vec centroid = Vec::zero(k);
  for (const Vec& x : facet_nodes) centroid += (1.0 / facet_nodes.size()) * x;
  double rad = 0;
  Vec flo = facet_nodes[0], fhi = facet_nodes[0];
  for (const Vec& x : facet_nodes) {
    rad = std::max(rad, dist(x, centroid));
    for (int c = 0; c < k; ++c) {
      flo.c[c] = std::min(flo.c[c], x.c[c]);
      fhi.c[c] = std::max(fhi.c[c], x.c[c]);
    }
  }
  double facet_len = dist(flo, fhi) + hbar;
  double L = 4.0 * 1.05 * std::max(rad + hbar, 4 * hbar);

  LambdaResult out;
  out.torus.k = k;
  out.torus.L = L;
  out.torus.N = N;
  out.delta_clip = delta_clip;
  out.origin = centroid;
  for (int c = 0; c < k; ++c) out.origin.c[c] -= L / 2.0;

  const GridTorus& g = out.torus;
  const double h = g.h();
  out.psi_per = GridFn(g);
  out.mask.assign(g.size(), 0);

  auto node_coord = [&](int i, int j) {
    Vec x = out.origin;
    x.c[0] += i * h;
    if (k == 2) x.c[1] += j * h;
    return x;
  };
  auto in_window = [&](const Vec& x) {
    for (int c = 0; c < k; ++c) {
      double t = (x.c[c] - psi_bar.origin.c[c]) / hbar;
      double n = (c == 0 ? psi_bar.nx : psi_bar.ny) - 1;
      if (t < -1e-9 || t > n + 1e-9) return false;
    }
    return true;
  };

  int nyg = k == 1 ? 1 : N;
  for (int j = 0; j < nyg; ++j)
    for (int i = 0; i < N; ++i) {
      Vec x = node_coord(i, j);
      double val;
      if (in_window(x)) {
        val = std::max(-delta_clip, std::min(delta_clip, psi_bar.eval(x)));
      } else if (in_plus(x)) {
        val = delta_clip;
      } else if (in_minus(x)) {
        val = -delta_clip;
      } else {
        val = 0.0;
      }
      out.psi_per.at(i, j) = val;
      if (!in_plus(x) && !in_minus(x)) out.mask[g.idx(i, j)] = 1;
    }
  // one-cell erosion of the facet mask
  std::vector<char> eroded(out.mask);
  for (int j = 0; j < nyg; ++j)
    for (int i = 0; i < N; ++i) {
      if (!out.mask[g.idx(i, j)]) continue;
      bool keep = out.mask[g.idx(i - 1, j)] && out.mask[g.idx(i + 1, j)];
      if (k == 2)
        keep = keep && out.mask[g.idx(i, j - 1)] && out.mask[g.idx(i, j + 1)];
      eroded[g.idx(i, j)] = keep ? 1 : 0;
    }
  out.mask = eroded;
  bool any = false;
  for (char c : out.mask) any |= (c != 0);
  if (!any)
    throw DegenerateInput("lambda_p: facet thinner than 3 grid cells");

  if (schedule.empty()) {
    double a0 = 0.1 * facet_len * facet_len;
    for (int j = 0; j <= 6; ++j) schedule.push_back(a0 * std::pow(4.0, -j));
  }
  out.ms = minimal_section(Wsl, out.psi_per, schedule, &out.mask);

  out.lambda = GridFn(g);
  for (size_t i = 0; i < out.lambda.v.size(); ++i)
    out.lambda.v[i] = -out.ms.h.v[i];

  out.ess_inf = kInf;
  out.ess_sup = -kInf;
  for (int j = 0; j < nyg; ++j)
    for (int i = 0; i < N; ++i) {
      if (!out.mask[g.idx(i, j)]) continue;
      if (ball_center && ball_radius > 0 &&
          dist(node_coord(i, j), *ball_center) > ball_radius)
        continue;
      double lam = out.lambda.at(i, j);
      out.ess_inf = std::min(out.ess_inf, lam);
      out.ess_sup = std::max(out.ess_sup, lam);
    }
  return out;
}

GridVecField patch_fields(const GridVecField& z1, const GridFn& psi1,
                          const GridVecField& z2, const GridFn& psi2,
                          double alpha, double beta, double tau_zero) {
  const GridTorus& g = psi1.g;
  if (!g.same_shape(psi2.g) || !g.same_shape(z1.g) || !g.same_shape(z2.g))
    throw ConfigInvalid("patch_fields: grid mismatch");
  if (!(alpha < beta)) throw ConfigInvalid("patch_fields: need alpha < beta");
  if (tau_zero < 0)
    tau_zero = 0.5 * g.h() * std::max(grad_sup(psi1), grad_sup(psi2));
  GridVecField z = z1;
  for (size_t cell = 0; cell < g.size(); ++cell) {
    if (psi1.v[cell] > alpha && psi1.v[cell] < beta) {
      if (std::abs(psi1.v[cell] - psi2.v[cell]) > tau_zero)
        throw MismatchOnBand("patch_fields: psi1 != psi2 on the band");
      for (int c = 0; c < g.k; ++c) z.at(cell, c) = z2.at(cell, c);
    }
  }
  return z;
}

SlicingReport slicing_check(const PolyhedralFn& W, const Vec& p,
                            const GridFn& psi_bar, const GridFn& f, double a,
                            double tol) {
  auto [Wsl, S] = sliced(W, p);
  const int k = S.k;
  const int n = W.dim;
  if (psi_bar.g.k != k || f.g.k != n - k)
    throw ConfigInvalid("slicing_check: factor dimensions");
  if (psi_bar.g.N != f.g.N || psi_bar.g.L != f.g.L)
    throw ConfigInvalid("slicing_check: factor grids must match");

  // directional energy density, rotated into the stratum frame
  PolyhedralFn Wdir = directional_derivative(W, p);
  std::vector<Vec> arot;
  std::vector<double> brot;
  for (const Vec& v : Wdir.a) {
    Vec q = Vec::zero(n);
    Vec qv = S.to_V(v), qu = S.to_U(v);
    for (int c = 0; c < k; ++c) q.c[c] = qv.c[c];
    for (int c = k; c < n; ++c) q.c[c] = qu.c[c - k];
    arot.push_back(q);
    brot.push_back(0.0);
  }
  PolyhedralFn Wrot = make_polyhedral(n, arot, brot, W.name + "_rot");

  GridTorus gp;
  gp.k = n;
  gp.L = psi_bar.g.L;
  gp.N = psi_bar.g.N;
  GridFn psi(gp);
  const int N = gp.N;
  if (n == 2) {
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) psi.at(i, j) = psi_bar.v[i] + f.v[j];
  } else if (n == 3 && k == 1) {
    for (int l = 0; l < N; ++l)
      for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i)
          psi.at(i, j, l) = psi_bar.v[i] + f.v[f.g.idx(j, l)];
  } else if (n == 3 && k == 2) {
    for (int l = 0; l < N; ++l)
      for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i)
          psi.at(i, j, l) = psi_bar.v[psi_bar.g.idx(i, j)] + f.v[l];
  } else {
    throw ConfigInvalid("slicing_check: unsupported dimensions");
  }

  ResolventResult full = resolvent(Wrot, psi, a, tol);
  ResolventResult slice = resolvent(Wsl, psi_bar, a, tol);

  SlicingReport rep;
  rep.N = N;
  double diff = 0;
  if (n == 2) {
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i)
        diff = std::max(diff, std::abs(full.psi_a.at(i, j) -
                                       (slice.psi_a.v[i] + f.v[j])));
  } else if (n == 3 && k == 1) {
    for (int l = 0; l < N; ++l)
      for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i)
          diff = std::max(diff, std::abs(full.psi_a.at(i, j, l) -
                                         (slice.psi_a.v[i] + f.v[f.g.idx(j, l)])));
  } else {
    for (int l = 0; l < N; ++l)
      for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i)
          diff = std::max(
              diff, std::abs(full.psi_a.at(i, j, l) -
                             (slice.psi_a.v[psi_bar.g.idx(i, j)] + f.v[l])));
  }
  rep.max_diff = diff;
  rep.tol_bound = 5.0 * gp.h();
  return rep;
}

}  // namespace cf
