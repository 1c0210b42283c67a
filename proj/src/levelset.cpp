#include "crystalflow/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "crystalflow/errors.hpp"
#include "crystalflow/io.hpp"
#include "crystalflow/region2d.hpp"

namespace cf {

SpeedLaw SpeedLaw::kappa() {
  SpeedLaw s;
  s.affine = true;
  s.c0 = 0.0;
  s.c1 = 1.0;
  s.C_f = 1.0;
  s.lambda_slope = 1.0;
  s.name = "kappa";
  s.f = [](const Vec&, double l) { return l; };
  return s;
}

SpeedLaw SpeedLaw::kappa_plus_one() {
  SpeedLaw s = linear(1.0, 1.0);
  s.name = "kappa-plus-one";
  return s;
}

SpeedLaw SpeedLaw::linear(double c0, double c1) {
  SpeedLaw s;
  s.affine = true;
  s.c0 = c0;
  s.c1 = c1;
  s.C_f = std::max(std::abs(c0), std::abs(c1));
  s.lambda_slope = std::abs(c1);
  s.name = "linear";
  s.f = [c0, c1](const Vec&, double l) { return c0 + c1 * l; };
  return s;
}

double GeometricF::operator()(const Vec& p, double xi) const {
  double pn = p.norm();
  if (pn < 1e-14) return 0.0;
  return -pn * law((-1.0 / pn) * p, xi);
}

LevelSetState make_state(const BoxGrid& g,
                         const std::function<double(const Vec&)>& u0, int m,
                         double c) {
  LevelSetState s;
  s.g = g;
  s.m = m;
  s.c = c;
  s.u.resize(g.size());
  int nl = g.dim >= 3 ? g.N : 1;
  for (int l = 0; l < nl; ++l)
    for (int j = 0; j < g.N; ++j)
      for (int i = 0; i < g.N; ++i)
        s.u[g.idx(i, j, l)] = u0(g.point(i, j, l));
  return s;
}

namespace {

struct SweepResult {
  double sc_max = 0.0;
  double sup_change = 0.0;
};

// Active cell and face index lists for the 2-d kernels. A face belongs to the
// list when either adjacent cell is updated; x-faces are stored at the index
// of their left cell, y-faces at their lower cell.
void rebuild_lists2(LevelSetState& s) {
  const int N = s.g.N;
  const bool masked = !s.active.empty();
  auto act = [&](int i, int j) {
    return i >= 1 && i <= N - 2 && j >= 1 && j <= N - 2 &&
           (!masked || s.active[s.g.idx(i, j)]);
  };
  s.cells.clear();
  s.xfaces.clear();
  s.yfaces.clear();
  for (int j = 1; j < N - 1; ++j)
    for (int i = 1; i < N - 1; ++i)
      if (act(i, j)) s.cells.push_back((unsigned)s.g.idx(i, j));
  for (int j = 1; j < N - 1; ++j)
    for (int i = 0; i < N - 1; ++i)
      if (act(i, j) || act(i + 1, j))
        s.xfaces.push_back((unsigned)s.g.idx(i, j));
  for (int j = 0; j < N - 1; ++j)
    for (int i = 1; i < N - 1; ++i)
      if (act(i, j) || act(i, j + 1))
        s.yfaces.push_back((unsigned)s.g.idx(i, j));
  size_t n = s.u.size();
  s.fzx.assign(n, 0.0);
  s.fhx.assign(n, 0.0);
  s.fzy.assign(n, 0.0);
  s.fhy.assign(n, 0.0);
}

// Conservation-form kernel for the quadratic-growth regularization:
// xi_i = sum_d [dW_m/dp_d(D+u)_i - dW_m/dp_d(D+u)_{i-e_d}] / h. By the mean
// value theorem this is tr[Hess W_m * Hess u] with the Hessian at staggered
// gradients; unlike the pointwise trace it conserves the flux of
// z = grad W_m(grad u), so a facet's speed (the z-jump across it) survives
// even when the 1/m transition layer at its ends is below grid resolution.
SweepResult sweep2_flux(LevelSetState& s, const SmoothAnisotropy& Wm,
                        const GeometricF& F, double dt, bool commit) {
  const BoxGrid& g = s.g;
  const int N = g.N;
  const double h = g.h(), h2 = h * h;
  const SpeedLaw& law = F.law;
  const double slope = std::abs(law.lambda_slope);
  const double* u = s.u.data();
  SweepResult r;
  if (s.fzx.empty()) rebuild_lists2(s);
  if (commit) s.scratch = s.u;
  double* un = commit ? s.scratch.data() : nullptr;

  if (Wm.separable) {
    for (unsigned f : s.xfaces)
      Wm.axis_flux(0, (u[f + 1] - u[f]) / h, s.fzx[f], s.fhx[f]);
    for (unsigned f : s.yfaces)
      Wm.axis_flux(1, (u[f + N] - u[f]) / h, s.fzy[f], s.fhy[f]);
  } else {
    Vec p = Vec::zero(2);
    for (unsigned f : s.xfaces) {
      p[0] = (u[f + 1] - u[f]) / h;
      p[1] = (u[f + N] + u[f + 1 + N] - u[f - N] - u[f + 1 - N]) / (4 * h);
      double h11, h12, h22;
      Wm.hessian2(p[0], p[1], h11, h12, h22);
      s.fzx[f] = Wm.gradient(p)[0];
      s.fhx[f] = h11;
    }
    for (unsigned f : s.yfaces) {
      p[0] = (u[f + 1] + u[f + N + 1] - u[f - 1] - u[f + N - 1]) / (4 * h);
      p[1] = (u[f + N] - u[f]) / h;
      double h11, h12, h22;
      Wm.hessian2(p[0], p[1], h11, h12, h22);
      s.fzy[f] = Wm.gradient(p)[1];
      s.fhy[f] = h22;
    }
  }

  Vec nh = Vec::zero(2);
  for (unsigned id : s.cells) {
    double uC = u[id];
    double uE = u[id + 1], uW = u[id - 1];
    double uN = u[id + N], uS = u[id - N];
    double px = (uE - uW) / (2 * h), py = (uN - uS) / (2 * h);
    double pn = std::sqrt(px * px + py * py);
    if (pn < 1e-12) continue;  // F(0, .) = 0

    double adv;
    if (law.affine) {
      adv = law.c0;
    } else {
      nh[0] = -px / pn;
      nh[1] = -py / pn;
      adv = law.f(nh, 0.0);
    }

    double xi = (s.fzx[id] - s.fzx[id - 1] + s.fzy[id] - s.fzy[id - N]) / h;
    double rate;
    if (law.affine) {
      rate = pn * law.c1 * xi;
    } else {
      rate = pn * (law.f(nh, xi) - adv);
    }
    double center =
        pn * slope * (s.fhx[id] + s.fhx[id - 1] + s.fhy[id] + s.fhy[id - N]) /
        h2;

    if (adv != 0.0) {
      double dmx = (uC - uW) / h, dpx = (uE - uC) / h;
      double dmy = (uC - uS) / h, dpy = (uN - uC) / h;
      double gx, gy;
      if (adv > 0) {
        gx = std::max(dmx, 0.0) * std::max(dmx, 0.0) +
             std::min(dpx, 0.0) * std::min(dpx, 0.0);
        gy = std::max(dmy, 0.0) * std::max(dmy, 0.0) +
             std::min(dpy, 0.0) * std::min(dpy, 0.0);
      } else {
        gx = std::min(dmx, 0.0) * std::min(dmx, 0.0) +
             std::max(dpx, 0.0) * std::max(dpx, 0.0);
        gy = std::min(dmy, 0.0) * std::min(dmy, 0.0) +
             std::max(dpy, 0.0) * std::max(dpy, 0.0);
      }
      rate += adv * std::sqrt(gx + gy);
      center += 4 * std::abs(adv) / h;
    }

    r.sc_max = std::max(r.sc_max, center);
    if (commit) {
      un[id] = uC + dt * rate;
      r.sup_change = std::max(r.sup_change, std::abs(dt * rate));
    }
  }
  return r;
}

// One pass of the explicit operator. With commit, the update lands in
// s.scratch (the caller swaps after checking the CFL number); without, only
// the stability statistics are produced.
SweepResult sweep2(LevelSetState& s, const SmoothAnisotropy& Wm,
                   const GeometricF& F, double dt, bool commit) {
  if (Wm.kind != SmoothKind::OneHomogeneous)
    return sweep2_flux(s, Wm, F, dt, commit);
  const BoxGrid& g = s.g;
  const int N = g.N;
  const double h = g.h(), h2 = h * h;
  const SpeedLaw& law = F.law;
  const double slope = std::abs(law.lambda_slope);
  const bool masked = !s.active.empty();
  const double* u = s.u.data();
  SweepResult r;
  if (commit) s.scratch = s.u;
  double* un = commit ? s.scratch.data() : nullptr;

  Vec nh = Vec::zero(2);
  for (int j = 1; j < N - 1; ++j)
    for (int i = 1; i < N - 1; ++i) {
      size_t id = g.idx(i, j);
      if (masked && !s.active[id]) continue;
      double uC = u[id];
      double uE = u[id + 1], uW = u[id - 1];
      double uN = u[id + N], uS = u[id - N];
      double px = (uE - uW) / (2 * h), py = (uN - uS) / (2 * h);
      double pn = std::sqrt(px * px + py * py);
      if (pn < 1e-12) continue;  // F(0, .) = 0

      double adv;
      if (law.affine) {
        adv = law.c0;
      } else {
        nh[0] = -px / pn;
        nh[1] = -py / pn;
        adv = law.f(nh, 0.0);
      }

      double a11, a12, a22;
      Wm.hessian2(px, py, a11, a12, a22);
      double cap = std::min(a11, a22);
      a12 = std::max(-cap, std::min(cap, a12));
      double uxx = (uE - 2 * uC + uW) / h2;
      double uyy = (uN - 2 * uC + uS) / h2;
      double cross;
      if (a12 >= 0) {
        double uNE = u[id + N + 1], uSW = u[id - N - 1];
        cross = (uNE + uSW + 2 * uC - uE - uW - uN - uS) / (2 * h2);
      } else {
        double uNW = u[id + N - 1], uSE = u[id - N + 1];
        cross = (uE + uW + uN + uS - 2 * uC - uNW - uSE) / (2 * h2);
      }
      double xi = a11 * uxx + a22 * uyy + 2 * a12 * cross;

      double rate;
      if (law.affine) {
        rate = pn * law.c1 * xi;
      } else {
        rate = pn * (law.f(nh, xi) - adv);
      }
      double center = pn * slope * (2 * (a11 + a22) - 2 * std::abs(a12)) / h2;

      if (adv != 0.0) {
        double dmx = (uC - uW) / h, dpx = (uE - uC) / h;
        double dmy = (uC - uS) / h, dpy = (uN - uC) / h;
        double gx, gy;
        if (adv > 0) {
          gx = std::max(dmx, 0.0) * std::max(dmx, 0.0) +
               std::min(dpx, 0.0) * std::min(dpx, 0.0);
          gy = std::max(dmy, 0.0) * std::max(dmy, 0.0) +
               std::min(dpy, 0.0) * std::min(dpy, 0.0);
        } else {
          gx = std::min(dmx, 0.0) * std::min(dmx, 0.0) +
               std::max(dpx, 0.0) * std::max(dpx, 0.0);
          gy = std::min(dmy, 0.0) * std::min(dmy, 0.0) +
               std::max(dpy, 0.0) * std::max(dpy, 0.0);
        }
        rate += adv * std::sqrt(gx + gy);
        center += 4 * std::abs(adv) / h;
      }

      r.sc_max = std::max(r.sc_max, center);
      if (commit) {
        un[id] = uC + dt * rate;
        r.sup_change = std::max(r.sup_change, std::abs(dt * rate));
      }
    }
  return r;
}

SweepResult sweep3(LevelSetState& s, const SmoothAnisotropy& Wm,
                   const GeometricF& F, double dt, bool commit) {
  const BoxGrid& g = s.g;
  const int N = g.N;
  const double h = g.h(), h2 = h * h;
  const SpeedLaw& law = F.law;
  const double slope = std::abs(law.lambda_slope);
  const bool masked = !s.active.empty();
  const double* u = s.u.data();
  const size_t sx = 1, sy = (size_t)N, sz = (size_t)N * N;
  SweepResult r;
  if (commit) s.scratch = s.u;
  double* un = commit ? s.scratch.data() : nullptr;

  double H[9];
  Vec p = Vec::zero(3), nh = Vec::zero(3);
  const size_t stride[3] = {sx, sy, sz};
  for (int l = 1; l < N - 1; ++l)
    for (int j = 1; j < N - 1; ++j)
      for (int i = 1; i < N - 1; ++i) {
        size_t id = g.idx(i, j, l);
        if (masked && !s.active[id]) continue;
        double uC = u[id];
        double d2[3], dp[3], dm[3];
        for (int d = 0; d < 3; ++d) {
          double up = u[id + stride[d]], um = u[id - stride[d]];
          p[d] = (up - um) / (2 * h);
          d2[d] = (up - 2 * uC + um) / h2;
          dp[d] = (up - uC) / h;
          dm[d] = (uC - um) / h;
        }
        double pn = p.norm();
        if (pn < 1e-12) continue;

        double adv;
        if (law.affine) {
          adv = law.c0;
        } else {
          nh = (-1.0 / pn) * p;
          adv = law.f(nh, 0.0);
        }

        Wm.hessian(p, H);
        double xi = H[0] * d2[0] + H[4] * d2[1] + H[8] * d2[2];
        double off_sum = 0.0;
        for (int d1 = 0; d1 < 3; ++d1)
          for (int d2i = d1 + 1; d2i < 3; ++d2i) {
            double a = H[3 * d1 + d2i];
            double cap = 0.5 * std::min(H[4 * d1], H[4 * d2i]);
            a = std::max(-cap, std::min(cap, a));
            size_t s1 = stride[d1], s2 = stride[d2i];
            double axed[4] = {u[id + s1], u[id - s1], u[id + s2], u[id - s2]};
            double cross;
            if (a >= 0) {
              cross = (u[id + s1 + s2] + u[id - s1 - s2] + 2 * uC - axed[0] -
                       axed[1] - axed[2] - axed[3]) /
                      (2 * h2);
            } else {
              cross = (axed[0] + axed[1] + axed[2] + axed[3] - 2 * uC -
                       u[id + s1 - s2] - u[id - s1 + s2]) /
                      (2 * h2);
            }
            xi += 2 * a * cross;
            off_sum += std::abs(a);
          }

        double rate;
        if (law.affine) {
          rate = pn * law.c1 * xi;
        } else {
          rate = pn * (law.f(nh, xi) - adv);
        }
        double center =
            pn * slope * (2 * (H[0] + H[4] + H[8]) - 2 * off_sum) / h2;

        if (adv != 0.0) {
          double gsq = 0.0;
          for (int d = 0; d < 3; ++d) {
            double a1, a2;
            if (adv > 0) {
              a1 = std::max(dm[d], 0.0);
              a2 = std::min(dp[d], 0.0);
            } else {
              a1 = std::min(dm[d], 0.0);
              a2 = std::max(dp[d], 0.0);
            }
            gsq += a1 * a1 + a2 * a2;
          }
          rate += adv * std::sqrt(gsq);
          center += 6 * std::abs(adv) / h;
        }

        r.sc_max = std::max(r.sc_max, center);
        if (commit) {
          un[id] = uC + dt * rate;
          r.sup_change = std::max(r.sup_change, std::abs(dt * rate));
        }
      }
  return r;
}

SweepResult sweep(LevelSetState& s, const SmoothAnisotropy& Wm,
                  const GeometricF& F, double dt, bool commit) {
  if (s.g.dim == 2) return sweep2(s, Wm, F, dt, commit);
  if (s.g.dim == 3) return sweep3(s, Wm, F, dt, commit);
  throw ConfigInvalid("level set grids must be 2- or 3-dimensional");
}

}  // namespace

double cfl_dt(const LevelSetState& s, const SmoothAnisotropy& Wm,
              const GeometricF& F) {
  SweepResult r = sweep(const_cast<LevelSetState&>(s), Wm, F, 0.0, false);
  return r.sc_max > 0 ? 0.4 / r.sc_max : 1e30;
}

StepInfo step(LevelSetState& s, const SmoothAnisotropy& Wm, const GeometricF& F,
              double dt) {
  if (!(dt > 0)) throw ConfigInvalid("step: dt must be positive");
  SweepResult r = sweep(s, Wm, F, dt, true);
  if (dt * r.sc_max > 0.4 * (1 + 1e-6))
    throw CFLViolation("step: dt exceeds the monotone stability bound");
  s.u.swap(s.scratch);
  s.t += dt;
  s.dt_hist.push_back(dt);
  return {dt, r.sc_max, r.sup_change};
}

namespace {

void line_crossings(const std::vector<Loop>& loops, int axis, double c,
                    std::vector<double>& out) {
  out.clear();
  for (const Loop& lp : loops) {
    size_t n = lp.pts.size();
    for (size_t i = 0; i < n; ++i) {
      const Vec& p = lp.pts[i];
      const Vec& q = lp.pts[(i + 1) % n];
      double fa = p[axis] - c, fb = q[axis] - c;
      if ((fa <= 0 && fb > 0) || (fa > 0 && fb <= 0)) {
        double t = fa / (fa - fb);
        out.push_back(p[1 - axis] + t * (q[1 - axis] - p[1 - axis]));
      }
    }
  }
}

Snapshot take_snapshot(const LevelSetState& s, bool keep) {
  Snapshot sn;
  sn.t = s.t;
  const BoxGrid& g = s.g;
  if (g.dim == 2) {
    sn.zero_set =
        contour_grid(s.u, g.N, g.N, g.point(0, 0), g.h(), g.h(), 0.0);
    Vec cen = Vec::zero(2);
    size_t np = 0;
    for (const Loop& lp : sn.zero_set)
      for (const Vec& p : lp.pts) {
        cen += p;
        ++np;
      }
    if (np) {
      cen = (1.0 / np) * cen;
      std::vector<double> xs;
      line_crossings(sn.zero_set, 1, cen[1], xs);
      if (xs.size() >= 2)
        sn.len_x = *std::max_element(xs.begin(), xs.end()) -
                   *std::min_element(xs.begin(), xs.end());
      line_crossings(sn.zero_set, 0, cen[0], xs);
      if (xs.size() >= 2)
        sn.len_y = *std::max_element(xs.begin(), xs.end()) -
                   *std::min_element(xs.begin(), xs.end());
    }
  }
  double cellv = std::pow(g.h(), g.dim);
  size_t pos = 0;
  for (double v : s.u) pos += v > 0;
  sn.volume = cellv * pos;
  if (keep) sn.u = s.u;
  return sn;
}

// Activates the nodes within `radius` of the current zero level (geometric
// band, so steep or flat relabelings of u get the same stencil support and a
// frozen far plateau can never block an approaching front). 3-d states fall
// back to a |u|-value band.
void remask(LevelSetState& s, double radius) {
  const BoxGrid& g = s.g;
  const int N = g.N;
  s.active.assign(s.u.size(), 0);
  if (g.dim == 2) {
    std::vector<char> seed(s.u.size(), 0);
    for (int j = 0; j < N - 1; ++j)
      for (int i = 0; i < N - 1; ++i) {
        size_t id = g.idx(i, j);
        bool a = s.u[id] > 0;
        if (a != (s.u[id + 1] > 0) || a != (s.u[id + N] > 0)) seed[id] = 1;
      }
    std::vector<double> d2 = edt_sq_2d(seed, N, N);
    double r = radius / g.h() + 1.5;
    for (int j = 1; j < N - 1; ++j)
      for (int i = 1; i < N - 1; ++i) {
        size_t id = g.idx(i, j);
        if (d2[id] <= r * r) s.active[id] = 1;
      }
    rebuild_lists2(s);
    return;
  }
  for (int l = 1; l < g.N - 1; ++l)
    for (int j = 1; j < g.N - 1; ++j)
      for (int i = 1; i < g.N - 1; ++i) {
        size_t id = g.idx(i, j, l);
        if (std::abs(s.u[id]) < radius) s.active[id] = 1;
      }
}

}  // namespace

Trajectory evolve_crystal(const Region2D& D0, const SpeedLaw& f,
                          const PolyhedralFn& W, int m, double T,
                          const EvolveOptions& opt) {
  if (W.dim != 2 && opt.kind != SmoothKind::Euclidean)
    throw ConfigInvalid("evolve_crystal runs on 2-d anisotropies");
  if (m < 1) throw ConfigInvalid("evolve_crystal: m must be >= 1");
  if (!(T > 0)) throw ConfigInvalid("evolve_crystal: T must be positive");
  BoxGrid g{2, opt.N, opt.boxL};
  const double h = g.h();

  if (!D0.is_empty()) {
    Vec lo, hi;
    D0.bbox(lo, hi);
    double reach = 0;
    for (int d = 0; d < 2; ++d)
      reach = std::max({reach, std::abs(lo[d]), std::abs(hi[d])});
    if (reach + 1.0 > opt.boxL / 2 - 2 * h)
      throw ConfigInvalid(
          "evolve_crystal: initial set too large for the domain box");
  }

  auto u0 = [&](const Vec& x) {
    if (D0.is_empty()) return -1.0;
    double sd = D0.sdist(x);
    double v = sd <= 0 ? -sd : -std::min(sd, 1.0);
    if (opt.u0_perturb) {
      double cutoff = std::clamp((v + 1.0) / 0.2, 0.0, 1.0);
      v += cutoff * opt.u0_perturb(x);
    }
    if (opt.u0_transform) v = opt.u0_transform(v);
    return v;
  };
  double far = opt.u0_transform ? opt.u0_transform(-1.0) : -1.0;
  LevelSetState s = make_state(g, u0, m, -far);

  SmoothAnisotropy Wm = opt.kind == SmoothKind::Euclidean
                            ? SmoothAnisotropy::euclidean(2, m)
                            : regularize(W, m, opt.kind);
  GeometricF F{f};

  std::vector<double> times = opt.times;
  if (times.empty()) {
    for (int j = opt.n_snapshots - 1; j >= 0; --j)
      times.push_back(T * std::pow(2.0, -j));
  }
  std::sort(times.begin(), times.end());

  double pmax = 0.0;
  for (int j = 0; j < g.N - 1; ++j)
    for (int i = 0; i < g.N - 1; ++i) {
      size_t id = g.idx(i, j);
      pmax = std::max({pmax, std::abs(s.u[id + 1] - s.u[id]) / h,
                       std::abs(s.u[id + g.N] - s.u[id]) / h});
    }
  // Under a crystalline W_m the far field is genuinely stationary (z is
  // constant along the distance-function ramps, so div z = 0 there), which is
  // what makes freezing it harmless. Under V = kappa every level set moves,
  // so the band would feed an O(1) error inward; run euclidean flows unbanded.
  const bool banded = opt.band && opt.kind != SmoothKind::Euclidean;
  double beta = opt.band_halfwidth > 0 ? opt.band_halfwidth : 16 * h;
  if (banded) remask(s, beta);

  Trajectory traj;
  traj.g = g;
  traj.m = m;
  traj.c = s.c;
  traj.snaps.push_back(take_snapshot(s, opt.keep_fields));

  // The monotone scheme never increases the Lipschitz constant, so a global
  // step size from the initial gradient bound and the stiffest admissible
  // face stiffness stays valid for the whole run. Adapting dt upward instead
  // would overshoot whenever a face is about to enter the sech^2 spike of
  // Hess W_m, so the quadratic-growth kind runs at this fixed dt.
  const bool fixed_dt = opt.kind != SmoothKind::Euclidean;
  double cfl;
  if (fixed_dt) {
    double Hmax = 0.0;
    if (Wm.separable) {
      for (int d = 0; d < 2; ++d)
        Hmax = std::max(Hmax, m * Wm.sep_scale[d] * Wm.sep_scale[d]);
      Hmax += 1.0 / m;
    } else {
      Hmax = Wm.a_m;
    }
    double slope = std::abs(f.lambda_slope);
    double c0b = f.affine ? std::abs(f.c0) : f.C_f;
    double sc0 = 1.05 * pmax * slope * (2 * Hmax + 4.0 / m) / (h * h) +
                 4.0 * c0b / h;
    cfl = 0.4 / sc0;
  } else {
    cfl = cfl_dt(s, Wm, F);
  }
  int since_mask = 0;
  double moved = 0.0;
  for (double target : times) {
    while (s.t < target - 1e-15) {
      double dt = std::min(fixed_dt ? cfl : 0.9 * cfl, target - s.t);
      StepInfo info;
      try {
        info = step(s, Wm, F, dt);
      } catch (const CFLViolation&) {
        cfl *= 0.5;
        continue;
      }
      if (!fixed_dt && info.max_center > 0) cfl = 0.4 / info.max_center;
      moved += info.sup_change;
      if (banded && (++since_mask >= 256 || moved > 2 * h)) {
        remask(s, beta);
        since_mask = 0;
        moved = 0.0;
      }
    }
    traj.snaps.push_back(take_snapshot(s, opt.keep_fields));
  }
  return traj;
}

namespace {

double dist_to_loops(const Vec& x, const std::vector<Loop>& B) {
  double best = kInf;
  for (const Loop& lp : B) {
    size_t n = lp.pts.size();
    for (size_t i = 0; i < n; ++i)
      best = std::min(best, segment_dist(x, lp.pts[i], lp.pts[(i + 1) % n]));
  }
  return best;
}

}  // namespace

double hausdorff_dist(const std::vector<Loop>& A, const std::vector<Loop>& B) {
  bool ea = A.empty() || (A.size() && A[0].pts.empty());
  bool eb = B.empty() || (B.size() && B[0].pts.empty());
  if (ea && eb) return 0.0;
  if (ea || eb) return kInf;
  double d = 0.0;
  for (const Loop& lp : A)
    for (const Vec& p : lp.pts) d = std::max(d, dist_to_loops(p, B));
  for (const Loop& lp : B)
    for (const Vec& p : lp.pts) d = std::max(d, dist_to_loops(p, A));
  return d;
}

Region2D make_shape(const std::string& spec, const PolyhedralFn& W) {
  size_t colon = spec.find(':');
  if (colon == std::string::npos)
    throw ConfigInvalid("shape must be kind:arg, got: " + spec);
  std::string kind = spec.substr(0, colon), arg = spec.substr(colon + 1);
  if (kind == "square") {
    double L = std::stod(arg);
    Vec lo = Vec::zero(2), hi = Vec::zero(2);
    lo[0] = lo[1] = -L / 2;
    hi[0] = hi[1] = L / 2;
    return Region2D::box(lo, hi);
  }
  if (kind == "disc") {
    double r = std::stod(arg);
    Loop lp;
    for (int i = 0; i < 256; ++i) {
      double th = 2 * M_PI * i / 256;
      Vec p = Vec::zero(2);
      p[0] = r * std::cos(th);
      p[1] = r * std::sin(th);
      lp.pts.push_back(p);
    }
    Region2D R;
    R.loops.push_back(lp);
    return R;
  }
  if (kind == "wulff") {
    double scale = std::stod(arg);
    Polytope K = wulff(W);
    if (K.dim != 2 || K.vertices.size() < 3)
      throw ConfigInvalid("wulff shape needs a 2-d anisotropy");
    Vec cen = Vec::zero(2);
    for (const Vec& v : K.vertices) cen += (1.0 / K.vertices.size()) * v;
    std::vector<Vec> vs = K.vertices;
    std::sort(vs.begin(), vs.end(), [&](const Vec& a, const Vec& b) {
      return std::atan2(a[1] - cen[1], a[0] - cen[0]) <
             std::atan2(b[1] - cen[1], b[0] - cen[0]);
    });
    Loop lp;
    for (const Vec& v : vs) lp.pts.push_back(scale * v);
    Region2D R;
    R.loops.push_back(lp);
    return R;
  }
  if (kind == "file") {
    Region2D R;
    R.loops = load_loops_csv(arg);
    for (Loop& lp : R.loops)
      if (lp.signed_area() < 0) lp.reverse();
    return R;
  }
  throw ConfigInvalid("unknown shape kind: " + kind);
}

std::vector<Vec> zero_points3(const BoxGrid& g, const std::vector<double>& u) {
  std::vector<Vec> out;
  if (g.dim != 3) throw ConfigInvalid("zero_points3 expects a 3-d grid");
  const size_t stride[3] = {1, (size_t)g.N, (size_t)g.N * g.N};
  for (int l = 0; l < g.N; ++l)
    for (int j = 0; j < g.N; ++j)
      for (int i = 0; i < g.N; ++i) {
        size_t id = g.idx(i, j, l);
        int ijk[3] = {i, j, l};
        for (int d = 0; d < 3; ++d) {
          if (ijk[d] + 1 >= g.N) continue;
          double a = u[id], b = u[id + stride[d]];
          if ((a <= 0 && b > 0) || (a > 0 && b <= 0)) {
            double t = a / (a - b);
            Vec x = g.point(i, j, l);
            x[d] += t * g.h();
            out.push_back(x);
          }
        }
      }
  return out;
}

double Barrier::polar(const Vec& x) const {
  double xn = x.norm();
  if (xn == 0) return 0.0;
  if (x.dim == 2) {
    const int nb = 720;
    double best = -kInf, bestth = 0;
    for (int i = 0; i < nb; ++i) {
      double th = 2 * M_PI * i / nb;
      Vec e = Vec::zero(2);
      e[0] = std::cos(th);
      e[1] = std::sin(th);
      double q = dot(x, e) / Wm.value(e);
      if (q > best) {
        best = q;
        bestth = th;
      }
    }
    double lo = bestth - 2 * M_PI / nb, hi = bestth + 2 * M_PI / nb;
    auto val = [&](double th) {
      Vec e = Vec::zero(2);
      e[0] = std::cos(th);
      e[1] = std::sin(th);
      return dot(x, e) / Wm.value(e);
    };
    for (int it = 0; it < 60; ++it) {
      double t1 = lo + (hi - lo) / 3, t2 = hi - (hi - lo) / 3;
      if (val(t1) < val(t2))
        lo = t1;
      else
        hi = t2;
    }
    return std::max(best, val(0.5 * (lo + hi)));
  }
  // 3-d: Fibonacci sphere plus a short local refinement
  const int nb = 4000;
  double best = -kInf;
  Vec beste = Vec::zero(3);
  const double ga = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < nb; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / nb;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double th = ga * i;
    Vec e = Vec::zero(3);
    e[0] = r * std::cos(th);
    e[1] = r * std::sin(th);
    e[2] = z;
    double q = dot(x, e) / Wm.value(e);
    if (q > best) {
      best = q;
      beste = e;
    }
  }
  double stepsz = 0.05;
  for (int it = 0; it < 200 && stepsz > 1e-9; ++it) {
    bool improved = false;
    for (int d = 0; d < 3; ++d)
      for (double sg : {-1.0, 1.0}) {
        Vec e = beste;
        e[d] += sg * stepsz;
        e = e.normalized();
        double q = dot(x, e) / Wm.value(e);
        if (q > best) {
          best = q;
          beste = e;
          improved = true;
        }
      }
    if (!improved) stepsz /= 2;
  }
  return best;
}

double Barrier::plus(const Vec& x, double t) const {
  return a * std::max(polar(x - x0) - b * t, 0.0);
}

double Barrier::minus(const Vec& x, double t) const {
  return -a * std::max(polar(x0 - x) - b * t, 0.0);
}

Barrier barrier(const PolyhedralFn& W, int m, double a, double b,
                const Vec& x0) {
  if (!(a > 0) || !(b > 0)) throw ConfigInvalid("barrier: a, b must be > 0");
  Barrier B;
  B.Wm = regularize(W, m, SmoothKind::OneHomogeneous);
  B.a = a;
  B.b = b;
  B.x0 = x0;
  return B;
}

bool ConvergenceReport::decreasing(double slack) const {
  auto ok = [&](const std::vector<double>& v) {
    for (size_t i = 0; i + 1 < v.size(); ++i)
      if (v[i + 1] > v[i] * (1 + slack)) return false;
    return true;
  };
  return ok(sup_diffs) && ok(zero_hausdorff);
}

ConvergenceReport convergence_from_runs(const std::vector<Trajectory>& tr,
                                        double window_frac) {
  ConvergenceReport rep;
  for (const Trajectory& t : tr) rep.m_values.push_back(t.m);
  if (tr.empty()) return rep;
  const BoxGrid& g = tr[0].g;
  double win = window_frac * g.L;
  for (size_t i = 0; i + 1 < tr.size(); ++i) {
    const std::vector<double>& ua = tr[i].final().u;
    const std::vector<double>& ub = tr[i + 1].final().u;
    double d = 0;
    if (!ua.empty() && ua.size() == ub.size())
      for (int j = 0; j < g.N; ++j)
        for (int ii = 0; ii < g.N; ++ii) {
          Vec x = g.point(ii, j);
          if (std::abs(x[0]) > win || std::abs(x[1]) > win) continue;
          d = std::max(d, std::abs(ua[g.idx(ii, j)] - ub[g.idx(ii, j)]));
        }
    rep.sup_diffs.push_back(d);
    rep.zero_hausdorff.push_back(
        hausdorff_dist(tr[i].final().zero_set, tr[i + 1].final().zero_set));
  }
  return rep;
}

ConvergenceReport convergence_study(const EvolveProblem& prob,
                                    const std::vector<int>& m_schedule,
                                    const std::vector<double>& eps_schedule,
                                    std::vector<Trajectory>* runs) {
  EvolveOptions opt = prob.opt;
  opt.keep_fields = true;

  std::vector<Trajectory> local;
  std::vector<Trajectory>& tr = runs ? *runs : local;
  tr.clear();
  for (int m : m_schedule)
    tr.push_back(evolve_crystal(prob.D0, prob.f, prob.W, m, prob.T, opt));

  ConvergenceReport rep = convergence_from_runs(tr, 0.35);

  if (!eps_schedule.empty() && !m_schedule.empty()) {
    int m = m_schedule.back();
    const Trajectory& base = tr.back();
    for (double eps : eps_schedule) {
      EvolveOptions o2 = opt;
      o2.u0_perturb = [eps](const Vec& x) {
        return eps * std::exp(-x.norm2() / 0.32);
      };
      Trajectory p = evolve_crystal(prob.D0, prob.f, prob.W, m, prob.T, o2);
      rep.eps_values.push_back(eps);
      rep.eps_hausdorff.push_back(
          hausdorff_dist(p.final().zero_set, base.final().zero_set));
    }
  }
  return rep;
}

InvarianceReport invariance_check(const EvolveProblem& prob, int m,
                                  const std::function<double(double)>& theta) {
  if (std::abs(theta(0.0)) > 1e-12)
    throw ConfigInvalid("invariance_check: theta(0) must be 0");
  EvolveOptions opt = prob.opt;
  opt.keep_fields = false;
  Trajectory base = evolve_crystal(prob.D0, prob.f, prob.W, m, prob.T, opt);
  EvolveOptions o2 = opt;
  o2.u0_transform = theta;
  Trajectory rel = evolve_crystal(prob.D0, prob.f, prob.W, m, prob.T, o2);

  InvarianceReport rep;
  rep.bound = 2 * base.g.h();
  for (size_t i = 0; i < base.snaps.size() && i < rel.snaps.size(); ++i) {
    rep.times.push_back(base.snaps[i].t);
    double d = hausdorff_dist(base.snaps[i].zero_set, rel.snaps[i].zero_set);
    rep.dists.push_back(d);
    if (!(d <= rep.bound + 1e-12)) rep.pass = false;
  }
  return rep;
}

double StratifiedTestFn::eval(const Stratum& S, const Vec& x, double t) const {
  Vec d = x - xhat;
  double val = dot(phat, x);
  if (S.k > 0 && !psi_bar.v.empty()) val += psi_bar.eval(S.to_V(d));
  if (fpart) val += fpart(S.to_U(d));
  if (g) val += g(t);
  return val;
}

namespace {

double interp_field(const BoxGrid& g, const std::vector<double>& u,
                    const Vec& x) {
  double h = g.h();
  double fx = std::clamp((x[0] + g.L / 2) / h, 0.0, g.N - 1.000001);
  double fy = std::clamp((x[1] + g.L / 2) / h, 0.0, g.N - 1.000001);
  int i0 = (int)fx, j0 = (int)fy;
  double ax = fx - i0, ay = fy - j0;
  double v00 = u[g.idx(i0, j0)], v10 = u[g.idx(i0 + 1, j0)];
  double v01 = u[g.idx(i0, j0 + 1)], v11 = u[g.idx(i0 + 1, j0 + 1)];
  return (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 +
         (1 - ax) * ay * v01 + ax * ay * v11;
}

}  // namespace

TestVerdict faceted_test_check(const Trajectory& traj,
                               const StratifiedTestFn& test, const GeometricF& F,
                               const PolyhedralFn& W, double rho,
                               double tol_gp) {
  if (traj.g.dim != 2)
    throw ConfigInvalid("faceted_test_check samples 2-d trajectories");
  if (traj.snaps.empty() || traj.snaps[0].u.empty())
    throw ConfigInvalid("faceted_test_check needs stored fields");

  auto [Wsl, S] = sliced(W, test.phat);
  TestVerdict V;
  V.k = S.k;
  const double h = traj.g.h();
  if (rho <= 0) rho = 4 * h;
  if (tol_gp < 0) tol_gp = 3 * h * (1 + test.phat.norm());
  const double sgn = test.subsolution ? 1.0 : -1.0;

  std::vector<double> times;
  for (const Snapshot& sn : traj.snaps) times.push_back(sn.t);
  if (test.that < times.front() - 1e-9 || test.that > times.back() + 1e-9)
    throw ConfigInvalid("faceted_test_check: t-hat outside the trajectory");

  auto u_at = [&](const Vec& x, double t) {
    t = std::clamp(t, times.front(), times.back());
    size_t hi = 0;
    while (hi + 1 < times.size() && times[hi] < t) ++hi;
    size_t lo = hi > 0 ? hi - 1 : 0;
    double va = interp_field(traj.g, traj.snaps[lo].u, x);
    if (lo == hi || times[hi] <= times[lo]) return va;
    double vb = interp_field(traj.g, traj.snaps[hi].u, x);
    double w = (t - times[lo]) / (times[hi] - times[lo]);
    return (1 - w) * va + w * vb;
  };

  double base = u_at(test.xhat, test.that) - test.eval(S, test.xhat, test.that);
  double gap = kInf;

  std::vector<double> tsamp{test.that};
  for (double t : times)
    if (std::abs(t - test.that) <= rho) tsamp.push_back(t);
  tsamp.push_back(std::clamp(test.that - rho, times.front(), times.back()));
  tsamp.push_back(std::clamp(test.that + rho, times.front(), times.back()));

  if (S.k == 0) {
    const int ns = 11;
    for (double t : tsamp)
      for (int j = -ns; j <= ns; ++j)
        for (int i = -ns; i <= ns; ++i) {
          Vec x = test.xhat;
          x[0] += rho * i / ns;
          x[1] += rho * j / ns;
          if (dist(x, test.xhat) > rho + 1e-12) continue;
          gap = std::min(gap, sgn * (base - (u_at(x, t) - test.eval(S, x, t))));
        }
  } else {
    const int k = S.k;
    auto on_facet = [&](const Vec& xv) {
      bool inp = k == 1 ? test.pair.plus1.contains(xv.c[0])
                        : test.pair.plus2.sdist(xv) < 0;
      bool inm = k == 1 ? test.pair.minus1.contains(xv.c[0])
                        : test.pair.minus2.sdist(xv) < 0;
      return !inp && !inm;
    };
    // facet point list on the support-sample window (relative coordinates)
    std::vector<Vec> facet_pts;
    int nyb = k == 1 ? 1 : test.psi_bar.ny;
    for (int j = 0; j < nyb; ++j)
      for (int i = 0; i < test.psi_bar.nx; ++i) {
        Vec xv = test.psi_bar.point(i, j);
        if (on_facet(xv)) facet_pts.push_back(xv);
      }
    if (facet_pts.empty())
      throw DegenerateInput("faceted_test_check: facet not sampled");
    auto facet_dist = [&](const Vec& xv) {
      if (on_facet(xv)) return 0.0;
      double best = kInf;
      for (const Vec& f : facet_pts) best = std::min(best, dist(xv, f));
      return best;
    };

    std::vector<Vec> xv_samples;
    int stride = std::max(1, test.psi_bar.nx / 33);
    for (int j = 0; j < nyb; j += (k == 1 ? 1 : stride))
      for (int i = 0; i < test.psi_bar.nx; i += stride) {
        Vec xv = test.psi_bar.point(i, j);
        if (facet_dist(xv) <= rho) xv_samples.push_back(xv);
      }

    std::vector<Vec> w_samples;
    if (k == 1) {
      for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
        Vec w = Vec::zero(1);
        w.c[0] = c * rho;
        w_samples.push_back(w);
      }
    } else {
      w_samples.push_back(Vec::zero(2));
      for (int i = 0; i < 6; ++i)
        for (double r : {0.5, 1.0}) {
          Vec w = Vec::zero(2);
          w.c[0] = r * rho * std::cos(M_PI * i / 3.0);
          w.c[1] = r * rho * std::sin(M_PI * i / 3.0);
          w_samples.push_back(w);
        }
    }

    int nu = W.dim - k;
    std::vector<Vec> xu_samples;
    {
      std::vector<double> off{-rho, -rho / 2, 0.0, rho / 2, rho};
      if (nu == 0) {
        xu_samples.push_back(Vec::zero(0));
      } else if (nu == 1) {
        for (double o : off) {
          Vec v = Vec::zero(1);
          v.c[0] = o;
          xu_samples.push_back(v);
        }
      } else {
        for (double o1 : off)
          for (double o2 : off) {
            Vec v = Vec::zero(2);
            v.c[0] = o1;
            v.c[1] = o2;
            xu_samples.push_back(v);
          }
      }
    }

    for (const Vec& xv : xv_samples)
      for (const Vec& xu : xu_samples) {
        Vec x = test.xhat + S.from_VU(xv, xu);
        for (const Vec& w : w_samples) {
          Vec xw = x + S.from_VU(w, Vec::zero(nu));
          for (double t : tsamp) {
            double lhs = u_at(xw, t) - test.eval(S, x, t);
            gap = std::min(gap, sgn * (base - lhs));
          }
        }
      }
  }

  V.gp_gap = gap;
  if (gap < -tol_gp)
    throw NotInPosition("faceted_test_check: contact condition fails");

  double phi_t = 0.0;
  if (test.g) {
    double et = 1e-6 * (1 + std::abs(test.that));
    phi_t = (test.g(test.that + et) - test.g(test.that - et)) / (2 * et);
  }

  double val;
  if (S.k == 0) {
    val = phi_t + F(test.phat, 0.0);
  } else {
    Vec bc = Vec::zero(S.k);
    LambdaResult L =
        lambda_p(W, test.phat, test.psi_bar, test.pair, 0, &bc,
                 test.delta > 0 ? test.delta : -1.0);
    V.lambda_lo = -L.ess_sup;
    V.lambda_hi = -L.ess_inf;
    val = phi_t + F(test.phat, test.subsolution ? V.lambda_lo : V.lambda_hi);
  }
  V.margin = test.subsolution ? -val : val;
  V.pass = V.margin >= -1e-12 * (1 + std::abs(phi_t));
  return V;
}

}  // namespace cf
