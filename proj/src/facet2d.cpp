#include "crystalflow/facet2d.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "crystalflow/errors.hpp"

namespace cf {

namespace {

constexpr double kDeg = M_PI / 180.0;

std::vector<Vec> resample_closed(const std::vector<Vec>& pts, int n) {
  std::vector<double> s(pts.size() + 1, 0.0);
  for (size_t i = 0; i < pts.size(); ++i)
    s[i + 1] = s[i] + dist(pts[i], pts[(i + 1) % pts.size()]);
  double len = s.back();
  std::vector<Vec> out;
  out.reserve(n);
  size_t j = 0;
  for (int i = 0; i < n; ++i) {
    double target = len * i / n;
    while (j + 1 < s.size() && s[j + 1] < target) ++j;
    double seg = s[j + 1] - s[j];
    double u = seg > 0 ? (target - s[j]) / seg : 0.0;
    const Vec& a = pts[j % pts.size()];
    const Vec& b = pts[(j + 1) % pts.size()];
    out.push_back(a + (b - a) * u);
  }
  return out;
}

double loop_min_dist(const BoundaryCurve::Loop& A, const BoundaryCurve::Loop& B) {
  double d = kInf;
  size_t na = A.pts.size(), nb = B.pts.size();
  for (size_t i = 0; i < na; ++i) {
    const Vec& p = A.pts[i];
    for (size_t j = 0; j < nb; ++j)
      d = std::min(d, segment_dist(p, B.pts[j], B.pts[(j + 1) % nb]));
  }
  return d;
}

std::vector<Vec> critical_dirs(const PolyhedralFn& W) {
  std::vector<Vec> dirs;
  for (const Stratum& S : strata(W)) {
    if (S.k != 1) continue;
    Vec r = S.representative.normalized();
    if (r.norm() > 0.5) dirs.push_back(r);
  }
  return dirs;
}

// polyline distance between two curves (inf if either empty)
double curve_gap(const BoundaryCurve& A, const BoundaryCurve& B) {
  double d = kInf;
  for (const auto& la : A.loops)
    for (const auto& lb : B.loops) d = std::min(d, loop_min_dist(la, lb));
  return d;
}

Region2D region_from(const BoundaryCurve& C, bool complemented) {
  Region2D R;
  R.complemented = complemented;
  for (const auto& l : C.loops) R.loops.push_back(Loop{l.pts});
  return R;
}

}  // namespace

void BoundaryCurve::compute_frames() {
  for (auto& l : loops) {
    size_t n = l.pts.size();
    l.nu.assign(n, Vec(0.0, 0.0));
    l.kappa.assign(n, 0.0);
    l.s.assign(n, 0.0);
    if (l.mark.size() != n) l.mark.assign(n, -1);
    for (size_t i = 1; i < n; ++i)
      l.s[i] = l.s[i - 1] + cf::dist(l.pts[i - 1], l.pts[i]);
    l.length = l.s[n - 1] + cf::dist(l.pts[n - 1], l.pts[0]);
    std::vector<double> theta(n);
    for (size_t i = 0; i < n; ++i) {
      Vec t = l.pts[(i + 1) % n] - l.pts[(i + n - 1) % n];
      t = t.normalized(1e-300);
      theta[i] = std::atan2(t[1], t[0]);
      Vec left = t.perp();
      l.nu[i] = nu_is_left ? left : -left;
    }
    auto ds = [&](size_t a, size_t b) {  // arclength from a forward to b
      double d = l.s[b] - l.s[a];
      return d >= 0 ? d : d + l.length;
    };
    for (size_t i = 0; i < n; ++i) {
      size_t im = (i + n - 2) % n, ip = (i + 2) % n;
      double dth = theta[ip] - theta[im];
      while (dth > M_PI) dth -= 2 * M_PI;
      while (dth < -M_PI) dth += 2 * M_PI;
      double dss = ds(im, ip);
      l.kappa[i] = dss > 0 ? dth / dss : 0.0;
    }
  }
}

double BoundaryCurve::diameter() const {
  Vec lo(kInf, kInf), hi(-kInf, -kInf);
  for (const auto& l : loops)
    for (const Vec& p : l.pts) {
      lo.c[0] = std::min(lo[0], p[0]);
      lo.c[1] = std::min(lo[1], p[1]);
      hi.c[0] = std::max(hi[0], p[0]);
      hi.c[1] = std::max(hi[1], p[1]);
    }
  return loops.empty() ? 0.0 : cf::dist(lo, hi);
}

double BoundaryCurve::dist(const Vec& x) const {
  double d = kInf;
  for (const auto& l : loops) {
    size_t n = l.pts.size();
    for (size_t i = 0; i < n; ++i)
      d = std::min(d, segment_dist(x, l.pts[i], l.pts[(i + 1) % n]));
  }
  return d;
}

SmoothPair2D smooth_pair_approx(const FacetPair& A, double rho, double h_work,
                                double level_shift) {
  if (A.dim != 2) throw ConfigInvalid("smooth_pair_approx: 2D pairs only");
  if (rho <= 0) throw ConfigInvalid("smooth_pair_approx: rho must be positive");
  if (h_work <= 0) h_work = rho / 32.0;
  if (rho < 4.0 * h_work)
    throw ResolutionTooCoarse("smooth_pair_approx: rho < 4h");

  // work window: pair bbox padded by the outermost level + mollifier tail
  Vec lo(kInf, kInf), hi(-kInf, -kInf);
  auto grow = [&](const Region2D& R) {
    if (R.loops.empty()) return;
    Vec l, h;
    R.bbox(l, h);
    lo.c[0] = std::min(lo[0], l[0]);
    lo.c[1] = std::min(lo[1], l[1]);
    hi.c[0] = std::max(hi[0], h[0]);
    hi.c[1] = std::max(hi[1], h[1]);
  };
  grow(A.minus2);
  grow(A.plus2);
  if (!(lo[0] < hi[0]))
    throw DegenerateInput("smooth_pair_approx: pair has no boundary");
  double pad = std::abs(level_shift) + 2.0 * rho;
  lo = lo - Vec(pad, pad);
  hi = hi + Vec(pad, pad);
  int nx = (int)std::ceil((hi[0] - lo[0]) / h_work) + 1;
  int ny = (int)std::ceil((hi[1] - lo[1]) / h_work) + 1;

  const double sigma = rho / 16.0;
  const int R = (int)std::ceil(4.0 * sigma / h_work);
  std::vector<double> kernel(2 * R + 1);
  double ksum = 0;
  for (int i = -R; i <= R; ++i)
    ksum += kernel[i + R] = std::exp(-0.5 * (i * h_work) * (i * h_work) / (sigma * sigma));
  for (double& w : kernel) w /= ksum;

  auto mollify_levelset = [&](const Region2D& reg, double level, bool minus_side)
      -> std::pair<BoundaryCurve, Region2D> {
    std::vector<double> f((size_t)nx * ny), tmp(f.size());
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        f[(size_t)j * nx + i] = reg.sdist(Vec(lo[0] + i * h_work, lo[1] + j * h_work));
    // separable convolution, clamped at the window edge
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double s = 0;
        for (int t = -R; t <= R; ++t)
          s += kernel[t + R] * f[(size_t)j * nx + std::clamp(i + t, 0, nx - 1)];
        tmp[(size_t)j * nx + i] = s;
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double s = 0;
        for (int t = -R; t <= R; ++t)
          s += kernel[t + R] * tmp[(size_t)std::clamp(j + t, 0, ny - 1) * nx + i];
        f[(size_t)j * nx + i] = s;
      }
    std::vector<Loop> raw = contour_grid(f, nx, ny, lo, h_work, h_work, level);
    BoundaryCurve C;
    C.nu_is_left = !minus_side;
    for (auto& lp : raw) {
      if (lp.length() < 8 * h_work) continue;  // contour noise
      BoundaryCurve::Loop bl;
      int nv = std::max(512, (int)std::ceil(lp.length() / (2 * h_work)));
      bl.pts = resample_closed(lp.pts, nv);
      C.loops.push_back(std::move(bl));
    }
    C.compute_frames();
    Region2D H;
    H.complemented = f[0] < level;  // far corner membership
    for (const auto& bl : C.loops) H.loops.push_back(Loop{bl.pts});
    return {C, H};
  };

  SmoothPair2D out;
  out.rho = rho;
  Region2D Hm, Hp;
  const double lev = level_shift + 5.0 * rho / 8.0;
  if (!A.plus2.is_empty()) {
    auto [c, r] = mollify_levelset(A.plus2, lev, false);
    out.plus = c;
    Hp = r;
  }
  if (!A.minus2.is_empty()) {
    auto [c, r] = mollify_levelset(A.minus2, -lev, true);
    out.minus = c;
    Hm = r;
  }

  // per-sample sandwich: U^{shift+rho/2}(A) <= H <= U^{shift+3rho/4}(A)
  double slop = 2.0 * h_work;
  double lo_lev = level_shift + rho / 2.0, hi_lev = level_shift + 3.0 * rho / 4.0;
  for (int j = 0; j < ny; j += 3)
    for (int i = 0; i < nx; i += 3) {
      Vec x(lo[0] + i * h_work, lo[1] + j * h_work);
      if (!A.plus2.is_empty()) {
        double sd = A.plus2.sdist(x);
        bool in = Hp.inside(x);
        if (sd < lo_lev - slop && !in)
          throw DegenerateInput("smooth_pair_approx: plus lower bound violated");
        if (in && !(sd < hi_lev + slop))
          throw DegenerateInput("smooth_pair_approx: plus upper bound violated");
      }
      if (!A.minus2.is_empty()) {
        double sd = A.minus2.sdist(x);
        bool in = Hm.inside(x);
        if (sd < -hi_lev - slop && !in)
          throw DegenerateInput("smooth_pair_approx: minus lower bound violated");
        if (in && !(sd < -lo_lev + slop))
          throw DegenerateInput("smooth_pair_approx: minus upper bound violated");
      }
    }
  if (!out.minus.empty() && !out.plus.empty() &&
      curve_gap(out.minus, out.plus) <= 0)
    throw DegenerateInput("smooth_pair_approx: sides touch");

  out.pair = FacetPair::make2d(Hm, Hp);
  return out;
}

double critical_rotation(const BoundaryCurve& H, const PolyhedralFn& W) {
  std::vector<Vec> dirs = critical_dirs(W);
  if (dirs.empty()) return 0.0;
  double diam = H.diameter();
  double kappa_min = 0.05 / (diam > 0 ? diam : 1.0);
  const double tau_ang = 2.0 * kDeg;

  auto ok = [&](double phi) {
    double cs = std::cos(phi), sn = std::sin(phi);
    for (const auto& l : H.loops)
      for (size_t i = 0; i < l.pts.size(); ++i) {
        Vec nu(cs * l.nu[i][0] - sn * l.nu[i][1],
               sn * l.nu[i][0] + cs * l.nu[i][1]);
        for (const Vec& d : dirs) {
          double ang = std::atan2(std::abs(cross2(nu, d)), dot(nu, d));
          if (std::abs(ang) <= tau_ang && std::abs(l.kappa[i]) < kappa_min)
            return false;
        }
      }
    return true;
  };

  if (ok(0.0)) return 0.0;
  for (int k = 1; k <= 20; ++k) {
    double phi = 0.5 * k * kDeg;
    if (ok(phi)) return phi;
    if (ok(-phi)) return -phi;
  }
  throw SearchExhausted("critical_rotation: no angle up to 10 degrees works");
}

BoundaryCurve flatten(const BoundaryCurve& V, const PolyhedralFn& W,
                      double eta_cap) {
  std::vector<Vec> dirs = critical_dirs(W);
  BoundaryCurve out = V;
  if (dirs.empty() || V.empty()) return out;
  double diam = V.diameter();
  double kappa_min = 0.05 / (diam > 0 ? diam : 1.0);

  struct Crossing {
    size_t loop, seg;  // between vertices seg, seg+1
    double u;
    Vec xhat, nhat;
  };
  std::vector<Crossing> crossings;
  for (size_t li = 0; li < V.loops.size(); ++li) {
    const auto& l = V.loops[li];
    size_t n = l.pts.size();
    for (size_t i = 0; i < n; ++i) {
      size_t ip = (i + 1) % n;
      for (const Vec& d : dirs) {
        if (dot(l.nu[i], d) < 0.9) continue;
        double c0 = cross2(l.nu[i], d), c1 = cross2(l.nu[ip], d);
        if (c0 == 0 && c1 == 0) continue;
        if ((c0 > 0) == (c1 > 0)) continue;
        double u = c0 / (c0 - c1);
        Crossing cr;
        cr.loop = li;
        cr.seg = i;
        cr.u = u;
        cr.xhat = l.pts[i] + (l.pts[ip] - l.pts[i]) * u;
        cr.nhat = d;
        if (std::abs(l.kappa[i]) < 0.5 * kappa_min &&
            std::abs(l.kappa[ip]) < 0.5 * kappa_min)
          throw CriticalCurvatureZero(
              "flatten: zero curvature at a critical normal");
        crossings.push_back(cr);
      }
    }
  }
  if (crossings.empty()) return out;

  double d_min = kInf;
  for (size_t a = 0; a < crossings.size(); ++a)
    for (size_t b = a + 1; b < crossings.size(); ++b)
      d_min = std::min(d_min, dist(crossings[a].xhat, crossings[b].xhat));
  double eta = 0.9 * std::min(eta_cap, d_min / 20.0);
  if (!(eta > 0)) throw DegenerateInput("flatten: critical points collide");

  int next_mark = 0;
  for (const Crossing& cr : crossings) {
    auto& l = out.loops[cr.loop];
    size_t n = l.pts.size();
    // window of vertices within 10*eta arclength of the crossing
    std::vector<size_t> win;
    for (size_t off = 0;; ++off) {
      size_t i = (cr.seg + n - off) % n;
      if (dist(l.pts[i], cr.xhat) > 10 * eta || off > n / 2) break;
      win.insert(win.begin(), i);
    }
    for (size_t off = 1;; ++off) {
      size_t i = (cr.seg + off) % n;
      if (dist(l.pts[i], cr.xhat) > 10 * eta || off > n / 2) break;
      win.push_back(i);
    }
    if (win.empty()) continue;
    auto depth = [&](const Vec& p) { return -dot(p - cr.xhat, cr.nhat); };
    // largest L <= eta/2 such that all window points shallower than L stay
    // within the eta-ball of the crossing
    double good = 0, bad = eta / 2;
    auto pass = [&](double L) {
      for (size_t i : win)
        if (depth(l.pts[i]) < L && dist(l.pts[i], cr.xhat) > eta) return false;
      return true;
    };
    if (pass(bad)) {
      good = bad;
    } else {
      for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (good + bad);
        (pass(mid) ? good : bad) = mid;
      }
    }
    double L = good;
    if (!(L > 0)) continue;

    // project the cap onto the plane depth = L and insert exact endpoints
    std::vector<size_t> cap;
    for (size_t i : win)
      if (depth(l.pts[i]) < L) cap.push_back(i);
    if (cap.empty()) continue;
    for (size_t i : cap) {
      l.pts[i] = l.pts[i] - cr.nhat * (L - depth(l.pts[i]));
      l.mark[i] = next_mark;
    }
    auto insert_crossing = [&](size_t a, size_t b, bool after_cap) {
      double da = depth(l.pts[a]), db = depth(l.pts[b]);
      if ((da < L) == (db < L)) return;
      double u = (L - da) / (db - da);
      Vec xc = l.pts[a] + (l.pts[b] - l.pts[a]) * u;
      size_t pos = (a + 1) % l.pts.size();
      l.pts.insert(l.pts.begin() + pos, xc);
      l.mark.insert(l.mark.begin() + pos, next_mark);
      (void)after_cap;
    };
    // boundary segments of the cap (work on indices afresh: find runs)
    size_t first = cap.front(), last = cap.back();
    insert_crossing((first + n - 1) % n, first, false);
    // n changed if inserted before `last`
    n = l.pts.size();
    size_t last2 = l.mark[ (last + 1) % n ] == next_mark ? (last + 1) % n : last;
    insert_crossing(last2, (last2 + 1) % n, true);
    ++next_mark;
  }
  out.compute_frames();
  // compute_frames resets marks only if sizes mismatch; they match here
  return out;
}

bool PatchDecomposition::eval(const Vec& x, double* psi, Vec* z,
                              Vec* grad) const {
  for (const Patch& P : patches) {
    if (x[0] < P.blo[0] || x[0] > P.bhi[0] || x[1] < P.blo[1] ||
        x[1] > P.bhi[1])
      continue;
    if (P.flat) {
      double det = cross2(P.v, P.w);
      Vec r = x - P.cG;
      double xi_v = cross2(r, P.w) / det;
      double xi_w = cross2(P.v, r) / det;
      if (xi_v * xi_w <= 0) continue;
      double t = xi_v + xi_w - P.alpha;
      if (std::abs(t) > mu) continue;
      *psi = t;
      double wv = P.nu0.dot(P.v);  // = W(nu0) for both v and w
      *grad = P.nu0 * (1.0 / wv);
      *z = (P.v * xi_v + P.w * xi_w) * (1.0 / (xi_v + xi_w));
      return true;
    }
    size_t ns = P.pts.size() - 1;
    double best_t = kInf;
    Vec best_nu;
    for (size_t i = 0; i < ns; ++i) {
      Vec d = P.pts[i + 1] - P.pts[i];
      double det = cross2(P.v, d);
      if (std::abs(det) < 1e-300) continue;
      Vec r = x - P.pts[i];
      double t = cross2(r, d) / det;
      double u = cross2(P.v, r) / det;
      if (u < -1e-9 || u > 1.0 + 1e-9) continue;
      if (std::abs(t) < std::abs(best_t)) {
        best_t = t;
        Vec left = d.normalized().perp();
        best_nu = dot(left, P.nu0) >= 0 ? left : -left;
      }
    }
    if (std::abs(best_t) > mu) continue;
    *psi = best_t;
    *z = P.v;
    *grad = best_nu * (1.0 / dot(P.v, best_nu));
    return true;
  }
  return false;
}

PatchDecomposition build_patches(const BoundaryCurve& Vhat,
                                 const PolyhedralFn& W) {
  PatchDecomposition D;
  D.mu = D.delta_theta = D.delta_mu = D.delta_s = D.delta = kInf;
  if (Vhat.empty()) return D;

  std::vector<Halfspace> hs;
  for (const Vec& a : W.a) hs.push_back({a, 1.0});
  D.K = polytope_from_halfplanes_2d(hs, kTauGeom).circumradius();
  double maxv = 0;
  for (const Vec& a : W.a) maxv = std::max(maxv, a.norm());

  struct Comp {  // component before conversion to Patch
    bool flat;
    std::vector<Vec> pts;
    Vec nu_mid;
    int prev = -1, next = -1;  // adjacency (same loop)
  };
  std::vector<Comp> comps;

  for (const auto& l : Vhat.loops) {
    size_t n = l.pts.size();
    // flat runs by mark id (wrapping)
    std::vector<std::pair<size_t, size_t>> runs;  // [first, last] inclusive
    size_t start = 0;
    while (start < n && l.mark[start] >= 0 &&
           l.mark[(start + n - 1) % n] == l.mark[start])
      ++start;  // avoid starting inside a wrapped run
    if (start == n) start = 0;
    for (size_t k = 0; k < n; ++k) {
      size_t i = (start + k) % n;
      if (l.mark[i] < 0) continue;
      size_t j = i;
      size_t len = 1;
      while (len < n && l.mark[(j + 1) % n] == l.mark[i]) {
        j = (j + 1) % n;
        ++len;
      }
      runs.push_back({i, j});
      k += len - 1;
    }
    int base = (int)comps.size();
    if (runs.empty()) {
      Comp c;
      c.flat = false;
      c.pts = l.pts;
      c.pts.push_back(l.pts[0]);
      c.nu_mid = l.nu[0];
      comps.push_back(std::move(c));
      continue;
    }
    int m = (int)runs.size();
    for (int r = 0; r < m; ++r) {
      // flat r
      Comp f;
      f.flat = true;
      for (size_t i = runs[r].first;; i = (i + 1) % n) {
        f.pts.push_back(l.pts[i]);
        if (i == runs[r].second) break;
      }
      comps.push_back(std::move(f));
      // arc from end of run r to start of run r+1
      Comp a;
      a.flat = false;
      size_t i0 = runs[r].second, i1 = runs[(r + 1) % m].first;
      for (size_t i = i0;; i = (i + 1) % n) {
        a.pts.push_back(l.pts[i]);
        if (i == i1) break;
      }
      size_t mid = a.pts.size() / 2;
      Vec t = a.pts[std::min(mid + 1, a.pts.size() - 1)] - a.pts[mid > 0 ? mid - 1 : 0];
      Vec left = t.normalized().perp();
      a.nu_mid = Vhat.nu_is_left ? left : -left;
      comps.push_back(std::move(a));
    }
    // adjacency: flat 2r, arc 2r+1 alternate around the loop
    for (int r = 0; r < m; ++r) {
      comps[base + 2 * r].prev = base + (2 * r + 2 * m - 1) % (2 * m);
      comps[base + 2 * r].next = base + 2 * r + 1;
      comps[base + 2 * r + 1].prev = base + 2 * r;
      comps[base + 2 * r + 1].next = base + (2 * r + 2) % (2 * m);
    }
  }

  // Wulff vertex of each arc from its mid normal
  std::vector<Vec> arc_vertex(comps.size());
  for (size_t i = 0; i < comps.size(); ++i) {
    if (comps[i].flat) continue;
    std::vector<int> act = W.active_set(comps[i].nu_mid);
    arc_vertex[i] = W.a[act[0]];
  }

  for (size_t ci = 0; ci < comps.size(); ++ci) {
    Comp& c = comps[ci];
    Patch P;
    P.flat = c.flat;
    P.pts = c.pts;
    if (c.flat) {
      Vec d = c.pts.back() - c.pts.front();
      Vec left = d.normalized().perp();
      P.nu0 = Vhat.nu_is_left ? left : -left;
      std::vector<int> act = W.active_set(P.nu0, 1e-7 * (1 + maxv));
      if (act.size() < 2)
        throw DegenerateInput("build_patches: flat normal not critical");
      if (c.prev < 0 || c.next < 0)
        throw DegenerateInput("build_patches: dangling flat segment");
      P.v = arc_vertex[c.prev];
      P.w = arc_vertex[c.next];
      bool have_v = false, have_w = false;
      for (int ai : act) {
        if (dist(W.a[ai], P.v) < 1e-9) have_v = true;
        if (dist(W.a[ai], P.w) < 1e-9) have_w = true;
      }
      if (!have_v || !have_w || dist(P.v, P.w) < 1e-12)
        throw DegenerateInput("build_patches: flat/arc vertex mismatch");
      P.xv = c.pts.front();
      P.xw = c.pts.back();
      // c + t v = xv, c + s w = xw  =>  -t v + s w = xw - xv, and t = s = alpha
      Vec r = P.xw - P.xv;
      double det = cross2(P.v * -1.0, P.w);
      double t = cross2(r, P.w) / det;
      double s = cross2(P.v * -1.0, r) / det;
      if (std::abs(t - s) > 1e-6 * (1 + std::abs(t)))
        throw DegenerateInput("build_patches: corner coordinates inconsistent");
      P.alpha = t;
      P.cG = P.xv - P.v * t;
    } else {
      P.v = arc_vertex[ci];
      P.nu0 = c.nu_mid;
    }
    D.patches.push_back(std::move(P));
  }

  // mu_1: distances between non-adjacent components
  double min_gap = kInf;
  for (size_t i = 0; i < comps.size(); ++i)
    for (size_t j = i + 1; j < comps.size(); ++j) {
      if (comps[i].next == (int)j || comps[i].prev == (int)j) continue;
      double d = kInf;
      for (const Vec& p : comps[i].pts)
        for (size_t k = 0; k + 1 < comps[j].pts.size(); ++k)
          d = std::min(d, segment_dist(p, comps[j].pts[k], comps[j].pts[k + 1]));
      if (d > 1e-12) min_gap = std::min(min_gap, d);
    }
  double mu1 = min_gap / (3.0 * maxv);
  double mu2 = kInf;
  for (const Patch& P : D.patches)
    if (P.flat) mu2 = std::min(mu2, std::abs(P.alpha) / 2.0);
  D.mu = 0.9 * std::min(mu1, mu2);
  if (!(D.mu > 0) || !std::isfinite(D.mu))
    throw DegenerateInput("build_patches: no positive patch height");

  // cylinder thickness
  auto width_along = [&](const std::vector<Vec>& pts, const Vec& v) {
    Vec nv = v.normalized().perp();
    double mn = kInf, mx = -kInf;
    for (const Vec& p : pts) {
      double c = dot(p, nv);
      mn = std::min(mn, c);
      mx = std::max(mx, c);
    }
    return mx - mn;
  };
  for (const Patch& P : D.patches) {
    D.delta_theta = std::min(D.delta_theta, width_along(P.pts, P.v));
    if (P.flat) D.delta_theta = std::min(D.delta_theta, width_along(P.pts, P.w));
  }
  D.delta_mu = D.mu / D.K;

  // delta_s by halving until the sign condition holds on sampled arc points
  double ds = std::min(D.delta_theta, D.mu);
  for (int it = 0; it < 60; ++it) {
    bool okay = true;
    for (size_t ci = 0; ci < comps.size() && okay; ++ci) {
      if (!comps[ci].flat) continue;
      const Patch& P = D.patches[ci];
      for (int side = 0; side < 2 && okay; ++side) {
        int arc = side == 0 ? comps[ci].prev : comps[ci].next;
        Vec v = side == 0 ? P.v : P.w;
        Vec w = side == 0 ? P.w : P.v;
        Vec nv = v.normalized().perp();
        double c0 = dot(P.xv, nv), c1 = dot(P.xw, nv);
        double cmn = std::min(c0, c1), cmx = std::max(c0, c1);
        Vec nw = w.normalized().perp();
        for (const Vec& y : comps[arc].pts) {
          double cy = dot(y, nv);
          double dstrip = cy < cmn ? cmn - cy : (cy > cmx ? cy - cmx : 0.0);
          if (dstrip > ds) continue;
          if (std::abs(dot(y - P.cG, nw)) <= ds) {
            okay = false;
            break;
          }
        }
      }
    }
    if (okay) break;
    ds /= 2;
    if (it == 59) throw DegenerateInput("build_patches: delta_s vanished");
  }
  D.delta_s = ds;
  D.delta = 0.9 * std::min({D.delta_theta, D.delta_mu, D.delta_s});

  for (Patch& P : D.patches) {
    double infl = D.mu * std::max(P.v.norm(), P.flat ? P.w.norm() : 0.0) + D.mu;
    P.blo[0] = kInf;
    P.blo[1] = kInf;
    P.bhi[0] = -kInf;
    P.bhi[1] = -kInf;
    for (const Vec& p : P.pts) {
      P.blo[0] = std::min(P.blo[0], p[0] - infl);
      P.blo[1] = std::min(P.blo[1], p[1] - infl);
      P.bhi[0] = std::max(P.bhi[0], p[0] + infl);
      P.bhi[1] = std::max(P.bhi[1], p[1] + infl);
    }
  }

  // sampled pairwise disjointness of the patches
  for (size_t i = 0; i < D.patches.size(); ++i) {
    const Patch& P = D.patches[i];
    for (size_t step = 0; step < P.pts.size(); step += std::max<size_t>(1, P.pts.size() / 16))
      for (double t : {-0.9, -0.45, 0.45, 0.9}) {
        Vec x = P.pts[step] + P.v * (t * D.mu);
        int owners = 0;
        for (size_t j = 0; j < D.patches.size(); ++j) {
          double ps;
          Vec z, g;
          PatchDecomposition probe;
          probe.patches = {D.patches[j]};
          probe.mu = D.mu * (1.0 - 1e-9);
          if (probe.eval(x, &ps, &z, &g)) ++owners;
        }
        if (owners > 1) throw PatchOverlap("build_patches: patches intersect");
      }
  }
  return D;
}

Facet2DResult glue_support(const PolyhedralFn& W, const BoundaryCurve& Vm,
                           const PatchDecomposition& Pm, const BoundaryCurve& Vp,
                           const PatchDecomposition& Pp, const FacetPair& G,
                           double delta, double eta_cap, int n, double pad) {
  if (!(delta > 0)) throw ConfigInvalid("glue_support: delta must be positive");
  Vec lo(kInf, kInf), hi(-kInf, -kInf);
  for (const BoundaryCurve* C : {&Vm, &Vp})
    for (const auto& l : C->loops)
      for (const Vec& p : l.pts) {
        lo.c[0] = std::min(lo[0], p[0]);
        lo.c[1] = std::min(lo[1], p[1]);
        hi.c[0] = std::max(hi[0], p[0]);
        hi.c[1] = std::max(hi[1], p[1]);
      }
  if (!(lo[0] < hi[0])) throw DegenerateInput("glue_support: no boundary");
  lo = lo - Vec(pad, pad);
  hi = hi + Vec(pad, pad);
  double h = std::max(hi[0] - lo[0], hi[1] - lo[1]) / (n - 1);
  if (delta < 3 * h)
    throw ResolutionTooCoarse("glue_support: delta under 3 grid cells");
  int nx = (int)std::ceil((hi[0] - lo[0]) / h) + 1;
  int ny = (int)std::ceil((hi[1] - lo[1]) / h) + 1;

  // clip height from the patch values on the delta/2..delta shells
  double eta_m = kInf, eta_p = kInf;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      Vec x(lo[0] + i * h, lo[1] + j * h);
      double ps;
      Vec z, g;
      if (!Vm.empty()) {
        double d = Vm.dist(x);
        if (d >= delta / 2 && d <= delta && Pm.eval(x, &ps, &z, &g))
          eta_m = std::min(eta_m, std::abs(ps));
      }
      if (!Vp.empty()) {
        double d = Vp.dist(x);
        if (d >= delta / 2 && d <= delta && Pp.eval(x, &ps, &z, &g))
          eta_p = std::min(eta_p, std::abs(ps));
      }
    }
  double eta = 0.5 * std::min(eta_m, eta_p);
  if (eta_cap > 0) eta = std::min(eta, eta_cap);
  if (!std::isfinite(eta) || !(eta > 0))
    throw DegenerateInput("glue_support: empty clip shell");

  Facet2DResult out;
  out.G = G;
  out.eta = eta;
  out.delta = delta;
  SampledFn base;
  base.dim = 2;
  base.origin = lo;
  base.h = h;
  base.nx = nx;
  base.ny = ny;
  base.v.assign((size_t)nx * ny, 0.0);
  out.psi = base;
  out.zx = base;
  out.zy = base;

  double maxv = 0;
  for (const Vec& a : W.a) maxv = std::max(maxv, a.norm());
  const double tau_mem = 1e-6 * (1.0 + maxv);
  Polytope P0 = subdifferential(W, Vec(0.0, 0.0));
  std::map<std::vector<int>, Polytope> sub_cache;
  auto member = [&](const Vec& q, const Vec& zz) {
    std::vector<int> act = W.active_set(q);
    auto it = sub_cache.find(act);
    if (it == sub_cache.end())
      it = sub_cache.emplace(act, subdifferential(W, q)).first;
    return it->second.contains(zz, tau_mem);
  };

  size_t samples = 0, failures = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      Vec x(lo[0] + i * h, lo[1] + j * h);
      double dm = Vm.empty() ? kInf : Vm.dist(x);
      double dp = Vp.empty() ? kInf : Vp.dist(x);
      bool in_p = !G.plus2.is_empty() && G.plus2.inside(x);
      bool in_m = !G.minus2.is_empty() && G.minus2.inside(x);

      double psi;
      Vec grad(0.0, 0.0);
      bool active = false;  // psi equals a patch value (gradient nonzero)
      double pv;
      Vec zv, gv;
      if (dp < delta) {
        if (Pp.eval(x, &pv, &zv, &gv)) {
          psi = std::min(eta, std::max(pv, 0.0));
          if (pv > 0 && pv < eta) {
            active = true;
            grad = gv;
          }
        } else {
          psi = in_p ? eta : 0.0;
        }
      } else if (in_p) {
        psi = eta;
      } else if (dm < delta) {
        if (Pm.eval(x, &pv, &zv, &gv)) {
          psi = std::max(-eta, std::min(pv, 0.0));
          if (pv < 0 && pv > -eta) {
            active = true;
            grad = gv;
          }
        } else {
          psi = in_m ? -eta : 0.0;
        }
      } else if (in_m) {
        psi = -eta;
      } else {
        psi = 0.0;
      }

      double phim = std::clamp(3.0 - 4.0 * dm / delta, 0.0, 1.0);
      double phip = std::clamp(3.0 - 4.0 * dp / delta, 0.0, 1.0);
      Vec z(0.0, 0.0);
      bool zmiss = false;
      if (phim > 0) {
        double ps2;
        Vec z2, g2;
        if (Pm.eval(x, &ps2, &z2, &g2))
          z += z2 * phim;
        else
          zmiss = true;
      }
      if (phip > 0) {
        double ps2;
        Vec z2, g2;
        if (Pp.eval(x, &ps2, &z2, &g2))
          z += z2 * phip;
        else
          zmiss = true;
      }

      out.psi.v[(size_t)j * nx + i] = psi;
      out.zx.v[(size_t)j * nx + i] = z[0];
      out.zy.v[(size_t)j * nx + i] = z[1];

      if (dm <= 0.75 * delta || dp <= 0.75 * delta) {
        ++samples;
        bool ok;
        if (zmiss)
          ok = false;
        else if (active)
          ok = member(grad, z);
        else
          ok = P0.contains(z, tau_mem);
        if (!ok) ++failures;
      }
    }
  out.membership_failure_rate = samples ? (double)failures / samples : 0.0;

  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      size_t c = (size_t)j * nx + i;
      out.lip_psi = std::max(out.lip_psi,
                             std::abs(out.psi.v[c + 1] - out.psi.v[c]) / h);
      double dz = std::hypot(out.zx.v[c + 1] - out.zx.v[c],
                             out.zy.v[c + 1] - out.zy.v[c]);
      out.lip_z = std::max(out.lip_z, dz / h);
    }
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      size_t c = (size_t)j * nx + i;
      out.lip_psi = std::max(out.lip_psi,
                             std::abs(out.psi.v[c + nx] - out.psi.v[c]) / h);
      double dz = std::hypot(out.zx.v[c + nx] - out.zx.v[c],
                             out.zy.v[c + nx] - out.zy.v[c]);
      out.lip_z = std::max(out.lip_z, dz / h);
    }
  return out;
}

Facet2DResult admissible_approx_2d(const PolyhedralFn& W, const FacetPair& A,
                                   double rho1, double rho2, int grid_n) {
  if (W.dim != 2) throw ConfigInvalid("admissible_approx_2d: W must be 2D");
  if (!W.one_homogeneous)
    throw NonHomogeneous("admissible_approx_2d: W must be one-homogeneous");
  if (A.dim != 2) throw ConfigInvalid("admissible_approx_2d: pair must be 2D");
  if (!(rho1 >= 0) || !(rho2 > rho1))
    throw ConfigInvalid("admissible_approx_2d: need 0 <= rho1 < rho2");

  // recenter W so that 0 is an interior Cahn-Hoffman vector
  Polytope sub0 = subdifferential(W, Vec(0.0, 0.0));
  Vec xi0 = Vec::zero(2);
  for (const Vec& v : sub0.vertices) xi0 += v * (1.0 / sub0.vertices.size());
  std::vector<Vec> ahat;
  for (const Vec& a : W.a) ahat.push_back(a - xi0);
  PolyhedralFn What =
      make_polyhedral(2, ahat, std::vector<double>(ahat.size(), 0.0), W.name);
  if (coercivity_margin(What, Vec(0.0, 0.0)) <= 0)
    throw NotCoercive("admissible_approx_2d: recentred anisotropy not coercive");

  double r1 = rho1 > 0 ? rho1 : rho2 / 4.0;
  double span = rho2 - r1;
  double rho_sm = 0.8 * span;

  SmoothPair2D H = smooth_pair_approx(A, rho_sm, -1.0, r1);

  BoundaryCurve merged = H.minus;
  for (const auto& l : H.plus.loops) merged.loops.push_back(l);
  double phi = critical_rotation(merged, What);

  Vec lo, hi;
  Vec c0(0.0, 0.0);
  {
    Vec l(kInf, kInf), h2(-kInf, -kInf);
    for (const auto& lp : merged.loops)
      for (const Vec& p : lp.pts) {
        l.c[0] = std::min(l[0], p[0]);
        l.c[1] = std::min(l[1], p[1]);
        h2.c[0] = std::max(h2[0], p[0]);
        h2.c[1] = std::max(h2[1], p[1]);
      }
    lo = l;
    hi = h2;
    c0 = (l + h2) * 0.5;
  }
  double rad_max = 0;
  for (const auto& lp : merged.loops)
    for (const Vec& p : lp.pts) rad_max = std::max(rad_max, dist(p, c0));
  if (std::abs(phi) * rad_max > 0.12 * span)
    throw SearchExhausted(
        "admissible_approx_2d: rotation exceeds the sandwich budget");
  if (phi != 0.0) {
    for (BoundaryCurve* C : {&H.minus, &H.plus})
      for (auto& lp : C->loops)
        for (Vec& p : lp.pts) p = rotate2(p, phi, c0);
    H.minus.compute_frames();
    H.plus.compute_frames();
  }

  double d_HH = curve_gap(H.minus, H.plus);
  double eta_cap = std::min({d_HH / 40.0, rho_sm / 8.0, 0.05 * span});
  BoundaryCurve Vm = flatten(H.minus, What, eta_cap);
  BoundaryCurve Vp = flatten(H.plus, What, eta_cap);

  PatchDecomposition Pm = build_patches(Vm, What);
  PatchDecomposition Pp = build_patches(Vp, What);
  double delta = 0.9 * std::min({Pm.delta, Pp.delta, d_HH / 2.0});
  if (!std::isfinite(delta) || !(delta > 0))
    throw DegenerateInput("admissible_approx_2d: no positive glue width");

  FacetPair G = FacetPair::make2d(region_from(Vm, H.pair.minus2.complemented),
                                  region_from(Vp, H.pair.plus2.complemented));
  double pad = rho2 + 4 * delta;
  Facet2DResult res =
      glue_support(What, Vm, Pm, Vp, Pp, G, delta, -1.0, grid_n, pad);

  for (size_t i = 0; i < res.zx.v.size(); ++i) {
    res.zx.v[i] += xi0[0];
    res.zy.v[i] += xi0[1];
  }

  // final per-sample sandwich against the input pair
  double slop = 2.0 * res.psi.h;
  for (int j = 0; j < res.psi.ny; j += 2)
    for (int i = 0; i < res.psi.nx; i += 2) {
      Vec x = res.psi.point(i, j);
      if (!A.plus2.is_empty() && !G.plus2.is_empty()) {
        double sd = A.plus2.sdist(x);
        bool in = G.plus2.inside(x);
        if (sd < rho1 - slop && !in)
          throw DegenerateInput("admissible_approx_2d: plus sandwich violated");
        if (in && !(sd < rho2 + slop))
          throw DegenerateInput("admissible_approx_2d: plus sandwich violated");
      }
      if (!A.minus2.is_empty() && !G.minus2.is_empty()) {
        double sd = A.minus2.sdist(x);
        bool in = G.minus2.inside(x);
        if (sd < -rho2 - slop && !in)
          throw DegenerateInput("admissible_approx_2d: minus sandwich violated");
        if (in && !(sd < -rho1 + slop))
          throw DegenerateInput("admissible_approx_2d: minus sandwich violated");
      }
    }
  return res;
}

}  // namespace cf
