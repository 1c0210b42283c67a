#include "crystalflow/region2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "crystalflow/errors.hpp"

namespace cf {

double Loop::signed_area() const {
  double a = 0;
  int n = (int)pts.size();
  for (int i = 0; i < n; ++i) {
    const Vec& p = pts[i];
    const Vec& q = pts[(i + 1) % n];
    a += p.c[0] * q.c[1] - q.c[0] * p.c[1];
  }
  return 0.5 * a;
}

double Loop::length() const {
  double L = 0;
  int n = (int)pts.size();
  for (int i = 0; i < n; ++i) L += dist(pts[i], pts[(i + 1) % n]);
  return L;
}

void Loop::reverse() { std::reverse(pts.begin(), pts.end()); }

Region2D Region2D::whole() {
  Region2D r;
  r.complemented = true;
  return r;
}

Region2D Region2D::box(Vec lo, Vec hi) {
  Region2D r;
  Loop L;
  L.pts = {lo, Vec(hi.c[0], lo.c[1]), hi, Vec(lo.c[0], hi.c[1])};
  r.loops.push_back(L);
  return r;
}

bool Region2D::inside(const Vec& x) const {
  int crossings = 0;
  for (const Loop& L : loops) {
    int n = (int)L.pts.size();
    for (int i = 0; i < n; ++i) {
      const Vec& p = L.pts[i];
      const Vec& q = L.pts[(i + 1) % n];
      if ((p.c[1] > x.c[1]) != (q.c[1] > x.c[1])) {
        double t = (x.c[1] - p.c[1]) / (q.c[1] - p.c[1]);
        if (p.c[0] + t * (q.c[0] - p.c[0]) > x.c[0]) ++crossings;
      }
    }
  }
  bool in = crossings % 2 == 1;
  return complemented ? !in : in;
}

double Region2D::boundary_dist(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const Loop& L : loops) {
    int n = (int)L.pts.size();
    for (int i = 0; i < n; ++i)
      d = std::min(d, segment_dist(x, L.pts[i], L.pts[(i + 1) % n]));
  }
  return d;
}

double Region2D::sdist(const Vec& x) const {
  if (loops.empty())
    return complemented ? -std::numeric_limits<double>::infinity()
                        : std::numeric_limits<double>::infinity();
  double d = boundary_dist(x);
  return inside(x) ? -d : d;
}

void Region2D::bbox(Vec& lo, Vec& hi) const {
  const double INF = std::numeric_limits<double>::infinity();
  lo = Vec(INF, INF);
  hi = Vec(-INF, -INF);
  for (const Loop& L : loops)
    for (const Vec& p : L.pts) {
      lo.c[0] = std::min(lo.c[0], p.c[0]);
      lo.c[1] = std::min(lo.c[1], p.c[1]);
      hi.c[0] = std::max(hi.c[0], p.c[0]);
      hi.c[1] = std::max(hi.c[1], p.c[1]);
    }
}

double Region2D::diameter() const {
  if (loops.empty()) return 0;
  Vec lo, hi;
  bbox(lo, hi);
  return dist(lo, hi);
}

namespace {

// Edge of the sampling lattice: horizontal (dir=0) from (i,j) to (i+1,j) or
// vertical (dir=1) from (i,j) to (i,j+1).
int64_t edge_key(int i, int j, int dir, int nx) {
  return ((int64_t)j * nx + i) * 2 + dir;
}

}  // namespace

std::vector<Loop> contour_grid(const std::vector<double>& f, int nx, int ny,
                               Vec origin, double hx, double hy, double level,
                               const std::function<double(const Vec&)>& exact) {
  auto F = [&](int i, int j) { return f[(size_t)j * nx + i] - level; };
  auto P = [&](int i, int j) {
    return Vec(origin.c[0] + i * hx, origin.c[1] + j * hy);
  };
  // Crossing point on an edge, keyed so both adjacent cells agree exactly.
  std::map<int64_t, Vec> xpt;
  auto cross_on = [&](int i, int j, int dir) -> int64_t {
    int i2 = dir == 0 ? i + 1 : i;
    int j2 = dir == 0 ? j : j + 1;
    double f0 = F(i, j), f1 = F(i2, j2);
    int64_t key = edge_key(i, j, dir, nx);
    if (xpt.count(key)) return key;
    double t = f0 / (f0 - f1);
    t = std::max(0.0, std::min(1.0, t));
    Vec a = P(i, j), b = P(i2, j2);
    Vec p = a + t * (b - a);
    if (exact) {
      double ga = exact(a) - level, gb = exact(b) - level;
      if ((ga <= 0) != (gb <= 0)) {
        Vec lo = a, hi = b;
        double glo = ga;
        for (int it = 0; it < 60; ++it) {
          Vec mid = 0.5 * (lo + hi);
          double gm = exact(mid) - level;
          if ((gm <= 0) == (glo <= 0)) {
            lo = mid;
            glo = gm;
          } else {
            hi = mid;
          }
        }
        p = 0.5 * (lo + hi);
      }
    }
    xpt[key] = p;
    return key;
  };

  // Per cell, emit directed segments (key_from -> key_to) oriented so that
  // {f < level} lies on the left.
  std::multimap<int64_t, int64_t> nxt;
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      double f00 = F(i, j), f10 = F(i + 1, j), f11 = F(i + 1, j + 1),
             f01 = F(i, j + 1);
      int code = (f00 < 0 ? 1 : 0) | (f10 < 0 ? 2 : 0) | (f11 < 0 ? 4 : 0) |
                 (f01 < 0 ? 8 : 0);
      if (code == 0 || code == 15) continue;
      int64_t eb = -1, er = -1, et = -1, el = -1;  // bottom/right/top/left
      auto need = [&](int which) -> int64_t {
        switch (which) {
          case 0: return eb >= 0 ? eb : (eb = cross_on(i, j, 0));
          case 1: return er >= 0 ? er : (er = cross_on(i + 1, j, 1));
          case 2: return et >= 0 ? et : (et = cross_on(i, j + 1, 0));
          default: return el >= 0 ? el : (el = cross_on(i, j, 1));
        }
      };
      auto emit = [&](int from, int to) { nxt.insert({need(from), need(to)}); };
      switch (code) {
        case 1: emit(0, 3); break;
        case 2: emit(1, 0); break;
        case 3: emit(1, 3); break;
        case 4: emit(2, 1); break;
        case 5: {
          double c = 0.25 * (f00 + f10 + f11 + f01);
          if (c < 0) {
            emit(0, 1);
            emit(2, 3);
          } else {
            emit(0, 3);
            emit(2, 1);
          }
          break;
        }
        case 6: emit(2, 0); break;
        case 7: emit(2, 3); break;
        case 8: emit(3, 2); break;
        case 9: emit(0, 2); break;
        case 10: {
          double c = 0.25 * (f00 + f10 + f11 + f01);
          if (c < 0) {
            emit(3, 0);
            emit(1, 2);
          } else {
            emit(1, 0);
            emit(3, 2);
          }
          break;
        }
        case 11: emit(1, 2); break;
        case 12: emit(3, 1); break;
        case 13: emit(0, 1); break;
        case 14: emit(3, 0); break;
      }
    }

  std::vector<Loop> out;
  while (!nxt.empty()) {
    auto it = nxt.begin();
    int64_t start = it->first;
    Loop L;
    int64_t cur = start;
    while (true) {
      auto e = nxt.find(cur);
      if (e == nxt.end()) break;  // open chain (touches grid boundary); drop
      L.pts.push_back(xpt[cur]);
      int64_t to = e->second;
      nxt.erase(e);
      cur = to;
      if (cur == start) break;
    }
    if (cur == start && L.pts.size() >= 3) out.push_back(std::move(L));
  }
  return out;
}

Region2D nbd2(const Region2D& A, double rho, int resolution) {
  if (rho == 0.0) return A;
  if (A.is_empty()) return A;
  if (A.is_whole()) return A;
  Vec lo, hi;
  A.bbox(lo, hi);
  double pad = std::abs(rho) * 1.5 + 0.05 * dist(lo, hi) + 1e-9;
  lo = lo + Vec(-pad, -pad);
  hi = hi + Vec(pad, pad);
  double span = std::max(hi.c[0] - lo.c[0], hi.c[1] - lo.c[1]);
  double h = span / resolution;
  int nx = (int)std::ceil((hi.c[0] - lo.c[0]) / h) + 2;
  int ny = (int)std::ceil((hi.c[1] - lo.c[1]) / h) + 2;
  std::vector<double> f((size_t)nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      f[(size_t)j * nx + i] =
          A.sdist(Vec(lo.c[0] + i * h, lo.c[1] + j * h));
  auto exact = [&](const Vec& x) { return A.sdist(x); };
  Region2D out;
  out.loops = contour_grid(f, nx, ny, lo, h, h, rho, exact);
  Vec far = hi + Vec(10 * span, 11 * span);
  out.complemented = false;
  // fix parity so membership matches {sdist < rho} at a far probe
  bool far_in_target = A.sdist(far) < rho;
  if (out.inside(far) != far_in_target) out.complemented = true;
  return out;
}

std::vector<double> edt_sq_1d(const std::vector<double>& fsq) {
  const double INF = std::numeric_limits<double>::infinity();
  const int n = (int)fsq.size();
  std::vector<double> d(n, INF);
  std::vector<int> idx;  // only finite parabolas enter the envelope
  for (int q = 0; q < n; ++q)
    if (fsq[q] < INF) idx.push_back(q);
  if (idx.empty()) return d;
  std::vector<int> v(idx.size());
  std::vector<double> z(idx.size() + 1);
  int k = 0;
  v[0] = idx[0];
  z[0] = -INF;
  z[1] = INF;
  for (size_t t = 1; t < idx.size(); ++t) {
    int q = idx[t];
    double s;
    while (true) {
      int p = v[k];
      s = ((fsq[q] + (double)q * q) - (fsq[p] + (double)p * p)) /
          (2.0 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = INF;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    int p = v[k];
    d[q] = (double)(q - p) * (q - p) + fsq[p];
  }
  return d;
}

std::vector<double> edt_sq_2d(const std::vector<char>& mask, int nx, int ny) {
  const double INF = std::numeric_limits<double>::infinity();
  std::vector<double> g((size_t)nx * ny);
  std::vector<double> col(ny);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) col[j] = mask[(size_t)j * nx + i] ? 0.0 : INF;
    std::vector<double> dc = edt_sq_1d(col);
    for (int j = 0; j < ny; ++j) g[(size_t)j * nx + i] = dc[j];
  }
  std::vector<double> row(nx), out((size_t)nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) row[i] = g[(size_t)j * nx + i];
    std::vector<double> dr = edt_sq_1d(row);
    for (int i = 0; i < nx; ++i) out[(size_t)j * nx + i] = dr[i];
  }
  return out;
}

}  // namespace cf
