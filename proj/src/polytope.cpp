#include "crystalflow/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "crystalflow/errors.hpp"

namespace cf {

Vec Polytope::centroid() const {
  Vec s = Vec::zero(dim);
  for (const Vec& v : vertices) s += v;
  return vertices.empty() ? s : s * (1.0 / vertices.size());
}

double Polytope::support(const Vec& p) const {
  double best = -1e300;
  for (const Vec& v : vertices) best = std::max(best, p.dot(v));
  return best;
}

Vec Polytope::argsupport(const Vec& p) const {
  double best = -1e300;
  Vec arg = Vec::zero(dim);
  for (const Vec& v : vertices) {
    double s = p.dot(v);
    if (s > best) {
      best = s;
      arg = v;
    }
  }
  return arg;
}

double Polytope::circumradius() const {
  double r = 0;
  for (const Vec& v : vertices) r = std::max(r, v.norm());
  return r;
}

std::vector<double> Polytope::hull_coords(const Vec& x) const {
  std::vector<double> z(affdim);
  Vec d = x - origin;
  for (int i = 0; i < affdim; ++i) z[i] = basis[i].dot(d);
  return z;
}

double Polytope::hull_dist(const Vec& x) const {
  Vec d = x - origin;
  Vec proj = Vec::zero(dim);
  for (int i = 0; i < affdim; ++i) proj += basis[i] * basis[i].dot(d);
  return (d - proj).norm();
}

namespace {

Vec from_coords(const Polytope& P, const std::vector<double>& z) {
  Vec x = P.origin;
  for (int i = 0; i < P.affdim; ++i) x += P.basis[i] * z[i];
  return x;
}

// 2D convex hull, CCW, no collinear points kept (monotone chain).
std::vector<int> hull2d(const std::vector<std::array<double, 2>>& pts, double tol) {
  int n = (int)pts.size();
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (pts[a][0] != pts[b][0]) return pts[a][0] < pts[b][0];
    return pts[a][1] < pts[b][1];
  });
  auto cr = [&](int o, int a, int b) {
    return (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) -
           (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0]);
  };
  if (n == 1) return {idx[0]};
  std::vector<int> h(2 * (size_t)n);
  int k = 0;
  for (int ii = 0; ii < n; ++ii) {
    int i = idx[ii];
    while (k >= 2 && cr(h[k - 2], h[k - 1], i) <= tol) --k;
    h[k++] = i;
  }
  for (int ii = n - 2, t = k + 1; ii >= 0; --ii) {
    int i = idx[ii];
    while (k >= t && cr(h[k - 2], h[k - 1], i) <= tol) --k;
    h[k++] = i;
  }
  h.resize(k - 1);
  return h;  // CCW
}

}  // namespace

Polytope make_polytope(int dim, std::vector<Vec> pts, double tol) {
  Polytope P;
  P.dim = dim;
  if (pts.empty()) return P;

  // Deduplicate.
  std::vector<Vec> uniq;
  for (const Vec& p : pts) {
    bool dup = false;
    for (const Vec& q : uniq)
      if (dist(p, q) <= tol) {
        dup = true;
        break;
      }
    if (!dup) uniq.push_back(p);
  }

  // Affine hull by Gram-Schmidt over the point differences.
  P.origin = uniq[0];
  for (const Vec& p : uniq) {
    if ((int)P.basis.size() == dim) break;
    Vec d = p - P.origin;
    for (const Vec& b : P.basis) d -= b * b.dot(d);
    if (d.norm() > tol) P.basis.push_back(d.normalized());
  }
  P.affdim = (int)P.basis.size();

  if (P.affdim == 0) {
    P.vertices = {uniq[0]};
    return P;
  }

  std::vector<std::vector<double>> Z;
  for (const Vec& p : uniq) {
    Vec d = p - P.origin;
    std::vector<double> z(P.affdim);
    for (int i = 0; i < P.affdim; ++i) z[i] = P.basis[i].dot(d);
    Z.push_back(z);
  }

  if (P.affdim == 1) {
    int lo = 0, hi = 0;
    for (int i = 1; i < (int)uniq.size(); ++i) {
      if (Z[i][0] < Z[lo][0]) lo = i;
      if (Z[i][0] > Z[hi][0]) hi = i;
    }
    P.vertices = {uniq[lo], uniq[hi]};
    P.halfspaces.push_back({P.basis[0] * -1.0, -Z[lo][0]});
    P.halfspaces.push_back({P.basis[0], Z[hi][0]});
    P.origin = uniq[lo];  // keep origin a vertex for cleanliness
    return P;
  }

  if (P.affdim == 2) {
    std::vector<std::array<double, 2>> q;
    for (auto& z : Z) q.push_back({z[0], z[1]});
    std::vector<int> h = hull2d(q, tol * tol);
    for (int i : h) P.vertices.push_back(uniq[i]);
    int m = (int)h.size();
    for (int i = 0; i < m; ++i) {
      const Vec& a = P.vertices[i];
      const Vec& b = P.vertices[(i + 1) % m];
      Vec e = b - a;
      // Outward normal within the hull plane: rotate the in-plane edge by -90deg.
      double ex = P.basis[0].dot(e), ey = P.basis[1].dot(e);
      Vec n = P.basis[0] * ey - P.basis[1] * ex;
      n = n.normalized();
      P.halfspaces.push_back({n, n.dot(a)});
    }
    return P;
  }

  // affdim == 3: facet scan over point triples.
  int n = (int)uniq.size();
  struct Facet {
    Vec n;
    double c;
    std::vector<int> pts;  // points on the plane
  };
  std::vector<Facet> facets;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        Vec nrm = (uniq[j] - uniq[i]).cross(uniq[k] - uniq[i]);
        if (nrm.norm() <= tol) continue;
        nrm = nrm.normalized();
        double c = nrm.dot(uniq[i]);
        int above = 0, below = 0;
        for (int l = 0; l < n; ++l) {
          double s = nrm.dot(uniq[l]) - c;
          if (s > tol) ++above;
          if (s < -tol) ++below;
        }
        if (above > 0 && below > 0) continue;
        if (above > 0) {  // orient outward
          nrm = -nrm;
          c = -c;
        }
        bool known = false;
        for (const Facet& f : facets)
          if (dist(f.n, nrm) < 1e-9 && std::fabs(f.c - c) < 1e-9) {
            known = true;
            break;
          }
        if (known) continue;
        Facet f{nrm, c, {}};
        for (int l = 0; l < n; ++l)
          if (std::fabs(nrm.dot(uniq[l]) - c) <= tol) f.pts.push_back(l);
        facets.push_back(f);
      }

  // Facet polygons: 2D hull of each facet's points; global vertices = union.
  std::set<int> vset;
  std::vector<std::vector<int>> facet_polys;
  for (Facet& f : facets) {
    Vec u = f.n.dim == 3 && std::fabs(f.n[0]) < 0.9 ? Vec(1.0, 0.0, 0.0) : Vec(0.0, 1.0, 0.0);
    Vec e1 = (u - f.n * f.n.dot(u)).normalized();
    Vec e2 = f.n.cross(e1);
    std::vector<std::array<double, 2>> q;
    for (int l : f.pts) q.push_back({e1.dot(uniq[l]), e2.dot(uniq[l])});
    std::vector<int> h = hull2d(q, tol * tol);
    std::vector<int> poly;
    for (int hi : h) poly.push_back(f.pts[hi]);
    facet_polys.push_back(poly);
    for (int v : poly) vset.insert(v);
  }

  std::map<int, int> remap;
  for (int v : vset) {
    remap[v] = (int)P.vertices.size();
    P.vertices.push_back(uniq[v]);
  }
  for (size_t fi = 0; fi < facets.size(); ++fi)
    P.halfspaces.push_back({facets[fi].n, facets[fi].c});
  P.origin = P.vertices[0];
  return P;
}

std::vector<Face> face_lattice(const Polytope& P, double tol) {
  std::vector<Face> out;
  int nv = (int)P.vertices.size();
  if (nv == 0) return out;

  if (P.affdim == 0) {
    out.push_back({0, {0}, {}});
    return out;
  }
  if (P.affdim == 1) {
    out.push_back({0, {0}, {0}});
    out.push_back({0, {1}, {1}});
    out.push_back({1, {0, 1}, {}});
    return out;
  }
  if (P.affdim == 2) {
    // Vertices in CCW order; halfspace i is the edge (i, i+1).
    for (int i = 0; i < nv; ++i) out.push_back({0, {i}, {(i + nv - 1) % nv, i}});
    for (int i = 0; i < nv; ++i) out.push_back({1, {i, (i + 1) % nv}, {i}});
    Face whole{2, {}, {}};
    for (int i = 0; i < nv; ++i) whole.verts.push_back(i);
    out.push_back(whole);
    return out;
  }

  // affdim == 3. Incidence from the halfspaces.
  int nf = (int)P.halfspaces.size();
  std::vector<std::vector<int>> on(nv);  // facets incident to each vertex
  std::vector<std::vector<int>> fverts(nf);
  for (int v = 0; v < nv; ++v)
    for (int f = 0; f < nf; ++f)
      if (std::fabs(P.halfspaces[f].n.dot(P.vertices[v]) - P.halfspaces[f].c) <= tol) {
        on[v].push_back(f);
        fverts[f].push_back(v);
      }
  for (int v = 0; v < nv; ++v) out.push_back({0, {v}, on[v]});
  // Edges: vertex pairs shared by exactly two facets.
  std::set<std::pair<int, int>> edges;
  for (int f = 0; f < nf; ++f)
    for (int g = f + 1; g < nf; ++g) {
      std::vector<int> common;
      for (int v : fverts[f])
        if (std::find(fverts[g].begin(), fverts[g].end(), v) != fverts[g].end())
          common.push_back(v);
      if (common.size() == 2) {
        auto pr = std::minmax(common[0], common[1]);
        if (edges.insert({pr.first, pr.second}).second)
          out.push_back({1, {pr.first, pr.second}, {f, g}});
      }
    }
  for (int f = 0; f < nf; ++f) out.push_back({2, fverts[f], {f}});
  Face whole{3, {}, {}};
  for (int v = 0; v < nv; ++v) whole.verts.push_back(v);
  out.push_back(whole);
  std::stable_sort(out.begin(), out.end(),
                   [](const Face& a, const Face& b) { return a.dim < b.dim; });
  return out;
}

Vec Polytope::project(const Vec& x) const {
  if (vertices.empty()) return x;
  if (affdim == 0) return vertices[0];

  // Project to the affine hull first.
  Vec d = x - origin;
  Vec y = origin;
  for (int i = 0; i < affdim; ++i) y += basis[i] * basis[i].dot(d);

  if (affdim == 1) {
    const Vec &a = vertices[0], &b = vertices[1];
    Vec e = b - a;
    double t = e.norm2() > 0 ? (y - a).dot(e) / e.norm2() : 0.0;
    t = std::fmin(1.0, std::fmax(0.0, t));
    return a + e * t;
  }

  if (affdim == 2) {
    bool inside = true;
    for (const Halfspace& h : halfspaces)
      if (h.n.dot(y) > h.c + 1e-14) {
        inside = false;
        break;
      }
    if (inside) return y;
    double best = 1e300;
    Vec bp = y;
    int m = (int)vertices.size();
    for (int i = 0; i < m; ++i) {
      Vec cp;
      double dd = segment_dist(y, vertices[i], vertices[(i + 1) % m], &cp);
      if (dd < best) {
        best = dd;
        bp = cp;
      }
    }
    return bp;
  }

  // Full-dimensional 3D: box fast path, else Dykstra on the facet planes.
  bool inside = true;
  for (const Halfspace& h : halfspaces)
    if (h.n.dot(x) > h.c + 1e-14) {
      inside = false;
      break;
    }
  if (inside) return x;

  bool axis_box = true;
  for (const Halfspace& h : halfspaces) {
    int nz = 0;
    for (int i = 0; i < 3; ++i)
      if (std::fabs(h.n[i]) > 1e-12) ++nz;
    if (nz != 1) {
      axis_box = false;
      break;
    }
  }
  if (axis_box) {
    Vec lo(-1e300, -1e300, -1e300), hi(1e300, 1e300, 1e300);
    for (const Halfspace& h : halfspaces)
      for (int i = 0; i < 3; ++i) {
        if (h.n[i] > 1e-12) hi[i] = std::fmin(hi[i], h.c / h.n[i]);
        if (h.n[i] < -1e-12) lo[i] = std::fmax(lo[i], h.c / h.n[i]);
      }
    Vec r = x;
    for (int i = 0; i < 3; ++i) r[i] = std::fmin(hi[i], std::fmax(lo[i], r[i]));
    return r;
  }

  Vec p = x;
  std::vector<Vec> corr(halfspaces.size(), Vec::zero(3));
  for (int it = 0; it < 200; ++it) {
    double moved = 0;
    for (size_t i = 0; i < halfspaces.size(); ++i) {
      Vec q = p + corr[i];
      double viol = halfspaces[i].n.dot(q) - halfspaces[i].c;
      Vec pn = viol > 0 ? q - halfspaces[i].n * viol : q;
      corr[i] = q - pn;
      moved += (pn - p).norm();
      p = pn;
    }
    if (moved < 1e-13) break;
  }
  return p;
}

bool Polytope::contains(const Vec& x, double tol) const {
  return dist(x, project(x)) <= tol;
}

bool Polytope::same_set(const Polytope& o, double tol) const {
  for (const Vec& v : vertices)
    if (!o.contains(v, tol)) return false;
  for (const Vec& v : o.vertices)
    if (!contains(v, tol)) return false;
  return true;
}

Polytope polytope_from_halfplanes_2d(const std::vector<Halfspace>& hs, double tol) {
  std::vector<Vec> cand;
  int n = (int)hs.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double det = cross2(hs[i].n, hs[j].n);
      if (std::fabs(det) < 1e-14) continue;
      double x = (hs[i].c * hs[j].n[1] - hs[j].c * hs[i].n[1]) / det;
      double y = (hs[i].n[0] * hs[j].c - hs[j].n[0] * hs[i].c) / det;
      Vec p(x, y);
      bool feas = true;
      for (int k = 0; k < n; ++k)
        if (hs[k].n.dot(p) > hs[k].c + tol) {
          feas = false;
          break;
        }
      if (feas) cand.push_back(p);
    }
  if (cand.empty()) throw DegenerateInput("halfplane intersection is empty or unbounded");
  return make_polytope(2, cand, tol);
}

}  // namespace cf
