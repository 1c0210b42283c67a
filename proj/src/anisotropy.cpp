#include "crystalflow/anisotropy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "crystalflow/errors.hpp"

namespace cf {

double default_tau_act(const PolyhedralFn& W, const Vec& p) {
  return 1e-9 * (1.0 + std::abs(W.eval(p)));
}

double PolyhedralFn::eval(const Vec& p) const {
  double v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < pieces(); ++i) v = std::max(v, dot(a[i], p) + b[i]);
  return v;
}

std::vector<int> PolyhedralFn::active_set(const Vec& p, double tau) const {
  double v = eval(p);
  if (tau < 0) tau = 1e-9 * (1.0 + std::abs(v));
  std::vector<int> out;
  for (int i = 0; i < pieces(); ++i)
    if (dot(a[i], p) + b[i] >= v - tau) out.push_back(i);
  return out;
}

double PolyhedralFn::max_grad_norm() const {
  double v = 0;
  for (const Vec& ai : a) v = std::max(v, ai.norm());
  return v;
}

namespace {

// Strict-win sampling: keep piece i only if it beats all others by a clear
// margin at some probe point. Probes combine piece directions with random
// sphere points at several radii.
std::vector<char> attained_mask(int dim, const std::vector<Vec>& a,
                                const std::vector<double>& b) {
  std::vector<Vec> dirs;
  for (const Vec& ai : a)
    if (ai.norm() > 1e-14) dirs.push_back(ai.normalized());
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> gauss;
  for (int s = 0; s < 4096; ++s) {
    Vec d = Vec::zero(dim);
    for (int k = 0; k < dim; ++k) d.c[k] = gauss(rng);
    if (d.norm() > 1e-12) dirs.push_back(d.normalized());
  }
  double scale = 1.0;
  for (int i = 0; i < (int)a.size(); ++i)
    scale = std::max(scale, std::max(a[i].norm(), std::abs(b[i])));
  std::vector<char> keep(a.size(), 0);
  for (double r : {0.25, 0.5, 1.0, 2.0, 4.0, 16.0, 256.0}) {
    for (const Vec& d : dirs) {
      Vec p = (r * scale) * d;
      int best = -1;
      double v1 = -1e300, v2 = -1e300;
      for (int i = 0; i < (int)a.size(); ++i) {
        double v = dot(a[i], p) + b[i];
        if (v > v1) {
          v2 = v1;
          v1 = v;
          best = i;
        } else if (v > v2) {
          v2 = v;
        }
      }
      if (best >= 0 && v1 - v2 > 1e-10 * (1.0 + std::abs(v1))) keep[best] = 1;
    }
  }
  return keep;
}

}  // namespace

PolyhedralFn make_polyhedral(int dim, std::vector<Vec> a, std::vector<double> b,
                             std::string name) {
  if (dim < 1 || dim > 3 || a.empty() || a.size() != b.size())
    throw ConfigInvalid("make_polyhedral: bad piece data");
  // Dominance pass: identical slopes keep only the largest offset.
  std::vector<char> dead(a.size(), 0);
  for (size_t i = 0; i < a.size(); ++i) {
    if (dead[i]) continue;
    for (size_t j = 0; j < a.size(); ++j) {
      if (i == j || dead[j]) continue;
      if (dist(a[i], a[j]) < 1e-12 && b[j] >= b[i] - 1e-15) {
        dead[i] = 1;
        break;
      }
    }
  }
  std::vector<Vec> a2;
  std::vector<double> b2;
  for (size_t i = 0; i < a.size(); ++i)
    if (!dead[i]) {
      a2.push_back(a[i]);
      b2.push_back(b[i]);
    }

  bool homog = true;
  for (double bi : b2)
    if (std::abs(bi) > 1e-14) homog = false;

  std::vector<char> keep(a2.size(), 1);
  if (a2.size() > 1) {
    if (homog) {
      // Pieces with full-dimensional winning region = vertices of conv{a_i}.
      Polytope hull = make_polytope(dim, a2, 1e-12);
      for (size_t i = 0; i < a2.size(); ++i) {
        bool vert = false;
        for (const Vec& v : hull.vertices)
          if (dist(v, a2[i]) < 1e-9) vert = true;
        keep[i] = vert;
      }
    } else if (dim <= 2) {
      // Lifted test: the graph point (a_i, b_i) must be a hull vertex seen
      // from above (some incident facet normal with positive last component).
      std::vector<Vec> lifted;
      for (size_t i = 0; i < a2.size(); ++i) {
        Vec L = Vec::zero(dim + 1);
        for (int k = 0; k < dim; ++k) L.c[k] = a2[i].c[k];
        L.c[dim] = b2[i];
        lifted.push_back(L);
      }
      Polytope hull = make_polytope(dim + 1, lifted, 1e-12);
      std::vector<char> samp = attained_mask(dim, a2, b2);
      for (size_t i = 0; i < a2.size(); ++i) {
        int vi = -1;
        for (size_t v = 0; v < hull.vertices.size(); ++v)
          if (dist(hull.vertices[v], lifted[i]) < 1e-9) vi = (int)v;
        if (vi < 0) {
          keep[i] = 0;
          continue;
        }
        bool upper = false;
        if (hull.affdim < dim + 1) {
          upper = samp[i];  // degenerate graph, fall back to sampling
        } else {
          for (const Halfspace& h : hull.halfspaces)
            if (h.n.c[dim] > 1e-10 &&
                std::abs(dot(h.n, lifted[i]) - h.c) < 1e-9 * (1 + std::abs(h.c)))
              upper = true;
        }
        keep[i] = upper;
      }
    } else {
      keep = attained_mask(dim, a2, b2);
    }
  }

  PolyhedralFn W;
  W.dim = dim;
  W.one_homogeneous = homog;
  W.name = std::move(name);
  for (size_t i = 0; i < a2.size(); ++i)
    if (keep[i]) {
      W.a.push_back(a2[i]);
      W.b.push_back(b2[i]);
    }
  if (W.a.empty()) throw ConfigInvalid("make_polyhedral: all pieces redundant");
  return W;
}

PolyhedralFn load_anisotropy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open anisotropy file: " + path);
  std::string line, name;
  int dim = 0;
  std::vector<Vec> a;
  std::vector<double> b;
  while (std::getline(in, line)) {
    size_t h = line.find('#');
    if (h != std::string::npos) line = line.substr(0, h);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "name") {
      ls >> name;
    } else if (key == "dim") {
      ls >> dim;
    } else if (key == "piece") {
      if (dim < 1 || dim > 3)
        throw ConfigInvalid("anisotropy file: dim must precede pieces");
      Vec ai = Vec::zero(dim);
      for (int k = 0; k < dim; ++k)
        if (!(ls >> ai.c[k])) throw ConfigInvalid("anisotropy file: short piece row");
      double bi;
      if (!(ls >> bi)) throw ConfigInvalid("anisotropy file: short piece row");
      a.push_back(ai);
      b.push_back(bi);
    } else {
      throw ConfigInvalid("anisotropy file: unknown key '" + key + "'");
    }
  }
  if (a.empty()) throw ConfigInvalid("anisotropy file: no pieces: " + path);
  return make_polyhedral(dim, a, b, name);
}

Polytope subdifferential(const PolyhedralFn& W, const Vec& p, double tau) {
  std::vector<int> act = W.active_set(p, tau);
  std::vector<Vec> pts;
  for (int i : act) pts.push_back(W.a[i]);
  return make_polytope(W.dim, pts, kTauGeom);
}

namespace {

std::vector<Vec> complete_basis(int dim, const std::vector<Vec>& V) {
  std::vector<Vec> U;
  for (int e = 0; e < dim; ++e) {
    Vec u = Vec::axis(dim, e);
    for (const Vec& v : V) u -= dot(u, v) * v;
    for (const Vec& w : U) u -= dot(u, w) * w;
    if (u.norm() > 1e-8) U.push_back(u.normalized());
  }
  return U;
}

Stratum build_stratum(const PolyhedralFn& W, std::vector<int> act, Vec rep,
                      const Polytope& sub) {
  Stratum S;
  S.active = std::move(act);
  S.representative = rep;
  S.subdiff = sub;
  S.k = sub.affdim;
  if (S.k == W.dim) {
    // full-dimensional subdifferential: keep the caller's frame
    S.V_basis.clear();
    for (int e = 0; e < W.dim; ++e) S.V_basis.push_back(Vec::axis(W.dim, e));
  } else {
    S.V_basis = sub.basis;
  }
  S.U_basis = complete_basis(W.dim, S.V_basis);
  return S;
}

}  // namespace

bool Stratum::contains(const PolyhedralFn& W, const Vec& p, double tau) const {
  return W.active_set(p, tau) == active;
}

Vec Stratum::to_V(const Vec& x) const {
  Vec z = Vec::zero(k);
  for (int i = 0; i < k; ++i) z.c[i] = dot(V_basis[i], x);
  return z;
}

Vec Stratum::to_U(const Vec& x) const {
  Vec z = Vec::zero((int)U_basis.size());
  for (size_t j = 0; j < U_basis.size(); ++j) z.c[j] = dot(U_basis[j], x);
  return z;
}

Vec Stratum::from_VU(const Vec& zv, const Vec& zu) const {
  Vec x = Vec::zero(subdiff.dim);
  for (int i = 0; i < zv.dim && i < k; ++i) x += zv.c[i] * V_basis[i];
  for (int j = 0; j < zu.dim && j < (int)U_basis.size(); ++j) x += zu.c[j] * U_basis[j];
  return x;
}

Vec Stratum::xi_U() const {
  Vec any = subdiff.vertices.empty() ? Vec::zero(subdiff.dim) : subdiff.vertices[0];
  Vec out = Vec::zero(subdiff.dim);
  for (size_t j = 0; j < U_basis.size(); ++j) out += dot(U_basis[j], any) * U_basis[j];
  return out;
}

std::vector<Stratum> strata(const PolyhedralFn& W) {
  if (!W.one_homogeneous) throw NonHomogeneous("strata: W must be one-homogeneous");
  Polytope frank = make_polytope(W.dim, W.a, kTauGeom);
  std::vector<Face> faces = face_lattice(frank, 1e-9);

  std::vector<Stratum> out;
  for (const Face& F : faces) {
    // A point in the relative interior of the face's normal cone: the sum of
    // incident facet normals of the Frank body (zero for the whole body).
    Vec rep = Vec::zero(W.dim);
    for (int hi : F.halfspaces) rep += frank.halfspaces[hi].n;
    std::vector<Vec> pts;
    for (int vi : F.verts) pts.push_back(frank.vertices[vi]);
    Polytope sub = make_polytope(W.dim, pts, kTauGeom);
    // Map face vertices back to piece indices; pruning made these exact.
    std::vector<int> act;
    for (int i = 0; i < W.pieces(); ++i)
      for (const Vec& v : pts)
        if (dist(v, W.a[i]) < 1e-9) {
          act.push_back(i);
          break;
        }
    std::sort(act.begin(), act.end());
    Stratum S = build_stratum(W, act, rep, sub);
    if (!S.contains(W, rep))
      throw DegenerateInput("strata: representative fails active-set check");
    out.push_back(std::move(S));
  }
  std::stable_sort(out.begin(), out.end(), [](const Stratum& x, const Stratum& y) {
    if (x.k != y.k) return x.k < y.k;
    for (int c = 0; c < 3; ++c)
      if (std::abs(x.representative.c[c] - y.representative.c[c]) > 1e-12)
        return x.representative.c[c] < y.representative.c[c];
    return false;
  });
  return out;
}

PolyhedralFn directional_derivative(const PolyhedralFn& W, const Vec& p0) {
  Polytope sub = subdifferential(W, p0);
  std::vector<double> zeros(sub.vertices.size(), 0.0);
  return make_polyhedral(W.dim, sub.vertices, zeros, W.name + "'");
}

std::pair<PolyhedralFn, Stratum> sliced(const PolyhedralFn& W, const Vec& p0) {
  Polytope sub = subdifferential(W, p0);
  if (sub.affdim == 0)
    throw ZeroDimensional("sliced: dW is a point at the base point");
  Stratum S = build_stratum(W, W.active_set(p0), p0, sub);
  std::vector<Vec> aa;
  std::vector<double> bb;
  for (const Vec& v : sub.vertices) {
    aa.push_back(S.to_V(v));
    bb.push_back(0.0);
  }
  PolyhedralFn Wsl = make_polyhedral(S.k, aa, bb, W.name + "_sl");
  return {Wsl, S};
}

double local_radius(const PolyhedralFn& W, const Vec& p0) {
  double v = W.eval(p0);
  double tau = 1e-9 * (1.0 + std::abs(v));
  double amax = 0;
  for (int i = 0; i < W.pieces(); ++i)
    if (dot(W.a[i], p0) + W.b[i] >= v - tau) amax = std::max(amax, W.a[i].norm());
  double delta = std::numeric_limits<double>::infinity();
  for (int i = 0; i < W.pieces(); ++i) {
    double gap = v - (dot(W.a[i], p0) + W.b[i]);
    if (gap <= tau) continue;
    delta = std::min(delta, gap / (W.a[i].norm() + amax + 1e-300));
  }
  return delta;
}

namespace {

std::vector<Vec> sphere_samples(int dim, int n) {
  std::vector<Vec> out;
  if (dim == 1) {
    out.push_back(Vec(1.0));
    out.push_back(Vec(-1.0));
  } else if (dim == 2) {
    for (int i = 0; i < n; ++i) {
      double t = 2.0 * M_PI * i / n;
      out.push_back(Vec(std::cos(t), std::sin(t)));
    }
  } else {
    // Fibonacci sphere
    double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / n;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      out.push_back(Vec(r * std::cos(ga * i), r * std::sin(ga * i), z));
    }
  }
  return out;
}

}  // namespace

double coercivity_margin(const PolyhedralFn& Wsl, const Vec& xi0_V) {
  if (!Wsl.one_homogeneous)
    throw NonHomogeneous("coercivity_margin: needs a one-homogeneous slice");
  std::vector<Vec> cand;
  if (Wsl.dim == 1) {
    cand.push_back(Vec(1.0));
    cand.push_back(Vec(-1.0));
  } else {
    // Extreme rays of the normal fan are the facet normals of the Frank body.
    Polytope frank = make_polytope(Wsl.dim, Wsl.a, kTauGeom);
    for (const Halfspace& h : frank.halfspaces) cand.push_back(h.n);
    // In-piece minimizer candidates plus a dense fallback.
    for (const Vec& ai : Wsl.a) {
      Vec d = ai - xi0_V;
      if (d.norm() > 1e-13) cand.push_back(d.normalized());
    }
    for (Vec s : sphere_samples(Wsl.dim, Wsl.dim == 2 ? 720 : 2000))
      cand.push_back(s);
  }
  double lo = std::numeric_limits<double>::infinity();
  for (const Vec& z : cand) {
    Vec u = z.norm() > 1e-13 ? z.normalized() : z;
    lo = std::min(lo, Wsl.eval(u) - dot(xi0_V, u));
  }
  if (lo <= 0)
    throw NotRelativeInterior("coercivity_margin: offset not in ri(dW(0))");
  return lo;
}

PolyhedralFn polar(const PolyhedralFn& W) {
  if (!W.one_homogeneous) throw NonHomogeneous("polar: W must be one-homogeneous");
  Polytope frank = make_polytope(W.dim, W.a, kTauGeom);
  if (frank.affdim < W.dim)
    throw NotCoercive("polar: W vanishes on a subspace");
  std::vector<Vec> aa;
  std::vector<double> bb;
  for (const Halfspace& h : frank.halfspaces) {
    if (h.c <= 1e-12) throw NotCoercive("polar: 0 not interior to conv{a_i}");
    aa.push_back((1.0 / h.c) * h.n);
    bb.push_back(0.0);
  }
  return make_polyhedral(W.dim, aa, bb, W.name + "*");
}

Polytope wulff(const PolyhedralFn& W) {
  polar(W);  // reuse its coercivity checks
  return make_polytope(W.dim, W.a, kTauGeom);
}

SmoothAnisotropy regularize(const PolyhedralFn& W, int m, SmoothKind kind) {
  if (m < 1) throw ConfigInvalid("regularize: m must be >= 1");
  SmoothAnisotropy S;
  S.base = W;
  S.m = m;
  S.kind = kind;
  double amax = W.max_grad_norm();
  S.a_m = m * (amax * amax + 1.0);
  if (kind == SmoothKind::OneHomogeneous) {
    if (!W.one_homogeneous)
      throw NonHomogeneous("regularize: one-homogeneous kind needs b = 0");
    double delta = coercivity_margin(W, Vec::zero(W.dim));
    S.C_W = 2.0 * amax / delta;
  }
  if (kind == SmoothKind::QuadraticGrowth && W.one_homogeneous &&
      W.pieces() == (1 << W.dim)) {
    Vec sc = Vec::zero(W.dim);
    for (int d = 0; d < W.dim; ++d) sc[d] = std::abs(W.a[0][d]);
    bool prod = true;
    unsigned seen = 0;
    for (int i = 0; i < W.pieces() && prod; ++i) {
      unsigned bits = 0;
      for (int d = 0; d < W.dim; ++d) {
        if (std::abs(std::abs(W.a[i][d]) - sc[d]) > 1e-12 || sc[d] <= 0)
          prod = false;
        if (W.a[i][d] > 0) bits |= 1u << d;
      }
      seen |= 1u << bits;
    }
    if (prod && seen + 1 == (1u << (1 << W.dim))) {
      S.separable = true;
      S.sep_scale = sc;
    }
  }
  return S;
}

void SmoothAnisotropy::axis_flux(int d, double pd, double& z,
                                 double& Hdd) const {
  double s = sep_scale[d];
  double th = std::tanh(m * s * pd);
  z = s * th + pd / m;
  Hdd = m * s * s * (1.0 - th * th) + 1.0 / m;
}

SmoothAnisotropy SmoothAnisotropy::euclidean(int dim, int m) {
  SmoothAnisotropy S;
  S.base.dim = dim;
  S.base.one_homogeneous = true;
  S.base.name = "euclidean";
  S.base.a.push_back(Vec::zero(dim));
  S.base.b.push_back(0.0);
  S.m = m;
  S.kind = SmoothKind::Euclidean;
  S.a_m = m;
  return S;
}

double SmoothAnisotropy::value(const Vec& p) const {
  const int n = base.pieces();
  if (kind == SmoothKind::Euclidean) return p.norm();
  if (kind == SmoothKind::QuadraticGrowth) {
    double vmax = -1e300;
    for (int i = 0; i < n; ++i)
      vmax = std::max(vmax, dot(base.a[i], p) + base.b[i]);
    double s = 0;
    for (int i = 0; i < n; ++i)
      s += std::exp(m * (dot(base.a[i], p) + base.b[i] - vmax));
    return vmax + std::log(s) / m + p.norm2() / (2.0 * m);
  }
  // One-homogeneous: 2m-power combination, computed at unit scale for
  // overflow safety.
  double r = p.norm();
  if (r < 1e-300) return 0.0;
  Vec u = (1.0 / r) * p;
  double q = 2.0 * m;
  double mx = 1.0 / C_W;
  for (int i = 0; i < n; ++i) mx = std::max(mx, dot(base.a[i], u));
  double s = std::pow(1.0 / (C_W * mx), q);
  for (int i = 0; i < n; ++i) {
    double t = dot(base.a[i], u);
    if (t > 0) s += std::pow(t / mx, q);
  }
  return r * mx * std::pow(s, 1.0 / q);
}

Vec SmoothAnisotropy::gradient(const Vec& p) const {
  const int n = base.pieces();
  if (kind == SmoothKind::Euclidean) {
    double r = std::max(p.norm(), 1e-300);
    return (1.0 / r) * p;
  }
  if (kind == SmoothKind::QuadraticGrowth) {
    double vmax = -1e300;
    for (int i = 0; i < n; ++i)
      vmax = std::max(vmax, dot(base.a[i], p) + base.b[i]);
    double s = 0;
    Vec g = Vec::zero(base.dim);
    for (int i = 0; i < n; ++i) {
      double w = std::exp(m * (dot(base.a[i], p) + base.b[i] - vmax));
      s += w;
      g += w * base.a[i];
    }
    return (1.0 / s) * g + (1.0 / m) * p;
  }
  // V(p) = (sum_i (a_i·p)_+^q + (|p|/C)^q)^{1/q} with q = 2m; terms are
  // rescaled by their max before the powers to avoid overflow. Then
  // dV = (sum t_i^q)^{1/q - 1} * sum t_i^{q-1} dt_i in the scaled variables.
  double r = p.norm();
  if (r < 1e-300) return Vec::zero(base.dim);
  double q = 2.0 * m;
  double scale = r / C_W;
  for (int i = 0; i < n; ++i) scale = std::max(scale, dot(base.a[i], p));
  double acc = 0;
  Vec S = Vec::zero(base.dim);
  for (int i = 0; i < n; ++i) {
    double t = dot(base.a[i], p);
    if (t > 0) {
      double tq1 = std::pow(t / scale, q - 1.0);
      acc += tq1 * (t / scale);
      S += tq1 * base.a[i];
    }
  }
  {
    double tq1 = std::pow(r / (C_W * scale), q - 1.0);
    acc += tq1 * r / (C_W * scale);
    S += tq1 * (1.0 / (C_W * r)) * p;
  }
  return std::pow(acc, 1.0 / q - 1.0) * S;
}

void SmoothAnisotropy::hessian(const Vec& p, double* H) const {
  const int d = base.dim;
  if (kind == SmoothKind::Euclidean) {
    double r = std::max(p.norm(), 1.0 / m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double pij = (i == j ? 1.0 : 0.0) - p.c[i] * p.c[j] / (r * r);
        H[i * d + j] = pij / r;
      }
    return;
  }
  if (kind == SmoothKind::QuadraticGrowth) {
    const int n = base.pieces();
    double vmax = -1e300;
    for (int i = 0; i < n; ++i)
      vmax = std::max(vmax, dot(base.a[i], p) + base.b[i]);
    double s = 0;
    Vec g = Vec::zero(d);
    double A[9] = {0};
    for (int i = 0; i < n; ++i) {
      double w = std::exp(m * (dot(base.a[i], p) + base.b[i] - vmax));
      if (w < 1e-18) continue;
      s += w;
      g += w * base.a[i];
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) A[r * d + c] += w * base.a[i].c[r] * base.a[i].c[c];
    }
    g = (1.0 / s) * g;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        H[r * d + c] = m * (A[r * d + c] / s - g.c[r] * g.c[c]) +
                       (r == c ? 1.0 / m : 0.0);
    return;
  }
  // One-homogeneous kind: central differences on the closed-form gradient
  // (only used by diagnostics, never inside solvers).
  double h = 1e-5 * (1.0 + p.norm());
  for (int j = 0; j < d; ++j) {
    Vec e = Vec::axis(d, j, h);
    Vec gp = gradient(p + e), gm = gradient(p - e);
    for (int i = 0; i < d; ++i) H[i * d + j] = (gp.c[i] - gm.c[i]) / (2 * h);
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      double av = 0.5 * (H[i * d + j] + H[j * d + i]);
      H[i * d + j] = H[j * d + i] = av;
    }
}

void SmoothAnisotropy::hessian2(double px, double py, double& h11, double& h12,
                                double& h22) const {
  if (kind == SmoothKind::Euclidean) {
    double r2 = px * px + py * py;
    double r = std::max(std::sqrt(r2), 1.0 / m);
    double inv = 1.0 / r, inv3 = inv / (r * r);
    h11 = inv - px * px * inv3;
    h22 = inv - py * py * inv3;
    h12 = -px * py * inv3;
    return;
  }
  const int n = base.pieces();
  double vmax = -1e300;
  for (int i = 0; i < n; ++i) {
    double v = base.a[i].c[0] * px + base.a[i].c[1] * py + base.b[i];
    if (v > vmax) vmax = v;
  }
  double s = 0, gx = 0, gy = 0, axx = 0, axy = 0, ayy = 0;
  for (int i = 0; i < n; ++i) {
    double v = base.a[i].c[0] * px + base.a[i].c[1] * py + base.b[i];
    double e = m * (v - vmax);
    if (e < -40.0) continue;
    double w = std::exp(e);
    double ax = base.a[i].c[0], ay = base.a[i].c[1];
    s += w;
    gx += w * ax;
    gy += w * ay;
    axx += w * ax * ax;
    axy += w * ax * ay;
    ayy += w * ay * ay;
  }
  double inv = 1.0 / s;
  gx *= inv;
  gy *= inv;
  h11 = m * (axx * inv - gx * gx) + 1.0 / m;
  h22 = m * (ayy * inv - gy * gy) + 1.0 / m;
  h12 = m * (axy * inv - gx * gy);
}

double SmoothAnisotropy::max_hessian_norm_sampled(double radius) const {
  int d = base.dim;
  double best = 0;
  double H[9];
  for (const Vec& u : sphere_samples(d, d == 1 ? 2 : (d == 2 ? 256 : 600))) {
    for (double r : {1e-6, 0.01, 0.1, 0.5, 1.0, radius}) {
      hessian(r * u, H);
      double fro = 0;
      for (int i = 0; i < d * d; ++i) fro += H[i] * H[i];
      best = std::max(best, std::sqrt(fro));
    }
  }
  return best;
}

}  // namespace cf
