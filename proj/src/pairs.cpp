#include "crystalflow/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crystalflow/errors.hpp"

namespace cf {

Vec SampledFn::point(int i, int j) const {
  if (dim == 1) return Vec(origin.c[0] + i * h);
  return Vec(origin.c[0] + i * h, origin.c[1] + j * h);
}

double SampledFn::eval(const Vec& x) const {
  double fx = (x.c[0] - origin.c[0]) / h;
  double fy = dim == 2 ? (x.c[1] - origin.c[1]) / h : 0.0;
  fx = std::max(0.0, std::min((double)nx - 1, fx));
  fy = std::max(0.0, std::min((double)ny - 1, fy));
  int i = std::min((int)fx, nx - 2 >= 0 ? nx - 2 : 0);
  int j = std::min((int)fy, ny - 2 >= 0 ? ny - 2 : 0);
  double tx = fx - i, ty = fy - j;
  if (dim == 1 || ny == 1) {
    if (nx == 1) return at(0);
    return (1 - tx) * at(i) + tx * at(i + 1);
  }
  return (1 - tx) * (1 - ty) * at(i, j) + tx * (1 - ty) * at(i + 1, j) +
         (1 - tx) * ty * at(i, j + 1) + tx * ty * at(i + 1, j + 1);
}

double SampledFn::lipschitz() const {
  double L = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (i + 1 < nx) L = std::max(L, std::abs(at(i + 1, j) - at(i, j)) / h);
      if (j + 1 < ny) L = std::max(L, std::abs(at(i, j + 1) - at(i, j)) / h);
    }
  return L;
}

double SampledFn::max_abs() const {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

FacetPair FacetPair::make1d(IntervalSet minus, IntervalSet plus) {
  if (!minus.intersect(plus).is_empty())
    throw DegenerateInput("facet pair: sides overlap");
  FacetPair P;
  P.dim = 1;
  P.minus1 = std::move(minus);
  P.plus1 = std::move(plus);
  return P;
}

FacetPair FacetPair::make2d(Region2D minus, Region2D plus) {
  FacetPair P;
  P.dim = 2;
  P.minus2 = std::move(minus);
  P.plus2 = std::move(plus);
  // sampled disjointness check over the joint bounding box
  Vec lo1, hi1, lo2, hi2;
  P.minus2.bbox(lo1, hi1);
  P.plus2.bbox(lo2, hi2);
  Vec lo(std::min(lo1.c[0], lo2.c[0]), std::min(lo1.c[1], lo2.c[1]));
  Vec hi(std::max(hi1.c[0], hi2.c[0]), std::max(hi1.c[1], hi2.c[1]));
  if (std::isfinite(lo.c[0]) && std::isfinite(hi.c[0])) {
    int n = 96;
    double hx = (hi.c[0] - lo.c[0]) / n, hy = (hi.c[1] - lo.c[1]) / n;
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        Vec x(lo.c[0] + i * hx, lo.c[1] + j * hy);
        if (P.minus2.sdist(x) < 0 && P.plus2.sdist(x) < 0)
          throw DegenerateInput("facet pair: sides overlap");
      }
  }
  return P;
}

bool FacetPair::bounded() const {
  if (dim == 1) {
    IntervalSet u = minus1.unite(plus1);
    return !u.is_empty() && std::isinf(u.lo.front()) && std::isinf(u.hi.back());
  }
  return minus2.complemented || plus2.complemented;
}

FacetPair FacetPair::negated() const {
  FacetPair Q = *this;
  std::swap(Q.minus1, Q.plus1);
  std::swap(Q.minus2, Q.plus2);
  return Q;
}

IntervalSet nbd(const IntervalSet& A, double rho) { return A.nbd(rho); }

Region2D nbd(const Region2D& A, double rho, int resolution) {
  return nbd2(A, rho, resolution);
}

FacetPair pair_nbd(const FacetPair& P, double rho, int resolution) {
  FacetPair Q;
  Q.dim = P.dim;
  if (P.dim == 1) {
    Q.minus1 = P.minus1.nbd(-rho);
    Q.plus1 = P.plus1.nbd(rho);
  } else {
    Q.minus2 = nbd2(P.minus2, -rho, resolution);
    Q.plus2 = nbd2(P.plus2, rho, resolution);
  }
  return Q;
}

bool order(const FacetPair& P, const FacetPair& Q, double tol, int resolution) {
  if (P.dim != Q.dim) throw ConfigInvalid("order: dimension mismatch");
  if (P.dim == 1)
    return P.plus1.subset_of(Q.plus1, tol) && Q.minus1.subset_of(P.minus1, tol);
  // sampled inclusions, skipping a band of width tol around boundaries
  auto includes = [&](const Region2D& A, const Region2D& B) {
    // A subset of B?
    Vec lo, hi, lo2, hi2;
    A.bbox(lo, hi);
    B.bbox(lo2, hi2);
    lo = Vec(std::min(lo.c[0], lo2.c[0]), std::min(lo.c[1], lo2.c[1]));
    hi = Vec(std::max(hi.c[0], hi2.c[0]), std::max(hi.c[1], hi2.c[1]));
    if (!std::isfinite(lo.c[0])) return A.is_empty() || B.is_whole();
    double pad = 0.05 * dist(lo, hi) + tol;
    lo = lo + Vec(-pad, -pad);
    hi = hi + Vec(pad, pad);
    double hx = (hi.c[0] - lo.c[0]) / resolution;
    double hy = (hi.c[1] - lo.c[1]) / resolution;
    for (int j = 0; j <= resolution; ++j)
      for (int i = 0; i <= resolution; ++i) {
        Vec x(lo.c[0] + i * hx, lo.c[1] + j * hy);
        double da = A.sdist(x);
        if (da < -tol && B.sdist(x) > tol) return false;
      }
    // far field via flags
    if (A.complemented && !B.complemented) return false;
    return true;
  };
  return includes(P.plus2, Q.plus2) && includes(Q.minus2, P.minus2);
}

SampledFn support_function(const FacetPair& P, int resolution) {
  SampledFn psi;
  psi.dim = P.dim;
  if (P.dim == 1) {
    double a = kInf, b = -kInf;
    for (const IntervalSet* s : {&P.minus1, &P.plus1})
      for (int i = 0; i < s->count(); ++i) {
        if (std::isfinite(s->lo[i])) a = std::min(a, s->lo[i]), b = std::max(b, s->lo[i]);
        if (std::isfinite(s->hi[i])) a = std::min(a, s->hi[i]), b = std::max(b, s->hi[i]);
      }
    if (!(a <= b)) a = -1, b = 1;
    double pad = 0.5 * (b - a) + 1.0;
    a -= pad;
    b += pad;
    psi.nx = resolution + 1;
    psi.h = (b - a) / resolution;
    psi.origin = Vec(a);
    psi.v.resize(psi.nx);
    for (int i = 0; i < psi.nx; ++i) {
      double x = a + i * psi.h;
      psi.v[i] = P.plus1.dist_comp(x) - P.minus1.dist_comp(x);
    }
    return psi;
  }
  Vec lo1, hi1, lo2, hi2;
  P.minus2.bbox(lo1, hi1);
  P.plus2.bbox(lo2, hi2);
  Vec lo(std::min(lo1.c[0], lo2.c[0]), std::min(lo1.c[1], lo2.c[1]));
  Vec hi(std::max(hi1.c[0], hi2.c[0]), std::max(hi1.c[1], hi2.c[1]));
  if (!std::isfinite(lo.c[0])) {
    lo = Vec(-1, -1);
    hi = Vec(1, 1);
  }
  double pad = 0.25 * dist(lo, hi) + 1e-6;
  lo = lo + Vec(-pad, -pad);
  hi = hi + Vec(pad, pad);
  double span = std::max(hi.c[0] - lo.c[0], hi.c[1] - lo.c[1]);
  psi.h = span / resolution;
  psi.nx = (int)std::ceil((hi.c[0] - lo.c[0]) / psi.h) + 1;
  psi.ny = (int)std::ceil((hi.c[1] - lo.c[1]) / psi.h) + 1;
  psi.origin = lo;
  psi.v.resize((size_t)psi.nx * psi.ny);
  for (int j = 0; j < psi.ny; ++j)
    for (int i = 0; i < psi.nx; ++i) {
      Vec x = psi.point(i, j);
      psi.at(i, j) = P.plus2.dist_to_comp(x) - P.minus2.dist_to_comp(x);
    }
  return psi;
}

FacetPair pair_of(const SampledFn& psi, double tau_zero) {
  if (tau_zero < 0) tau_zero = 0.5 * psi.h * psi.lipschitz();
  if (psi.dim == 1) {
    // exact sublevel intervals of the piecewise-linear interpolant
    auto level_set = [&](double sign) {
      std::vector<double> lo, hi;
      bool in = false;
      double start = 0;
      for (int i = 0; i < psi.nx; ++i) {
        double f = sign * psi.at(i) - tau_zero;
        double x = psi.origin.c[0] + i * psi.h;
        if (!in && f > 0) {
          if (i == 0) {
            start = -kInf;
          } else {
            double fp = sign * psi.at(i - 1) - tau_zero;
            start = x - psi.h * f / (f - fp);
          }
          in = true;
        } else if (in && f <= 0) {
          double fp = sign * psi.at(i - 1) - tau_zero;
          double end = (x - psi.h) + psi.h * fp / (fp - f);
          lo.push_back(start);
          hi.push_back(end);
          in = false;
        }
      }
      if (in) {
        lo.push_back(start);
        hi.push_back(kInf);
      }
      return make_intervals(lo, hi);
    };
    FacetPair P;
    P.dim = 1;
    P.plus1 = level_set(+1.0);
    P.minus1 = level_set(-1.0);
    return P;
  }
  FacetPair P;
  P.dim = 2;
  std::vector<double> neg(psi.v.size());
  for (size_t i = 0; i < psi.v.size(); ++i) neg[i] = -psi.v[i];
  P.plus2.loops = contour_grid(neg, psi.nx, psi.ny, psi.origin, psi.h, psi.h,
                               -tau_zero);
  P.plus2.complemented = psi.at(0, 0) > tau_zero;
  P.minus2.loops =
      contour_grid(psi.v, psi.nx, psi.ny, psi.origin, psi.h, psi.h, -tau_zero);
  P.minus2.complemented = psi.at(0, 0) < -tau_zero;
  return P;
}

double ThetaTable::operator()(double x) const {
  if (x <= 0 || s.empty()) return 0.0;
  if (x >= s.back()) return (1.0 - std::exp(-x)) * (x + m_final);
  auto it = std::upper_bound(s.begin(), s.end(), x);
  size_t k = it - s.begin();
  if (k == 0) return th.front() * (x / s.front());
  double t = (x - s[k - 1]) / (s[k] - s[k - 1]);
  return (1 - t) * th[k - 1] + t * th[k];
}

ThetaTable theta_ordering(const SampledFn& phi, const SampledFn& psi) {
  if (phi.v.size() != psi.v.size())
    throw ConfigInvalid("theta_ordering: sample counts differ");
  double scale = std::max(phi.max_abs(), psi.max_abs());
  double zero_tol = 1e-12 * (1.0 + scale);
  for (double x : phi.v)
    if (x < -zero_tol) throw ConfigInvalid("theta_ordering: phi must be >= 0");
  for (double x : psi.v)
    if (x < -zero_tol) throw ConfigInvalid("theta_ordering: psi must be >= 0");
  // The construction needs the zero sets to agree: a point with phi = 0 and
  // psi > 0 breaks nothing, but psi = 0 with phi > 0 forces theta = 0 at a
  // positive argument. We require equality so theta is a genuine modulus.
  for (size_t i = 0; i < phi.v.size(); ++i) {
    bool z1 = phi.v[i] <= zero_tol, z2 = psi.v[i] <= zero_tol;
    if (z1 != z2) throw NotNested("theta_ordering: zero sets differ");
  }

  std::vector<std::pair<double, double>> samples;  // (phi, psi)
  for (size_t i = 0; i < phi.v.size(); ++i)
    samples.push_back({std::max(phi.v[i], 0.0), std::max(psi.v[i], 0.0)});
  std::sort(samples.begin(), samples.end());
  // eta at node s = min psi over phi >= s: suffix minimum
  int n = (int)samples.size();
  std::vector<double> suffix(n + 1, kInf);
  for (int i = n - 1; i >= 0; --i)
    suffix[i] = std::min(suffix[i + 1], samples[i].second);
  std::vector<double> snode, eta;
  snode.push_back(0.0);
  eta.push_back(suffix[0]);  // min over all psi
  for (int i = 0; i < n; ++i) {
    if (samples[i].first <= zero_tol) continue;
    if (!snode.empty() && samples[i].first <= snode.back() + zero_tol) continue;
    snode.push_back(samples[i].first);
    eta.push_back(suffix[i]);
  }
  // sigma(s) = s + min_{s_j <= s} (eta_j - s_j); prefix minimum over nodes
  std::vector<double> m(snode.size());
  double run = kInf;
  for (size_t j = 0; j < snode.size(); ++j) {
    run = std::min(run, eta[j] - snode[j]);
    m[j] = run;
  }
  ThetaTable T;
  for (size_t j = 0; j < snode.size(); ++j) {
    T.s.push_back(snode[j]);
    T.th.push_back((1.0 - std::exp(-snode[j])) * (snode[j] + m[j]));
    if (j + 1 < snode.size()) {
      double mid = 0.5 * (snode[j] + snode[j + 1]);
      T.s.push_back(mid);
      T.th.push_back((1.0 - std::exp(-mid)) * (mid + m[j]));
    }
  }
  T.m_final = m.back();
  return T;
}

namespace {

double parse_endpoint(const std::string& tok) {
  if (tok == "inf" || tok == "+inf") return kInf;
  if (tok == "-inf") return -kInf;
  return std::stod(tok);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    size_t a = cell.find_first_not_of(" \t\r");
    size_t b = cell.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  return out;
}

}  // namespace

FacetPair load_pair_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open pair file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ConfigInvalid("empty pair file: " + path);
  std::vector<std::string> cols = split_csv(header);
  std::string line;
  if (cols.size() == 3 && cols[0] == "lo") {
    std::vector<double> mlo, mhi, plo, phi;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> c = split_csv(line);
      if (c.size() != 3) throw ConfigInvalid("pair file: bad row: " + line);
      double a = parse_endpoint(c[0]), b = parse_endpoint(c[1]);
      if (c[2] == "minus") {
        mlo.push_back(a);
        mhi.push_back(b);
      } else if (c[2] == "plus") {
        plo.push_back(a);
        phi.push_back(b);
      } else {
        throw ConfigInvalid("pair file: bad side: " + c[2]);
      }
    }
    return FacetPair::make1d(make_intervals(mlo, mhi), make_intervals(plo, phi));
  }
  if (cols.size() == 4 && cols[0] == "loop") {
    Region2D minus, plus;
    int cur_loop = -1;
    std::string cur_side;
    Loop L;
    auto flush = [&]() {
      if (L.pts.size() >= 3) {
        bool comp = cur_side.size() > 2 && cur_side.substr(cur_side.size() - 2) == "_c";
        std::string side = comp ? cur_side.substr(0, cur_side.size() - 2) : cur_side;
        Region2D& R = side == "minus" ? minus : plus;
        R.loops.push_back(L);
        if (comp) R.complemented = true;
      }
      L.pts.clear();
    };
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> c = split_csv(line);
      if (c.size() != 4) throw ConfigInvalid("pair file: bad row: " + line);
      int id = std::stoi(c[0]);
      if (id != cur_loop) {
        flush();
        cur_loop = id;
        cur_side = c[3];
      }
      L.pts.push_back(Vec(std::stod(c[1]), std::stod(c[2])));
    }
    flush();
    return FacetPair::make2d(minus, plus);
  }
  throw ConfigInvalid("pair file: unrecognized header: " + header);
}

void save_pair_csv(const FacetPair& P, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigInvalid("cannot write pair file: " + path);
  out.precision(17);
  auto endp = [](double x) -> std::string {
    if (x == kInf) return "inf";
    if (x == -kInf) return "-inf";
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  };
  if (P.dim == 1) {
    out << "lo,hi,side\n";
    for (int i = 0; i < P.minus1.count(); ++i)
      out << endp(P.minus1.lo[i]) << "," << endp(P.minus1.hi[i]) << ",minus\n";
    for (int i = 0; i < P.plus1.count(); ++i)
      out << endp(P.plus1.lo[i]) << "," << endp(P.plus1.hi[i]) << ",plus\n";
    return;
  }
  out << "loop,x,y,side\n";
  int id = 0;
  auto dump = [&](const Region2D& R, const std::string& side) {
    std::string tag = R.complemented ? side + "_c" : side;
    for (const Loop& L : R.loops) {
      for (const Vec& p : L.pts)
        out << id << "," << p.c[0] << "," << p.c[1] << "," << tag << "\n";
      ++id;
    }
  };
  dump(P.minus2, "minus");
  dump(P.plus2, "plus");
}

}  // namespace cf
