#include "crystalflow/intervals.hpp"

#include <algorithm>
#include <cmath>

#include "crystalflow/errors.hpp"

namespace cf {

IntervalSet IntervalSet::whole() {
  IntervalSet s;
  s.lo.push_back(-kInf);
  s.hi.push_back(kInf);
  return s;
}

IntervalSet IntervalSet::open(double a, double b) {
  IntervalSet s;
  if (a < b) {
    s.lo.push_back(a);
    s.hi.push_back(b);
  }
  return s;
}

IntervalSet make_intervals(std::vector<double> lo, std::vector<double> hi) {
  if (lo.size() != hi.size()) throw ConfigInvalid("make_intervals: size mismatch");
  std::vector<size_t> idx(lo.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return lo[i] < lo[j]; });
  IntervalSet s;
  for (size_t i : idx) {
    if (!(lo[i] < hi[i])) continue;  // empty or NaN
    if (!s.lo.empty() && lo[i] < s.hi.back()) {
      s.hi.back() = std::max(s.hi.back(), hi[i]);  // genuine overlap merges
    } else {
      s.lo.push_back(lo[i]);
      s.hi.push_back(hi[i]);
    }
  }
  return s;
}

bool IntervalSet::contains(double x) const {
  for (int i = 0; i < count(); ++i)
    if (x > lo[i] && x < hi[i]) return true;
  return false;
}

double IntervalSet::dist(double x) const {
  if (is_empty()) return kInf;
  double d = kInf;
  for (int i = 0; i < count(); ++i) {
    if (x > lo[i] && x < hi[i]) return 0.0;
    d = std::min(d, std::min(std::abs(x - lo[i]), std::abs(x - hi[i])));
  }
  return d;
}

double IntervalSet::dist_comp(double x) const {
  for (int i = 0; i < count(); ++i)
    if (x > lo[i] && x < hi[i]) return std::min(x - lo[i], hi[i] - x);
  return 0.0;
}

double IntervalSet::measure() const {
  double m = 0;
  for (int i = 0; i < count(); ++i) m += hi[i] - lo[i];
  return m;
}

bool IntervalSet::bounded() const {
  if (is_empty()) return true;
  return std::isfinite(lo.front()) && std::isfinite(hi.back());
}

IntervalSet IntervalSet::nbd(double rho) const {
  IntervalSet s;
  if (rho == 0.0) return *this;
  if (rho > 0) {
    // {dist(.,A) < rho}: components grow; merge only on strict overlap so a
    // pinch point (gap exactly closed) stays excluded.
    for (int i = 0; i < count(); ++i) {
      double a = lo[i] - rho, b = hi[i] + rho;
      if (!s.lo.empty() && a < s.hi.back()) {
        s.hi.back() = std::max(s.hi.back(), b);
      } else {
        s.lo.push_back(a);
        s.hi.push_back(b);
      }
    }
    return s;
  }
  double r = -rho;
  for (int i = 0; i < count(); ++i) {
    double a = std::isinf(lo[i]) ? -kInf : lo[i] + r;
    double b = std::isinf(hi[i]) ? kInf : hi[i] - r;
    if (a < b) {
      s.lo.push_back(a);
      s.hi.push_back(b);
    }
  }
  return s;
}

IntervalSet IntervalSet::interior_closure() const {
  IntervalSet s;
  for (int i = 0; i < count(); ++i) {
    if (!s.lo.empty() && lo[i] <= s.hi.back()) {
      s.hi.back() = std::max(s.hi.back(), hi[i]);
    } else {
      s.lo.push_back(lo[i]);
      s.hi.push_back(hi[i]);
    }
  }
  return s;
}

IntervalSet IntervalSet::complement_interior() const {
  IntervalSet s;
  if (is_empty()) return whole();
  if (std::isfinite(lo.front())) {
    s.lo.push_back(-kInf);
    s.hi.push_back(lo.front());
  }
  for (int i = 0; i + 1 < count(); ++i) {
    if (hi[i] < lo[i + 1]) {
      s.lo.push_back(hi[i]);
      s.hi.push_back(lo[i + 1]);
    }
    // hi[i] == lo[i+1]: the complement there is the single point, empty interior
  }
  if (std::isfinite(hi.back())) {
    s.lo.push_back(hi.back());
    s.hi.push_back(kInf);
  }
  return s;
}

IntervalSet IntervalSet::unite(const IntervalSet& o) const {
  std::vector<double> a = lo, b = hi;
  a.insert(a.end(), o.lo.begin(), o.lo.end());
  b.insert(b.end(), o.hi.begin(), o.hi.end());
  // make_intervals merges strict overlaps only; also merge exact seams where
  // one component ends exactly where another begins and the union covers the
  // seam point (x belongs to neither open piece but to the union iff it is
  // interior to one of the inputs).
  IntervalSet u = make_intervals(a, b);
  IntervalSet out;
  for (int i = 0; i < u.count(); ++i) {
    if (!out.lo.empty() && u.lo[i] == out.hi.back() &&
        (contains(u.lo[i]) || o.contains(u.lo[i]))) {
      out.hi.back() = u.hi[i];
    } else {
      out.lo.push_back(u.lo[i]);
      out.hi.push_back(u.hi[i]);
    }
  }
  return out;
}

IntervalSet IntervalSet::intersect(const IntervalSet& o) const {
  IntervalSet s;
  for (int i = 0; i < count(); ++i)
    for (int j = 0; j < o.count(); ++j) {
      double a = std::max(lo[i], o.lo[j]);
      double b = std::min(hi[i], o.hi[j]);
      if (a < b) {
        s.lo.push_back(a);
        s.hi.push_back(b);
      }
    }
  return make_intervals(s.lo, s.hi);
}

bool IntervalSet::subset_of(const IntervalSet& o, double tol) const {
  // Walk each component across o, allowing uncovered slack of width <= tol
  // (seam points and roundoff); anything wider is a genuine violation.
  for (int i = 0; i < count(); ++i) {
    double left = lo[i];
    const double b = hi[i];
    while (left < b - tol) {
      int j = -1;
      for (int jj = 0; jj < o.count(); ++jj)
        if (o.lo[jj] <= left + tol && left + tol < o.hi[jj] + tol &&
            (j < 0 || o.hi[jj] > o.hi[j]))
          j = jj;
      if (j < 0) return false;
      if (o.hi[j] >= b) break;
      if (o.hi[j] <= left) return false;
      left = o.hi[j];
    }
  }
  return true;
}

bool IntervalSet::same_as(const IntervalSet& o, double tol) const {
  if (count() != o.count()) return false;
  for (int i = 0; i < count(); ++i) {
    auto close = [tol](double x, double y) {
      if (std::isinf(x) || std::isinf(y)) return x == y;
      return std::abs(x - y) <= tol;
    };
    if (!close(lo[i], o.lo[i]) || !close(hi[i], o.hi[i])) return false;
  }
  return true;
}

}  // namespace cf
