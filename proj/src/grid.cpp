#include "crystalflow/grid.hpp"

#include <cmath>

#include "crystalflow/errors.hpp"

namespace cf {

double GridFn::max_abs() const {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double GridFn::max_abs_diff(const GridFn& o) const {
  double m = 0;
  for (size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i] - o.v[i]));
  return m;
}

namespace {

// iterate cells as (i, j, l) with strides matching GridTorus::idx
template <class F>
void for_cells(const GridTorus& g, F&& f) {
  int nj = g.k >= 2 ? g.N : 1;
  int nl = g.k >= 3 ? g.N : 1;
  for (int l = 0; l < nl; ++l)
    for (int j = 0; j < nj; ++j)
      for (int i = 0; i < g.N; ++i) f(i, j, l);
}

}  // namespace

GridVecField dplus(const GridFn& f) {
  GridVecField z(f.g);
  const double ih = 1.0 / f.g.h();
  const GridTorus& g = f.g;
  for_cells(g, [&](int i, int j, int l) {
    size_t c = g.idx(i, j, l);
    z.at(c, 0) = (f.v[g.idx(i + 1, j, l)] - f.v[c]) * ih;
    if (g.k >= 2) z.at(c, 1) = (f.v[g.idx(i, j + 1, l)] - f.v[c]) * ih;
    if (g.k >= 3) z.at(c, 2) = (f.v[g.idx(i, j, l + 1)] - f.v[c]) * ih;
  });
  return z;
}

GridFn dminus(const GridVecField& z) {
  GridFn f(z.g);
  const double ih = 1.0 / z.g.h();
  const GridTorus& g = z.g;
  for_cells(g, [&](int i, int j, int l) {
    size_t c = g.idx(i, j, l);
    double s = z.at(c, 0) - z.at(g.idx(i - 1, j, l), 0);
    if (g.k >= 2) s += z.at(c, 1) - z.at(g.idx(i, j - 1, l), 1);
    if (g.k >= 3) s += z.at(c, 2) - z.at(g.idx(i, j, l - 1), 2);
    f.v[c] = s * ih;
  });
  return f;
}

double inner(const GridFn& a, const GridFn& b) {
  if (!a.g.same_shape(b.g)) throw ConfigInvalid("inner: grid mismatch");
  double s = 0;
  for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s * std::pow(a.g.h(), a.g.k);
}

double inner(const GridVecField& a, const GridVecField& b) {
  if (!a.g.same_shape(b.g)) throw ConfigInvalid("inner: grid mismatch");
  double s = 0;
  for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s * std::pow(a.g.h(), a.g.k);
}

double norm2(const GridFn& a) { return std::sqrt(inner(a, a)); }

double grad_sup(const GridFn& f) {
  GridVecField z = dplus(f);
  double m = 0;
  for (double x : z.v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace cf
