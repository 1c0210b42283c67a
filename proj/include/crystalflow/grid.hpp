#pragma once
#include <cstddef>
#include <vector>

#include "crystalflow/geometry.hpp"

namespace cf {

// Periodic grid R^k / L Z^k with N samples per axis.
struct GridTorus {
  int k = 1;
  double L = 1.0;
  int N = 8;

  double h() const { return L / N; }
  size_t size() const {
    size_t s = 1;
    for (int d = 0; d < k; ++d) s *= (size_t)N;
    return s;
  }
  int wrap(int i) const {
    i %= N;
    return i < 0 ? i + N : i;
  }
  size_t idx(int i, int j = 0, int l = 0) const {
    size_t s = (size_t)wrap(i);
    if (k >= 2) s += (size_t)wrap(j) * N;
    if (k >= 3) s += (size_t)wrap(l) * N * N;
    return s;
  }
  bool same_shape(const GridTorus& o) const {
    return k == o.k && N == o.N && L == o.L;
  }
};

struct GridFn {
  GridTorus g;
  std::vector<double> v;

  GridFn() = default;
  explicit GridFn(GridTorus gt, double fill = 0.0)
      : g(gt), v(gt.size(), fill) {}
  double& at(int i, int j = 0, int l = 0) { return v[g.idx(i, j, l)]; }
  double at(int i, int j = 0, int l = 0) const { return v[g.idx(i, j, l)]; }
  double max_abs() const;
  double max_abs_diff(const GridFn& o) const;
};

// k-vector field; component c of cell i stored at v[i*k + c].
struct GridVecField {
  GridTorus g;
  std::vector<double> v;

  GridVecField() = default;
  explicit GridVecField(GridTorus gt) : g(gt), v(gt.size() * gt.k, 0.0) {}
  double& at(size_t cell, int c) { return v[cell * g.k + c]; }
  double at(size_t cell, int c) const { return v[cell * g.k + c]; }
};

GridVecField dplus(const GridFn& f);   // forward differences
GridFn dminus(const GridVecField& z);  // backward divergence (adjoint: <D+f,z> = -<f,D-z>)
double inner(const GridFn& a, const GridFn& b);        // h^k weighted
double inner(const GridVecField& a, const GridVecField& b);
double norm2(const GridFn& a);
double grad_sup(const GridFn& f);  // max |D+f| componentwise

}  // namespace cf
