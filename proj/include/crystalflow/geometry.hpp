#pragma once
#include <array>
#include <cassert>
#include <cmath>
#include <vector>

namespace cf {

// Point/vector in R^d, d <= 3, runtime dimension. POD, no allocation.
struct Vec {
  int dim = 0;
  std::array<double, 3> c{{0.0, 0.0, 0.0}};

  Vec() = default;
  explicit Vec(double x) : dim(1), c{{x, 0, 0}} {}
  Vec(double x, double y) : dim(2), c{{x, y, 0}} {}
  Vec(double x, double y, double z) : dim(3), c{{x, y, z}} {}

  static Vec zero(int d) {
    Vec v;
    v.dim = d;
    return v;
  }
  static Vec axis(int d, int i, double s = 1.0) {
    Vec v = zero(d);
    v.c[i] = s;
    return v;
  }

  double& operator[](int i) { return c[i]; }
  double operator[](int i) const { return c[i]; }

  Vec operator+(const Vec& o) const {
    Vec r = *this;
    for (int i = 0; i < dim; ++i) r.c[i] += o.c[i];
    return r;
  }
  Vec operator-(const Vec& o) const {
    Vec r = *this;
    for (int i = 0; i < dim; ++i) r.c[i] -= o.c[i];
    return r;
  }
  Vec operator*(double s) const {
    Vec r = *this;
    for (int i = 0; i < dim; ++i) r.c[i] *= s;
    return r;
  }
  Vec operator-() const { return *this * -1.0; }
  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < dim; ++i) c[i] += o.c[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < dim; ++i) c[i] -= o.c[i];
    return *this;
  }

  double dot(const Vec& o) const {
    double s = 0;
    for (int i = 0; i < dim; ++i) s += c[i] * o.c[i];
    return s;
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  Vec normalized(double eps = 0.0) const {
    double n = norm();
    return n > eps ? *this * (1.0 / n) : zero(dim);
  }
  // 2D only: rotate by +90 degrees.
  Vec perp() const {
    assert(dim == 2);
    return Vec(-c[1], c[0]);
  }
  Vec cross(const Vec& o) const {
    assert(dim == 3);
    return Vec(c[1] * o.c[2] - c[2] * o.c[1], c[2] * o.c[0] - c[0] * o.c[2],
               c[0] * o.c[1] - c[1] * o.c[0]);
  }
};

inline Vec operator*(double s, const Vec& v) { return v * s; }
inline double dot(const Vec& a, const Vec& b) { return a.dot(b); }
inline double dist(const Vec& a, const Vec& b) { return (a - b).norm(); }

inline double cross2(const Vec& a, const Vec& b) { return a[0] * b[1] - a[1] * b[0]; }

// Distance from x to segment [a, b]; closest point optionally reported.
inline double segment_dist(const Vec& x, const Vec& a, const Vec& b, Vec* closest = nullptr) {
  Vec d = b - a;
  double l2 = d.norm2();
  double t = l2 > 0 ? (x - a).dot(d) / l2 : 0.0;
  t = std::fmin(1.0, std::fmax(0.0, t));
  Vec p = a + d * t;
  if (closest) *closest = p;
  return dist(x, p);
}

inline Vec rotate2(const Vec& v, double angle, const Vec& pivot = Vec(0.0, 0.0)) {
  double cs = std::cos(angle), sn = std::sin(angle);
  Vec r = v - pivot;
  return Vec(pivot[0] + cs * r[0] - sn * r[1], pivot[1] + sn * r[0] + cs * r[1]);
}

}  // namespace cf
