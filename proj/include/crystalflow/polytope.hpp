#pragma once
#include <vector>

#include "crystalflow/geometry.hpp"

namespace cf {

struct Halfspace {
  Vec n;     // constraint n·x <= c; for lower-dimensional sets n lies in the
  double c;  // direction space of the affine hull
};

// Convex polytope in R^dim, possibly lower-dimensional. Vertices are the
// extreme points; halfspaces cut the set out of its affine hull (origin +
// span(basis)). For affdim <= 2 the halfspaces are the edge/endpoint
// constraints; for affdim == 3 the facet planes.
struct Polytope {
  int dim = 0;
  std::vector<Vec> vertices;
  std::vector<Halfspace> halfspaces;
  Vec origin;
  std::vector<Vec> basis;  // orthonormal, size == affdim
  int affdim = 0;

  bool empty() const { return vertices.empty(); }
  Vec centroid() const;
  double support(const Vec& p) const;  // max p·v over vertices
  Vec argsupport(const Vec& p) const;
  Vec project(const Vec& x) const;  // nearest point (Dykstra for full 3D)
  bool contains(const Vec& x, double tol) const;
  bool same_set(const Polytope& o, double tol) const;
  double circumradius() const;  // max |v|
  // Coordinates of (x - origin) in the orthonormal basis (size affdim).
  std::vector<double> hull_coords(const Vec& x) const;
  // Distance from x to the affine hull.
  double hull_dist(const Vec& x) const;
};

// Face of a polytope: the cells of its boundary complex plus the whole set.
struct Face {
  int dim;                     // intrinsic dimension of the face
  std::vector<int> verts;      // indices into Polytope::vertices
  std::vector<int> halfspaces; // incident facet constraints (empty for the whole set)
};

Polytope make_polytope(int dim, std::vector<Vec> pts, double tol);

// All proper faces ordered by dimension, then the whole polytope last.
std::vector<Face> face_lattice(const Polytope& P, double tol);

// Vertices of {x in R^2 : n_i·x <= c_i}; the feasible set must be bounded
// with nonempty interior.
Polytope polytope_from_halfplanes_2d(const std::vector<Halfspace>& hs, double tol);

}  // namespace cf
