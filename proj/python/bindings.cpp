#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crystalflow/anisotropy.hpp"
#include "crystalflow/errors.hpp"
#include "crystalflow/facet1d.hpp"
#include "crystalflow/levelset.hpp"
#include "crystalflow/pairs.hpp"
#include "crystalflow/tvflow.hpp"

namespace py = pybind11;
using namespace cf;

namespace {

Vec to_vec(const std::vector<double>& c) {
  if (c.empty() || c.size() > 3) throw ConfigInvalid("vectors have 1-3 components");
  Vec v = Vec::zero((int)c.size());
  for (size_t i = 0; i < c.size(); ++i) v[(int)i] = c[i];
  return v;
}

py::array_t<double> vecs_to_array(const std::vector<Vec>& vs, int dim) {
  py::array_t<double> out({(py::ssize_t)vs.size(), (py::ssize_t)dim});
  auto r = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < (py::ssize_t)vs.size(); ++i)
    for (int d = 0; d < dim; ++d) r(i, d) = vs[i][d];
  return out;
}

PolyhedralFn make_from_array(py::array_t<double, py::array::c_style> a,
                             std::vector<double> b, std::string name) {
  if (a.ndim() != 2) throw ConfigInvalid("pieces array must be 2-d");
  int n = (int)a.shape(0), dim = (int)a.shape(1);
  if (b.empty()) b.assign(n, 0.0);
  if ((int)b.size() != n) throw ConfigInvalid("offsets must match piece count");
  auto r = a.unchecked<2>();
  std::vector<Vec> rows;
  for (int i = 0; i < n; ++i) {
    Vec v = Vec::zero(dim);
    for (int d = 0; d < dim; ++d) v[d] = r(i, d);
    rows.push_back(v);
  }
  return make_polyhedral(dim, rows, b, std::move(name));
}

GridFn grid_from_array(py::array_t<double, py::array::c_style> arr, double L) {
  GridTorus gt;
  gt.k = (int)arr.ndim();
  if (gt.k < 1 || gt.k > 3) throw ConfigInvalid("grid must be 1-, 2- or 3-d");
  gt.N = (int)arr.shape(0);
  for (int d = 1; d < gt.k; ++d)
    if ((int)arr.shape(d) != gt.N) throw ConfigInvalid("grid must be square");
  gt.L = L;
  GridFn f(gt);
  // numpy row-major: arr[j, i] pairs with the x-fastest layout of GridFn
  std::memcpy(f.v.data(), arr.data(), sizeof(double) * f.v.size());
  return f;
}

py::array_t<double> grid_to_array(const GridFn& f) {
  std::vector<py::ssize_t> shape(f.g.k, f.g.N);
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), f.v.data(), sizeof(double) * f.v.size());
  return out;
}

IntervalSet intervals_from_list(const std::vector<std::pair<double, double>>& iv) {
  std::vector<double> lo, hi;
  for (auto& [a, b] : iv) {
    lo.push_back(a);
    hi.push_back(b);
  }
  return make_intervals(lo, hi);
}

}  // namespace

PYBIND11_MODULE(_crystalflow, mod) {
  mod.doc() = "crystalline curvature flow core";

  py::register_exception<Error>(mod, "FlowError");

  py::class_<PolyhedralFn>(mod, "Anisotropy")
      .def(py::init(&make_from_array), py::arg("pieces"),
           py::arg("offsets") = std::vector<double>{}, py::arg("name") = "")
      .def_static("load", &load_anisotropy, py::arg("path"))
      .def_readonly("dim", &PolyhedralFn::dim)
      .def_readonly("name", &PolyhedralFn::name)
      .def_property_readonly("pieces", &PolyhedralFn::pieces)
      .def("__call__",
           [](const PolyhedralFn& W, std::vector<double> p) {
             return W.eval(to_vec(p));
           })
      .def("polar", [](const PolyhedralFn& W) { return polar(W); })
      .def("wulff_vertices",
           [](const PolyhedralFn& W) {
             return vecs_to_array(wulff(W).vertices, W.dim);
           })
      .def("__repr__", [](const PolyhedralFn& W) {
        return "<Anisotropy '" + W.name + "' dim=" + std::to_string(W.dim) +
               " pieces=" + std::to_string(W.pieces()) + ">";
      });

  mod.def(
      "resolvent",
      [](const PolyhedralFn& W, py::array_t<double, py::array::c_style> psi,
         double L, double a, double tol) {
        ResolventResult r = resolvent(W, grid_from_array(psi, L), a, tol);
        py::dict out;
        out["psi_a"] = grid_to_array(r.psi_a);
        out["h_a"] = grid_to_array(r.h_a);
        out["residual"] = r.residual;
        out["iterations"] = r.iterations;
        return out;
      },
      py::arg("W"), py::arg("psi"), py::arg("L"), py::arg("a"),
      py::arg("tol") = 1e-9,
      "prox of a*E_W of a periodic sample; returns psi_a and h_a = (psi_a-psi)/a");

  mod.def(
      "facet_curvature_1d",
      [](const PolyhedralFn& W,
         const std::vector<std::pair<double, double>>& minus,
         const std::vector<std::pair<double, double>>& plus, double rho1,
         double rho2) {
        FacetPair A = FacetPair::make1d(intervals_from_list(minus),
                                        intervals_from_list(plus));
        Facet1DResult res = admissible_approx_1d(W, A, rho1, rho2);
        py::list facets;
        for (int i = 0; i < res.facet_count(); ++i) {
          py::dict f;
          f["lo"] = res.facet_lo(i);
          f["hi"] = res.facet_hi(i);
          f["div_z"] = lambda_1d_exact(res, i);
          facets.append(f);
        }
        return facets;
      },
      py::arg("W"), py::arg("minus"), py::arg("plus"), py::arg("rho1") = 0.0,
      py::arg("rho2") = 0.2,
      "exact divergence of the admissible field on each 1-d facet");

  mod.def(
      "facet_curvature",
      [](const PolyhedralFn& W, std::vector<double> p,
         const std::vector<std::pair<double, double>>& minus,
         const std::vector<std::pair<double, double>>& plus, int N) {
        FacetPair pair = FacetPair::make1d(intervals_from_list(minus),
                                           intervals_from_list(plus));
        SampledFn psi_bar = support_function(pair);
        LambdaResult L = lambda_p(W, to_vec(p), psi_bar, pair, N);
        return py::make_tuple(L.ess_inf, L.ess_sup);
      },
      py::arg("W"), py::arg("p"), py::arg("minus"), py::arg("plus"),
      py::arg("N") = 0,
      "essential range of the facet curvature at gradient p (1-d slice pair)");

  mod.def(
      "evolve",
      [](const PolyhedralFn& W, const std::string& shape, double c0, double c1,
         int m, int grid, double T, double domain, int snapshots) {
        SpeedLaw f = (c0 == 0.0 && c1 == 1.0) ? SpeedLaw::kappa()
                                              : SpeedLaw::linear(c0, c1);
        EvolveOptions opt;
        opt.N = grid;
        opt.boxL = domain;
        opt.n_snapshots = snapshots;
        opt.keep_fields = false;
        Region2D D0 = make_shape(shape, W);
        Trajectory traj = evolve_crystal(D0, f, W, m, T, opt);

        py::list times, lenx, leny, vol, contours;
        for (const Snapshot& sn : traj.snaps) {
          times.append(sn.t);
          lenx.append(sn.len_x);
          leny.append(sn.len_y);
          vol.append(sn.volume);
          py::list loops;
          for (const Loop& lp : sn.zero_set)
            loops.append(vecs_to_array(lp.pts, 2));
          contours.append(loops);
        }
        py::dict out;
        out["t"] = times;
        out["len_x"] = lenx;
        out["len_y"] = leny;
        out["volume"] = vol;
        out["contours"] = contours;
        return out;
      },
      py::arg("W"), py::arg("shape"), py::arg("c0") = 0.0, py::arg("c1") = 1.0,
      py::arg("m") = 64, py::arg("grid") = 129, py::arg("T") = 0.05,
      py::arg("domain") = 5.0, py::arg("snapshots") = 5,
      "level-set evolution V = c0 + c1*curvature; returns snapshot series");
}
