#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "crystalflow/anisotropy.hpp"
#include "crystalflow/errors.hpp"
#include "crystalflow/facet1d.hpp"
#include "crystalflow/facet2d.hpp"
#include "crystalflow/io.hpp"
#include "crystalflow/levelset.hpp"
#include "crystalflow/pairs.hpp"
#include "crystalflow/tvflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cf;

namespace {

struct Global {
  std::string config_path;
  std::string out = "out";
  long seed = 0;
  int jobs = 1;
  std::string log_level = "info";
  Config cfg;

  bool verbose() const { return log_level != "quiet"; }
};

void info(const Global& g, const std::string& msg) {
  if (g.verbose()) std::cerr << msg << "\n";
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_doubles(s)) out.push_back((int)std::lround(v));
  return out;
}

Vec parse_vec(const std::string& s) {
  std::vector<double> c = parse_doubles(s);
  if (c.empty() || c.size() > 3)
    throw ConfigInvalid("expected 1-3 comma-separated components: " + s);
  Vec v = Vec::zero((int)c.size());
  for (size_t i = 0; i < c.size(); ++i) v[(int)i] = c[i];
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Run manifest: sorted keys, no timestamps, every effective value recorded.
struct Manifest {
  json j;
  fs::path dir;

  Manifest(const Global& g, const std::string& command) {
    fs::create_directories(g.out);
    dir = g.out;
    j["command"] = command;
    j["seed"] = g.seed;
    j["jobs"] = g.jobs;
    j["version"] = {{"crystalflow", "0.1.0"},
                    {"grid_format", "CFG1/CFB1 float64"}};
    j["params"] = json::object();
    j["outputs"] = json::object();
  }
  void param(const std::string& k, const json& v) { j["params"][k] = v; }
  fs::path path(const std::string& name) const { return dir / name; }
  void record(const std::string& name) {
    j["outputs"][name] = hex64(fnv1a_file((dir / name).string()));
  }
  void write() {
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << "\n";
  }
};

SpeedLaw parse_speed(const std::string& spec) {
  if (spec == "builtin:kappa") return SpeedLaw::kappa();
  if (spec == "builtin:kappa-plus-one") return SpeedLaw::kappa_plus_one();
  if (spec.rfind("builtin:", 0) == 0)
    throw ConfigInvalid("unknown builtin speed law: " + spec);
  std::ifstream in(spec);
  if (!in) throw ConfigInvalid("cannot open speed file: " + spec);
  double c0, c1;
  if (!(in >> c0 >> c1))
    throw ConfigInvalid("speed file must contain two reals c0 c1: " + spec);
  SpeedLaw s = SpeedLaw::linear(c0, c1);
  s.name = spec;
  return s;
}

void write_series_csv(const fs::path& p, const Trajectory& traj) {
  std::ofstream out(p);
  out << "t,len_x,len_y,volume\n";
  for (const Snapshot& sn : traj.snaps)
    out << fmt(sn.t) << "," << fmt(sn.len_x) << "," << fmt(sn.len_y) << ","
        << fmt(sn.volume) << "\n";
}

// ---- subcommand payloads ---------------------------------------------------

int cmd_anisotropy_inspect(const Global& g, const std::string& file) {
  PolyhedralFn W = load_anisotropy(file);
  auto ss = strata(W);
  std::ostringstream table;
  table << "stratum,k,representative,subdiff_vertices\n";
  for (size_t i = 0; i < ss.size(); ++i) {
    const Stratum& s = ss[i];
    table << i << "," << s.k << ",\"";
    for (int d = 0; d < W.dim; ++d)
      table << (d ? ";" : "") << fmt(s.representative[d]);
    table << "\",\"";
    for (size_t v = 0; v < s.subdiff.vertices.size(); ++v) {
      if (v) table << "|";
      for (int d = 0; d < W.dim; ++d)
        table << (d ? ";" : "") << fmt(s.subdiff.vertices[v][d]);
    }
    table << "\"\n";
  }
  std::ostringstream wtab;
  wtab << "vertex";
  for (int d = 0; d < W.dim; ++d) wtab << ",x" << d;
  wtab << "\n";
  Polytope K = wulff(W);
  for (size_t v = 0; v < K.vertices.size(); ++v) {
    wtab << v;
    for (int d = 0; d < W.dim; ++d) wtab << "," << fmt(K.vertices[v][d]);
    wtab << "\n";
  }
  std::cout << table.str() << "\n" << wtab.str();

  Manifest man(g, "anisotropy inspect");
  man.param("anisotropy", file);
  man.param("name", W.name);
  man.param("dim", W.dim);
  man.param("pieces", W.pieces());
  {
    std::ofstream f1(man.path("strata.csv"));
    f1 << table.str();
    std::ofstream f2(man.path("wulff.csv"));
    f2 << wtab.str();
  }
  man.record("strata.csv");
  man.record("wulff.csv");
  man.write();
  return 0;
}

int cmd_pairs_nbd(const Global& g, const std::string& pairfile, double rho,
                  int resolution) {
  FacetPair P = load_pair_csv(pairfile);
  FacetPair Q = pair_nbd(P, rho, resolution);
  Manifest man(g, "pairs nbd");
  man.param("pair", pairfile);
  man.param("rho", rho);
  man.param("resolution", resolution);
  save_pair_csv(Q, man.path("pair_nbd.csv").string());
  man.record("pair_nbd.csv");
  man.write();
  info(g, "wrote " + man.path("pair_nbd.csv").string());
  return 0;
}

int cmd_pairs_order(const Global& g, const std::string& fa,
                    const std::string& fb, double tol, int resolution) {
  FacetPair A = load_pair_csv(fa);
  FacetPair B = load_pair_csv(fb);
  bool r = order(A, B, tol, resolution);
  std::cout << "ordered," << (r ? "true" : "false") << "\n";
  Manifest man(g, "pairs order");
  man.param("pair", fa);
  man.param("pair2", fb);
  man.param("tol", tol);
  man.param("resolution", resolution);
  man.j["result"] = r;
  man.write();
  return 0;
}

int cmd_facet1d(const Global& g, const std::string& wfile,
                const std::string& pairfile, double rho1, double rho2) {
  PolyhedralFn W = load_anisotropy(wfile);
  FacetPair A = load_pair_csv(pairfile);
  Facet1DResult res = admissible_approx_1d(W, A, rho1, rho2);

  Manifest man(g, "facet1d build");
  man.param("anisotropy", wfile);
  man.param("pair", pairfile);
  man.param("rho1", rho1);
  man.param("rho2", rho2);

  auto dump_pl = [&](const std::string& name, const PLFunction& f) {
    std::ofstream out(man.path(name));
    out << "x,value\n";
    for (size_t i = 0; i < f.x.size(); ++i)
      out << fmt(f.x[i]) << "," << fmt(f.y[i]) << "\n";
    man.record(name);
  };
  dump_pl("facet1d_psi.csv", res.psi);
  dump_pl("facet1d_z.csv", res.z);

  json facets = json::array();
  for (int i = 0; i < res.facet_count(); ++i) {
    double lam = lambda_1d_exact(res, i);
    facets.push_back({{"lo", res.facet_lo(i)},
                      {"hi", res.facet_hi(i)},
                      {"div_z", lam}});
    std::cout << "facet " << i << " [" << fmt(res.facet_lo(i)) << ", "
              << fmt(res.facet_hi(i)) << "] div_z = " << fmt(lam) << "\n";
  }
  man.j["summary"] = {{"delta", res.delta},
                      {"eps", res.eps},
                      {"w_minus", res.w_minus},
                      {"w_plus", res.w_plus},
                      {"facets", facets}};
  man.write();
  return 0;
}

int cmd_facet2d(const Global& g, const std::string& wfile,
                const std::string& pairfile, double rho1, double rho2,
                int grid_n) {
  PolyhedralFn W = load_anisotropy(wfile);
  FacetPair A = load_pair_csv(pairfile);
  Facet2DResult res = admissible_approx_2d(W, A, rho1, rho2, grid_n);

  Manifest man(g, "facet2d build");
  man.param("anisotropy", wfile);
  man.param("pair", pairfile);
  man.param("rho1", rho1);
  man.param("rho2", rho2);
  man.param("grid_n", grid_n);

  save_loops_csv(man.path("boundary_minus.csv").string(), res.G.minus2.loops);
  save_loops_csv(man.path("boundary_plus.csv").string(), res.G.plus2.loops);
  save_sampled_fn(man.path("facet2d_psi.bin").string(), res.psi);
  save_sampled_fields(man.path("facet2d_z.bin").string(), {res.zx, res.zy});
  for (const char* n : {"boundary_minus.csv", "boundary_plus.csv",
                        "facet2d_psi.bin", "facet2d_z.bin"})
    man.record(n);

  man.j["diagnostics"] = {{"eta", res.eta},
                          {"delta", res.delta},
                          {"membership_failure_rate",
                           res.membership_failure_rate},
                          {"lip_psi", res.lip_psi},
                          {"lip_z", res.lip_z}};
  man.write();
  std::cout << "membership_failure_rate," << fmt(res.membership_failure_rate)
            << "\n";
  return 0;
}

int cmd_tvflow_resolvent(const Global& g, const std::string& wfile,
                         const std::string& psifile, double a, double tol,
                         int m, const std::string& kind) {
  PolyhedralFn W = load_anisotropy(wfile);
  GridFn psi = load_grid_fn(psifile);
  if (psi.g.k != W.dim)
    throw ConfigInvalid("anisotropy dimension != grid dimension");

  Manifest man(g, "tvflow resolvent");
  man.param("anisotropy", wfile);
  man.param("psi", psifile);
  man.param("a", a);
  man.param("tol", tol);
  man.param("m", m);
  man.param("kind", kind);

  ResolventResult r;
  if (m > 0) {
    SmoothKind sk;
    if (kind == "quad")
      sk = SmoothKind::QuadraticGrowth;
    else if (kind == "euclid")
      sk = SmoothKind::Euclidean;
    else
      throw ConfigInvalid("resolvent smoothing kind must be quad or euclid");
    SmoothAnisotropy Wm = sk == SmoothKind::Euclidean
                              ? SmoothAnisotropy::euclidean(W.dim, m)
                              : regularize(W, m, sk);
    r = resolvent_smooth(Wm, psi, a, tol);
  } else {
    r = resolvent(W, psi, a, tol);
  }

  save_grid_fn(man.path("psi_a.bin").string(), r.psi_a);
  save_grid_fn(man.path("h_a.bin").string(), r.h_a);
  save_grid_vec(man.path("z.bin").string(), r.z);
  man.record("psi_a.bin");
  man.record("h_a.bin");
  man.record("z.bin");
  if (psi.g.k == 1) {
    save_grid_csv(man.path("psi_a.csv").string(), r.psi_a);
    man.record("psi_a.csv");
  }
  man.j["result"] = {{"residual", r.residual},
                     {"iterations", r.iterations},
                     {"energy_in", energy(W, psi)},
                     {"energy_out", energy(W, r.psi_a)}};
  man.write();
  std::cout << "residual," << fmt(r.residual) << "\niterations,"
            << r.iterations << "\n";
  return 0;
}

int cmd_tvflow_lambda(const Global& g, const std::string& wfile,
                      const std::string& pairfile, const std::string& pspec,
                      const std::string& psifile, int N,
                      const std::string& schedule_spec,
                      const std::string& ball, double ball_radius) {
  PolyhedralFn W = load_anisotropy(wfile);
  FacetPair pair = load_pair_csv(pairfile);
  Vec p = parse_vec(pspec);
  if (p.dim != W.dim)
    throw ConfigInvalid("--p dimension must match the anisotropy");

  SampledFn psi_bar =
      psifile.empty() ? support_function(pair) : load_sampled_fn(psifile);
  std::vector<double> schedule =
      schedule_spec.empty() ? std::vector<double>{} : parse_doubles(schedule_spec);

  Vec bc;
  const Vec* bcp = nullptr;
  if (!ball.empty()) {
    bc = parse_vec(ball);
    bcp = &bc;
  }
  LambdaResult L = lambda_p(W, p, psi_bar, pair, N, bcp, ball_radius, schedule);

  Manifest man(g, "tvflow lambda");
  man.param("anisotropy", wfile);
  man.param("pair", pairfile);
  man.param("p", pspec);
  man.param("psi", psifile.empty() ? std::string("(support function)") : psifile);
  man.param("N", L.torus.N);
  man.param("schedule", L.ms.schedule);
  man.param("ball_center", ball);
  man.param("ball_radius", ball_radius);

  save_grid_fn(man.path("lambda.bin").string(), L.lambda);
  save_grid_fn(man.path("psi_per.bin").string(), L.psi_per);
  man.record("lambda.bin");
  man.record("psi_per.bin");
  if (L.torus.k == 1) {
    save_grid_csv(man.path("lambda.csv").string(), L.lambda);
    man.record("lambda.csv");
  }
  json origin = json::array();
  for (int d = 0; d < L.torus.k; ++d) origin.push_back(L.origin[d]);
  man.j["result"] = {{"ess_inf", L.ess_inf},
                     {"ess_sup", L.ess_sup},
                     {"div_z_inf", -L.ess_sup},
                     {"div_z_sup", -L.ess_inf},
                     {"delta_clip", L.delta_clip},
                     {"settled", L.ms.settled},
                     {"torus_L", L.torus.L},
                     {"torus_N", L.torus.N},
                     {"origin", origin}};
  man.write();
  std::cout << "lambda ess range [" << fmt(L.ess_inf) << ", " << fmt(L.ess_sup)
            << "]\n";
  return 0;
}

struct EvolveArgs {
  std::string anisotropy;
  std::string speed = "builtin:kappa";
  int m = 64;
  int grid = 129;
  double T = 0.05;
  std::string shape = "square:1";
  double domain = 5.0;
  int snapshots = 5;
  std::string kind = "quad";
  bool no_band = false;
};

EvolveProblem build_problem(const EvolveArgs& a, PolyhedralFn& W) {
  W = load_anisotropy(a.anisotropy);
  EvolveProblem prob;
  prob.D0 = make_shape(a.shape, W);
  prob.f = parse_speed(a.speed);
  prob.W = W;
  prob.T = a.T;
  prob.opt.N = a.grid;
  prob.opt.boxL = a.domain;
  prob.opt.n_snapshots = a.snapshots;
  prob.opt.band = !a.no_band;
  if (a.kind == "quad")
    prob.opt.kind = SmoothKind::QuadraticGrowth;
  else if (a.kind == "euclid")
    prob.opt.kind = SmoothKind::Euclidean;
  else
    throw ConfigInvalid("evolve kind must be quad or euclid");
  return prob;
}

void record_evolve_params(Manifest& man, const EvolveArgs& a) {
  man.param("anisotropy", a.anisotropy);
  man.param("speed", a.speed);
  man.param("m", a.m);
  man.param("grid", a.grid);
  man.param("T", a.T);
  man.param("shape", a.shape);
  man.param("domain", a.domain);
  man.param("snapshots", a.snapshots);
  man.param("kind", a.kind);
  man.param("band", !a.no_band);
}

int cmd_evolve(const Global& g, const EvolveArgs& a) {
  PolyhedralFn W;
  EvolveProblem prob = build_problem(a, W);
  prob.opt.keep_fields = false;
  Trajectory traj =
      evolve_crystal(prob.D0, prob.f, prob.W, a.m, prob.T, prob.opt);

  Manifest man(g, "evolve");
  record_evolve_params(man, a);
  json times = json::array();
  for (const Snapshot& sn : traj.snaps) times.push_back(sn.t);
  man.param("snapshot_times", times);

  for (size_t i = 0; i < traj.snaps.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "contour_%03zu.csv", i);
    save_loops_csv(man.path(name).string(), traj.snaps[i].zero_set);
    man.record(name);
  }
  write_series_csv(man.path("series.csv"), traj);
  man.record("series.csv");
  man.write();

  const Snapshot& last = traj.final();
  std::cout << "t=" << fmt(last.t) << " len_x=" << fmt(last.len_x)
            << " len_y=" << fmt(last.len_y) << " volume=" << fmt(last.volume)
            << "\n";
  return 0;
}

int cmd_convergence(const Global& g, const EvolveArgs& a,
                    const std::string& mspec, const std::string& epsspec) {
  PolyhedralFn W;
  EvolveProblem prob = build_problem(a, W);
  prob.opt.keep_fields = true;
  std::vector<int> ms = parse_ints(mspec);
  if (ms.size() < 2)
    throw ConfigInvalid("--m-schedule needs at least two values");
  std::vector<double> eps =
      epsspec.empty() ? std::vector<double>{} : parse_doubles(epsspec);

  std::vector<Trajectory> runs(ms.size());
  int jobs = std::max(1, g.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < ms.size(); ++i)
      runs[i] =
          evolve_crystal(prob.D0, prob.f, prob.W, ms[i], prob.T, prob.opt);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (size_t i = next++; i < ms.size(); i = next++)
          runs[i] =
              evolve_crystal(prob.D0, prob.f, prob.W, ms[i], prob.T, prob.opt);
      });
    for (auto& th : pool) th.join();
  }
  ConvergenceReport rep = convergence_from_runs(runs);

  if (!eps.empty()) {
    const Trajectory& base = runs.back();
    for (double e : eps) {
      EvolveOptions o2 = prob.opt;
      o2.u0_perturb = [e](const Vec& x) {
        return e * std::exp(-x.norm2() / 0.32);
      };
      Trajectory p =
          evolve_crystal(prob.D0, prob.f, prob.W, ms.back(), prob.T, o2);
      rep.eps_values.push_back(e);
      rep.eps_hausdorff.push_back(
          hausdorff_dist(p.final().zero_set, base.final().zero_set));
    }
  }

  Manifest man(g, "convergence");
  record_evolve_params(man, a);
  man.param("m_schedule", ms);
  man.param("eps_schedule", eps);

  std::ostringstream table;
  table << "m_lo,m_hi,sup_diff,zero_hausdorff\n";
  for (size_t i = 0; i + 1 < ms.size(); ++i)
    table << ms[i] << "," << ms[i + 1] << "," << fmt(rep.sup_diffs[i]) << ","
          << fmt(rep.zero_hausdorff[i]) << "\n";
  {
    std::ofstream out(man.path("convergence.csv"));
    out << table.str();
  }
  man.record("convergence.csv");
  if (!rep.eps_values.empty()) {
    std::ostringstream et;
    et << "eps,zero_hausdorff\n";
    for (size_t i = 0; i < rep.eps_values.size(); ++i)
      et << fmt(rep.eps_values[i]) << "," << fmt(rep.eps_hausdorff[i]) << "\n";
    std::ofstream out(man.path("perturbation.csv"));
    out << et.str();
    out.close();
    man.record("perturbation.csv");
  }
  man.j["result"] = {{"decreasing", rep.decreasing()}};
  man.write();
  std::cout << table.str();
  std::cout << "decreasing," << (rep.decreasing() ? "true" : "false") << "\n";
  return 0;
}

// Builds the matching faceted test pair at the right-hand facet of a
// square-like zero set and checks the viscosity inequalities on the run.
int cmd_verify(const Global& g, const EvolveArgs& a) {
  if (a.shape.rfind("square:", 0) != 0)
    throw ConfigInvalid("verify supports square:<L> initial shapes");
  double L0 = std::stod(a.shape.substr(7));

  PolyhedralFn W;
  EvolveProblem prob = build_problem(a, W);
  prob.opt.keep_fields = true;
  double that = prob.T / 2;
  prob.opt.times = {0.9 * that, that, 1.1 * that};
  Trajectory traj =
      evolve_crystal(prob.D0, prob.f, prob.W, a.m, prob.T, prob.opt);

  const Snapshot& mid = traj.snaps[2];  // t = that (after the t=0 snapshot)
  if (mid.len_x <= 0 || mid.len_y <= 0)
    throw DegenerateInput("verify: zero set vanished before T/2");
  Vec cen = Vec::zero(2);
  size_t np = 0;
  for (const Loop& lp : mid.zero_set)
    for (const Vec& p : lp.pts) {
      cen += p;
      ++np;
    }
  cen = (1.0 / np) * cen;

  const double h = traj.g.h();
  const double gap = 6 * h;
  double Lex = std::sqrt(std::max(L0 * L0 - 8 * that, 0.0));
  double v = -2.0 / Lex;  // facet speed from the shrinking-square law

  auto make_test = [&](bool sub) {
    StratifiedTestFn t;
    t.xhat = cen;
    t.xhat[0] += mid.len_x / 2;
    t.that = that;
    t.phat = Vec::zero(2);
    t.phat[0] = -1;
    double half = sub ? mid.len_y / 2 + gap : mid.len_y / 2 - gap;
    double slope = sub ? 0.5 : 1.5;
    IntervalSet minus = make_intervals({-kInf, half}, {-half, kInf});
    t.pair = FacetPair::make1d(minus, IntervalSet::empty());
    double span = mid.len_y;
    t.psi_bar.dim = 1;
    t.psi_bar.nx = 513;
    t.psi_bar.origin = Vec::zero(1);
    t.psi_bar.origin[0] = -span;
    t.psi_bar.h = 2 * span / 512;
    for (int i = 0; i < t.psi_bar.nx; ++i) {
      double y = t.psi_bar.origin[0] + i * t.psi_bar.h;
      t.psi_bar.v.push_back(-slope * std::max(0.0, std::abs(y) - half));
    }
    double x0 = t.xhat[0];
    double curve = sub ? 0.0 : 16.0 / (Lex * Lex * Lex);
    t.g = [x0, v, that, curve](double tt) {
      return x0 + v * (tt - that) - curve * (tt - that) * (tt - that);
    };
    t.delta = half / 2;
    t.subsolution = sub;
    return t;
  };

  GeometricF F{prob.f};
  Manifest man(g, "verify");
  record_evolve_params(man, a);
  man.param("t_hat", that);
  man.param("gap", gap);

  bool all_pass = true;
  json verdicts = json::array();
  for (bool sub : {true, false}) {
    StratifiedTestFn t = make_test(sub);
    TestVerdict vd = faceted_test_check(traj, t, F, W);
    verdicts.push_back({{"kind", sub ? "subsolution" : "supersolution"},
                        {"pass", vd.pass},
                        {"margin", vd.margin},
                        {"div_z_lo", vd.lambda_lo},
                        {"div_z_hi", vd.lambda_hi},
                        {"contact_gap", vd.gp_gap},
                        {"k", vd.k}});
    std::cout << (sub ? "subsolution" : "supersolution") << ": "
              << (vd.pass ? "pass" : "FAIL") << " margin=" << fmt(vd.margin)
              << "\n";
    all_pass = all_pass && vd.pass;
  }
  man.j["result"] = verdicts;
  man.write();
  if (!all_pass) {
    std::cerr << "verification failed\n";
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Global g;

  // --config seeds the option defaults, so scan for it before building the app
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") g.config_path = argv[i + 1];
  try {
    if (!g.config_path.empty()) g.cfg = Config::parse_file(g.config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code;
  }
  const Config& cfg = g.cfg;

  CLI::App app{"crystalline curvature flow toolkit"};
  app.require_subcommand(1);
  app.add_option("--config", g.config_path, "key = value config file");
  app.add_option("--out", g.out, "output directory")
      ->default_val(cfg.get("run.out", "out"));
  app.add_option("--seed", g.seed, "seed for randomized schedules")
      ->default_val(cfg.get_int("run.seed", 0));
  app.add_option("--jobs", g.jobs, "worker threads for parameter sweeps")
      ->default_val(cfg.get_int("run.jobs", 1));
  app.add_option("--log-level", g.log_level, "quiet|info|debug")
      ->default_val(cfg.get("run.log-level", "info"));

  // anisotropy
  auto* an = app.add_subcommand("anisotropy", "anisotropy utilities");
  auto* an_in = an->add_subcommand("inspect", "print strata and Wulff tables");
  std::string an_file = cfg.get("anisotropy.file");
  an_in->add_option("file", an_file, "anisotropy definition file");

  // pairs
  auto* pr = app.add_subcommand("pairs", "facet pair utilities");
  auto* pr_nbd = pr->add_subcommand("nbd", "open neighborhood of a pair");
  std::string pr_file = cfg.get("pairs.pair");
  double pr_rho = cfg.get_num("pairs.rho", 0.1);
  int pr_res = cfg.get_int("pairs.resolution", 512);
  pr_nbd->add_option("--pair", pr_file, "pair CSV")->required();
  pr_nbd->add_option("--rho", pr_rho, "neighborhood radius");
  pr_nbd->add_option("--resolution", pr_res, "2-d recontouring resolution");
  auto* pr_ord = pr->add_subcommand("order", "check pair ordering P <= Q");
  std::string pr_file2 = cfg.get("pairs.pair2");
  double pr_tol = cfg.get_num("pairs.tol", 0.0);
  pr_ord->add_option("--pair", pr_file, "pair CSV for P")->required();
  pr_ord->add_option("--pair2", pr_file2, "pair CSV for Q")->required();
  pr_ord->add_option("--tol", pr_tol, "ordering slack");
  pr_ord->add_option("--resolution", pr_res, "2-d sampling resolution");

  // facet1d
  auto* f1 = app.add_subcommand("facet1d", "1-d admissible approximations");
  auto* f1b = f1->add_subcommand("build", "build psi and z for a 1-d pair");
  std::string f1_w = cfg.get("facet1d.anisotropy");
  std::string f1_pair = cfg.get("facet1d.pair");
  double f1_r1 = cfg.get_num("facet1d.rho1", 0.0);
  double f1_r2 = cfg.get_num("facet1d.rho2", 0.2);
  f1b->add_option("--anisotropy", f1_w, "anisotropy file")->required();
  f1b->add_option("--pair", f1_pair, "pair CSV")->required();
  f1b->add_option("--rho1", f1_r1, "inner radius");
  f1b->add_option("--rho2", f1_r2, "outer radius");

  // facet2d
  auto* f2 = app.add_subcommand("facet2d", "2-d admissible approximations");
  auto* f2b = f2->add_subcommand("build", "build psi and z for a 2-d pair");
  std::string f2_w = cfg.get("facet2d.anisotropy");
  std::string f2_pair = cfg.get("facet2d.pair");
  double f2_r1 = cfg.get_num("facet2d.rho1", 0.0);
  double f2_r2 = cfg.get_num("facet2d.rho2", 0.2);
  int f2_n = cfg.get_int("facet2d.h", 256);
  f2b->set_help_flag("--help", "print help");  // frees -h for the --h option
  f2b->add_option("--anisotropy", f2_w, "anisotropy file")->required();
  f2b->add_option("--pair", f2_pair, "pair CSV")->required();
  f2b->add_option("--rho1", f2_r1, "inner radius");
  f2b->add_option("--rho2", f2_r2, "outer radius");
  f2b->add_option("--h", f2_n, "output sampling resolution");

  // tvflow
  auto* tv = app.add_subcommand("tvflow", "total variation flow solvers");
  auto* tvr = tv->add_subcommand("resolvent", "prox of a*E_W on a torus grid");
  std::string tv_w = cfg.get("tvflow.anisotropy");
  std::string tv_psi = cfg.get("tvflow.psi");
  double tv_a = cfg.get_num("tvflow.a", 0.1);
  double tv_tol = cfg.get_num("tvflow.tol", 1e-9);
  int tv_m = cfg.get_int("tvflow.m", 0);
  std::string tv_kind = cfg.get("tvflow.kind", "quad");
  tvr->add_option("--anisotropy", tv_w, "anisotropy file")->required();
  tvr->add_option("--psi", tv_psi, "input grid (CFG1)")->required();
  tvr->add_option("--a", tv_a, "time-step weight");
  tvr->add_option("--tol", tv_tol, "stopping tolerance");
  tvr->add_option("--m", tv_m, "regularize with index m (0: crystalline)");
  tvr->add_option("--kind", tv_kind, "quad|euclid smoothing");
  auto* tvl = tv->add_subcommand("lambda", "facet curvature via the sliced flow");
  std::string tvl_pair = cfg.get("tvflow.pair");
  std::string tvl_p = cfg.get("tvflow.p", "0");
  std::string tvl_psi = cfg.get("tvflow.lambda_psi");
  int tvl_N = cfg.get_int("tvflow.N", 0);
  std::string tvl_sched = cfg.get("tvflow.schedule");
  std::string tvl_ball = cfg.get("tvflow.ball");
  double tvl_br = cfg.get_num("tvflow.ball_radius", -1.0);
  tvl->add_option("--anisotropy", tv_w, "anisotropy file")->required();
  tvl->add_option("--pair", tvl_pair, "pair CSV in slice coordinates")
      ->required();
  tvl->add_option("--p", tvl_p, "gradient, comma separated");
  tvl->add_option("--psi", tvl_psi, "support sample (CFB1), else built-in");
  tvl->add_option("--N", tvl_N, "torus resolution (0: default)");
  tvl->add_option("--schedule", tvl_sched, "comma separated a-schedule");
  tvl->add_option("--ball", tvl_ball, "ess-range ball center");
  tvl->add_option("--ball-radius", tvl_br, "ess-range ball radius");

  // evolve / convergence / verify share their parameter block
  auto add_evolve_opts = [&](CLI::App* c, EvolveArgs& a,
                             const std::string& sec) {
    a.anisotropy = cfg.get(sec + ".anisotropy");
    a.speed = cfg.get(sec + ".speed", a.speed);
    a.m = cfg.get_int(sec + ".m", a.m);
    a.grid = cfg.get_int(sec + ".grid", a.grid);
    a.T = cfg.get_num(sec + ".T", a.T);
    a.shape = cfg.get(sec + ".shape", a.shape);
    a.domain = cfg.get_num(sec + ".domain", a.domain);
    a.snapshots = cfg.get_int(sec + ".snapshots", a.snapshots);
    a.kind = cfg.get(sec + ".kind", a.kind);
    c->add_option("--anisotropy", a.anisotropy, "anisotropy file")->required();
    c->add_option("--speed", a.speed,
                  "builtin:kappa | builtin:kappa-plus-one | file with c0 c1");
    c->add_option("--m", a.m, "regularization index");
    c->add_option("--grid", a.grid, "nodes per axis");
    c->add_option("--T", a.T, "final time");
    c->add_option("--shape", a.shape, "square:L | disc:r | wulff:s | file:path");
    c->add_option("--domain", a.domain, "box side length");
    c->add_option("--snapshots", a.snapshots, "snapshot count");
    c->add_option("--kind", a.kind, "quad|euclid smoothing");
    c->add_flag("--no-band", a.no_band, "disable the active band");
  };

  auto* ev = app.add_subcommand("evolve", "level-set crystal evolution");
  EvolveArgs ev_args;
  add_evolve_opts(ev, ev_args, "evolve");

  auto* cv = app.add_subcommand("convergence", "self-convergence study");
  EvolveArgs cv_args;
  cv_args.T = 0.04;
  add_evolve_opts(cv, cv_args, "convergence");
  std::string cv_ms = cfg.get("convergence.m-schedule", "16,32,64,128");
  std::string cv_eps = cfg.get("convergence.eps-schedule", "");
  cv->add_option("--m-schedule", cv_ms, "comma separated m values");
  cv->add_option("--eps-schedule", cv_eps, "initial-data perturbations");

  auto* vf = app.add_subcommand("verify", "faceted viscosity-solution check");
  EvolveArgs vf_args;
  add_evolve_opts(vf, vf_args, "verify");

  // let --out/--seed/... appear after the subcommand name
  std::function<void(CLI::App*)> allow_globals = [&](CLI::App* c) {
    c->fallthrough();
    for (CLI::App* s : c->get_subcommands({})) allow_globals(s);
  };
  for (CLI::App* s : app.get_subcommands({})) allow_globals(s);

  CLI11_PARSE(app, argc, argv);

  try {
    if (an_in->parsed()) {
      if (an_file.empty()) throw ConfigInvalid("anisotropy file required");
      return cmd_anisotropy_inspect(g, an_file);
    }
    if (pr_nbd->parsed()) return cmd_pairs_nbd(g, pr_file, pr_rho, pr_res);
    if (pr_ord->parsed())
      return cmd_pairs_order(g, pr_file, pr_file2, pr_tol, pr_res);
    if (f1b->parsed()) return cmd_facet1d(g, f1_w, f1_pair, f1_r1, f1_r2);
    if (f2b->parsed())
      return cmd_facet2d(g, f2_w, f2_pair, f2_r1, f2_r2, f2_n);
    if (tvr->parsed())
      return cmd_tvflow_resolvent(g, tv_w, tv_psi, tv_a, tv_tol, tv_m, tv_kind);
    if (tvl->parsed())
      return cmd_tvflow_lambda(g, tv_w, tvl_pair, tvl_p, tvl_psi, tvl_N,
                               tvl_sched, tvl_ball, tvl_br);
    if (ev->parsed()) return cmd_evolve(g, ev_args);
    if (cv->parsed()) return cmd_convergence(g, cv_args, cv_ms, cv_eps);
    if (vf->parsed()) return cmd_verify(g, vf_args);
    std::cerr << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
