#include "crystalflow/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "crystalflow/errors.hpp"

namespace cf {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigInvalid("config line " + std::to_string(lineno) +
                            ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("config line " + std::to_string(lineno) +
                          ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigInvalid("config line " + std::to_string(lineno) +
                          ": empty key");
    c.kv[section.empty() ? key : section + "." + key] = val;
  }
  return c;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Config::get(const std::string& key, const std::string& dflt) const {
  auto it = kv.find(key);
  return it == kv.end() ? dflt : it->second;
}

double Config::get_num(const std::string& key, double dflt) const {
  auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trail");
    return v;
  } catch (const std::exception&) {
    throw ConfigInvalid("config key " + key + ": not a number: " + it->second);
  }
}

int Config::get_int(const std::string& key, int dflt) const {
  auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  try {
    size_t pos = 0;
    int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trail");
    return v;
  } catch (const std::exception&) {
    throw ConfigInvalid("config key " + key +
                        ": not an integer: " + it->second);
  }
}

std::string Config::serialize() const {
  // group by section (std::map keeps everything sorted)
  std::map<std::string, std::map<std::string, std::string>> bysec;
  for (const auto& [k, v] : kv) {
    size_t dotp = k.find('.');
    if (dotp == std::string::npos)
      bysec[""][k] = v;
    else
      bysec[k.substr(0, dotp)][k.substr(dotp + 1)] = v;
  }
  std::ostringstream out;
  for (const auto& [sec, keys] : bysec) {
    if (!sec.empty()) out << "[" << sec << "]\n";
    for (const auto& [k, v] : keys) out << k << " = " << v << "\n";
  }
  return out.str();
}

namespace {

struct BinWriter {
  std::ofstream out;
  explicit BinWriter(const std::string& path)
      : out(path, std::ios::binary) {
    if (!out) throw ConfigInvalid("cannot open for write: " + path);
  }
  void magic(const char* m) { out.write(m, 4); }
  void i32(int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
  void f64(double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
  void f64s(const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              (std::streamsize)(v.size() * 8));
  }
};

struct BinReader {
  std::ifstream in;
  std::string path;
  explicit BinReader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw ConfigInvalid("cannot open for read: " + p);
  }
  void magic(const char* m) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::string(buf, 4) != std::string(m, 4))
      throw ConfigInvalid("bad magic in " + path);
  }
  int32_t i32() {
    int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw ConfigInvalid("truncated file: " + path);
    return v;
  }
  double f64() {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw ConfigInvalid("truncated file: " + path);
    return v;
  }
  void f64s(std::vector<double>& v, size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), (std::streamsize)(n * 8));
    if (!in) throw ConfigInvalid("truncated file: " + path);
  }
};

}  // namespace

void save_grid_fn(const std::string& path, const GridFn& f) {
  BinWriter w(path);
  w.magic("CFG1");
  w.i32(f.g.k);
  w.i32(f.g.N);
  w.f64(f.g.L);
  w.i32(1);
  w.f64s(f.v);
}

GridFn load_grid_fn(const std::string& path) {
  BinReader r(path);
  r.magic("CFG1");
  GridTorus g;
  g.k = r.i32();
  g.N = r.i32();
  g.L = r.f64();
  int ncomp = r.i32();
  if (g.k < 1 || g.k > 3 || g.N < 1 || ncomp != 1)
    throw ConfigInvalid("bad scalar grid header: " + path);
  GridFn f(g);
  r.f64s(f.v, g.size());
  return f;
}

void save_grid_vec(const std::string& path, const GridVecField& z) {
  BinWriter w(path);
  w.magic("CFG1");
  w.i32(z.g.k);
  w.i32(z.g.N);
  w.f64(z.g.L);
  w.i32(z.g.k);
  w.f64s(z.v);
}

GridVecField load_grid_vec(const std::string& path) {
  BinReader r(path);
  r.magic("CFG1");
  GridTorus g;
  g.k = r.i32();
  g.N = r.i32();
  g.L = r.f64();
  int ncomp = r.i32();
  if (g.k < 1 || g.k > 3 || g.N < 1 || ncomp != g.k)
    throw ConfigInvalid("bad vector grid header: " + path);
  GridVecField z(g);
  r.f64s(z.v, g.size() * g.k);
  return z;
}

namespace {

void write_box_header(BinWriter& w, const SampledFn& f, int ncomp) {
  w.magic("CFB1");
  w.i32(f.dim);
  w.i32(f.nx);
  w.i32(f.dim == 2 ? f.ny : 1);
  w.f64(f.origin.dim > 0 ? f.origin[0] : 0.0);
  w.f64(f.origin.dim > 1 ? f.origin[1] : 0.0);
  w.f64(f.h);
  w.i32(ncomp);
}

SampledFn read_box_header(BinReader& r, int& ncomp) {
  r.magic("CFB1");
  SampledFn f;
  f.dim = r.i32();
  f.nx = r.i32();
  f.ny = r.i32();
  f.origin = Vec::zero(f.dim);
  double ox = r.f64(), oy = r.f64();
  f.origin[0] = ox;
  if (f.dim > 1) f.origin[1] = oy;
  f.h = r.f64();
  ncomp = r.i32();
  if (f.dim < 1 || f.dim > 2 || f.nx < 1 || f.ny < 1 || ncomp < 1)
    throw ConfigInvalid("bad sampling header");
  return f;
}

}  // namespace

void save_sampled_fn(const std::string& path, const SampledFn& f) {
  BinWriter w(path);
  write_box_header(w, f, 1);
  w.f64s(f.v);
}

SampledFn load_sampled_fn(const std::string& path) {
  BinReader r(path);
  int ncomp = 0;
  SampledFn f = read_box_header(r, ncomp);
  if (ncomp != 1) throw ConfigInvalid("expected scalar sampling: " + path);
  r.f64s(f.v, (size_t)f.nx * f.ny);
  return f;
}

void save_sampled_fields(const std::string& path,
                         const std::vector<SampledFn>& comps) {
  if (comps.empty()) throw ConfigInvalid("no components to save");
  BinWriter w(path);
  write_box_header(w, comps[0], (int)comps.size());
  size_t n = (size_t)comps[0].nx * comps[0].ny;
  std::vector<double> inter(n * comps.size());
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < comps.size(); ++c)
      inter[i * comps.size() + c] = comps[c].v[i];
  w.f64s(inter);
}

void save_grid_csv(const std::string& path, const GridFn& f) {
  if (f.g.k != 1) throw ConfigInvalid("grid CSV output is 1-d only");
  std::ofstream out(path);
  if (!out) throw ConfigInvalid("cannot open for write: " + path);
  out << "x,value\n";
  char buf[64];
  for (int i = 0; i < f.g.N; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", i * f.g.h(), f.at(i));
    out << buf;
  }
}

void save_loops_csv(const std::string& path, const std::vector<Loop>& loops) {
  std::ofstream out(path);
  if (!out) throw ConfigInvalid("cannot open for write: " + path);
  out << "loop,x,y\n";
  char buf[96];
  for (size_t li = 0; li < loops.size(); ++li)
    for (const Vec& p : loops[li].pts) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", li, p[0], p[1]);
      out << buf;
    }
}

std::vector<Loop> load_loops_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open for read: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<Loop> loops;
  long cur = -1;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    long id;
    double x, y;
    if (std::sscanf(line.c_str(), "%ld,%lf,%lf", &id, &x, &y) != 3)
      throw ConfigInvalid("bad contour row in " + path + ": " + line);
    if (id != cur) {
      loops.emplace_back();
      cur = id;
    }
    Vec p = Vec::zero(2);
    p[0] = x;
    p[1] = y;
    loops.back().pts.push_back(p);
  }
  return loops;
}

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigInvalid("cannot open for read: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= (unsigned char)buf[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return std::string(buf);
}

}  // namespace cf
