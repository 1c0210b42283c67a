#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crystalflow/grid.hpp"
#include "crystalflow/pairs.hpp"

namespace cf {

// Line-oriented "key = value" text with [section] headers; keys are stored
// flattened as "section.key" ('#' starts a comment).
struct Config {
  std::map<std::string, std::string> kv;

  static Config parse(const std::string& text);
  static Config parse_file(const std::string& path);

  bool has(const std::string& key) const { return kv.count(key) != 0; }
  std::string get(const std::string& key, const std::string& dflt = "") const;
  double get_num(const std::string& key, double dflt) const;
  int get_int(const std::string& key, int dflt) const;
  std::string serialize() const;  // sections sorted, keys sorted
};

// Binary field dumps. Periodic grids ("CFG1"): magic, int32 k, int32 N,
// float64 L, int32 ncomp, float64 payload (x fastest, component fastest of
// all). Box samplings ("CFB1"): magic, int32 dim, int32 nx, int32 ny,
// float64 origin[2], float64 h, int32 ncomp, float64 payload. Little-endian.
void save_grid_fn(const std::string& path, const GridFn& f);
GridFn load_grid_fn(const std::string& path);
void save_grid_vec(const std::string& path, const GridVecField& z);
GridVecField load_grid_vec(const std::string& path);
void save_sampled_fn(const std::string& path, const SampledFn& f);
SampledFn load_sampled_fn(const std::string& path);
void save_sampled_fields(const std::string& path,
                         const std::vector<SampledFn>& comps);

// Grid CSV for 1-d torus fields: rows "x,value".
void save_grid_csv(const std::string& path, const GridFn& f);

// Contour CSV: header "loop,x,y", one row per vertex.
void save_loops_csv(const std::string& path, const std::vector<Loop>& loops);
std::vector<Loop> load_loops_csv(const std::string& path);

uint64_t fnv1a_file(const std::string& path);
std::string hex64(uint64_t v);

}  // namespace cf
