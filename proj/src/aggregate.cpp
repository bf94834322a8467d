// Copyright 2026 The spatialrisk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spatialrisk/aggregate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "spatialrisk/error.hpp"
#include "spatialrisk/parallel.hpp"

namespace spatialrisk {

double aggregate_loss(std::span<const double> cost, const CellWeights& weights) {
  const double total = weights.total();
  if (!(total > 0.0)) throw Error(ErrorKind::kEmptyRegion, "region covers no grid cell");
  // Accumulate about the first value so that a constant field comes out exact.
  const double ref = cost[weights.cells.front()];
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.cells.size(); ++k) acc += weights.weights[k] * (cost[weights.cells[k]] - ref);
  return ref + acc / total;
}

double aggregate_loss(std::span<const double> cost, const RegionUnion& a, const GridSpec& grid,
                      const RasterOptions& options) {
  if (cost.size() != grid.cell_count()) throw Error(ErrorKind::kAlignment, "cost sample does not match grid");
  return aggregate_loss(cost, rasterize(a, grid, options));
}

void McPlan::validate() const {
  if (n_reps < 1) throw Error(ErrorKind::kInvalidParameter, "n_reps must be >= 1");
  if (lambdas.empty()) throw Error(ErrorKind::kInvalidParameter, "lambda ladder is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0) || (i > 0 && !(lambdas[i] > lambdas[i - 1]))) {
      throw Error(ErrorKind::kInvalidParameter, "lambda ladder must be positive and strictly increasing");
    }
  }
  if (regions.empty()) throw Error(ErrorKind::kInvalidParameter, "plan has no regions");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (regions[i].id == regions[j].id) throw Error(ErrorKind::kInvalidParameter, "duplicate region id " + regions[i].id);
    }
  }
}

LossTable::LossTable(std::vector<std::string> regions, std::vector<double> lambdas, std::size_t n_reps)
    : regions_(std::move(regions)), lambdas_(std::move(lambdas)), n_reps_(n_reps),
      values_(regions_.size() * lambdas_.size() * n_reps, 0.0) {}

std::size_t LossTable::region_index(const std::string& id) const {
  auto it = std::find(regions_.begin(), regions_.end(), id);
  if (it == regions_.end()) throw Error(ErrorKind::kInvalidParameter, "unknown region id " + id);
  return static_cast<std::size_t>(it - regions_.begin());
}

std::size_t LossTable::lambda_index(double lambda) const {
  for (std::size_t i = 0; i < lambdas_.size(); ++i) {
    if (std::abs(lambdas_[i] - lambda) <= 1e-12 * std::max(1.0, std::abs(lambda))) return i;
  }
  throw Error(ErrorKind::kInvalidParameter, "lambda " + format_double(lambda) + " not in the table");
}

std::span<double> LossTable::column(std::size_t region, std::size_t lambda) {
  return std::span<double>(values_).subspan((region * lambdas_.size() + lambda) * n_reps_, n_reps_);
}

std::span<const double> LossTable::column(std::size_t region, std::size_t lambda) const {
  return std::span<const double>(values_).subspan((region * lambdas_.size() + lambda) * n_reps_, n_reps_);
}

CostSampler::CostSampler(const CostModel& model, const GridSpec& grid, std::uint64_t master_seed)
    : model_(model), sim_(model.field, grid, derive_seed(master_seed, kPilotStream)), seed_(master_seed) {
  if (model.exposure.grid() && !(*model.exposure.grid() == grid)) {
    throw Error(ErrorKind::kAlignment, "exposure raster grid differs from the simulation grid");
  }
}

void CostSampler::sample(std::size_t rep, std::span<double> z, std::span<double> cost) const {
  Rng rng = make_rng(seed_, rep);
  try {
    sim_.simulate(rng, z);
  } catch (const Error& e) {
    std::string msg = e.what();
    auto colon = msg.find(": ");
    if (colon != std::string::npos) msg = msg.substr(colon + 2);
    throw Error(e.kind(), "replication " + std::to_string(rep) + ": " + msg);
  }
  evaluate_cost(model_, sim_.grid(), z, cost);
}

RegionUnion scaled_region(const RegionUnion& a, double lambda) {
  if (lambda == 1.0) return a;
  return a.scaled(lambda);
}

LossTable run_replications(const McPlan& plan, const CostModel& model) {
  plan.validate();
  check_seed_collisions(plan.seed, plan.n_reps);
  std::vector<std::string> ids;
  for (const auto& r : plan.regions) ids.push_back(r.id);
  LossTable table(ids, plan.lambdas, plan.n_reps);
  table.seed = plan.seed;

  std::vector<CellWeights> weights;
  for (const auto& r : plan.regions) {
    for (double lambda : plan.lambdas) {
      CellWeights w = rasterize(scaled_region(r.region, lambda), plan.grid, plan.raster);
      if (!(w.total() > 0.0)) throw Error(ErrorKind::kEmptyRegion, "region " + r.id + " covers no grid cell");
      weights.push_back(std::move(w));
    }
  }

  CostSampler sampler(model, plan.grid, plan.seed);
  const unsigned threads = resolve_threads(plan.threads);
  const std::size_t cells = plan.grid.cell_count();
  std::vector<std::vector<double>> zbuf(threads, std::vector<double>(cells));
  std::vector<std::vector<double>> cbuf(threads, std::vector<double>(cells));
  const std::size_t nl = plan.lambdas.size();
  parallel_for(plan.n_reps, threads, [&](std::size_t rep, unsigned w) {
    sampler.sample(rep, zbuf[w], cbuf[w]);
    for (std::size_t r = 0; r < plan.regions.size(); ++r) {
      for (std::size_t l = 0; l < nl; ++l) table.column(r, l)[rep] = aggregate_loss(cbuf[w], weights[r * nl + l]);
    }
  });
  return table;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_loss_csv(const LossTable& table, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path);
  os << "region_id,lambda,rep,l_n\n";
  for (std::size_t r = 0; r < table.regions().size(); ++r) {
    for (std::size_t l = 0; l < table.lambdas().size(); ++l) {
      auto col = table.column(r, l);
      const std::string prefix = table.regions()[r] + "," + format_double(table.lambdas()[l]) + ",";
      for (std::size_t i = 0; i < col.size(); ++i) os << prefix << i << ',' << format_double(col[i]) << '\n';
    }
  }
  if (!os) throw Error(ErrorKind::kIo, "write failed for " + path);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::kSchema, where + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

LossTable read_loss_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kSampleSize, path + " is empty: no replications");
  const std::vector<std::string> expected = {"region_id", "lambda", "rep", "l_n"};
  auto header = split_csv(line);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= header.size() || header[i] != expected[i]) {
      throw Error(ErrorKind::kSchema, path + ": expected column '" + expected[i] + "' at position " + std::to_string(i + 1));
    }
  }
  if (header.size() != expected.size()) throw Error(ErrorKind::kSchema, path + ": unexpected extra column '" + header[4] + "'");

  std::vector<std::string> regions;
  std::vector<double> lambdas;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<std::size_t, double>>> cols;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 4) throw Error(ErrorKind::kSchema, where + ": expected 4 columns");
    auto rit = std::find(regions.begin(), regions.end(), f[0]);
    if (rit == regions.end()) {
      regions.push_back(f[0]);
      rit = regions.end() - 1;
    }
    double lam = parse_double(f[1], where + " column 'lambda'");
    auto lit = std::find(lambdas.begin(), lambdas.end(), lam);
    if (lit == lambdas.end()) {
      lambdas.push_back(lam);
      lit = lambdas.end() - 1;
    }
    double rep = parse_double(f[2], where + " column 'rep'");
    if (rep < 0 || rep != std::floor(rep)) throw Error(ErrorKind::kSchema, where + " column 'rep': not an index");
    double v = parse_double(f[3], where + " column 'l_n'");
    cols[{static_cast<std::size_t>(rit - regions.begin()), static_cast<std::size_t>(lit - lambdas.begin())}]
        .emplace_back(static_cast<std::size_t>(rep), v);
  }
  if (cols.empty()) throw Error(ErrorKind::kSampleSize, path + " has no replications");
  std::vector<double> sorted = lambdas;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = cols.begin()->second.size();
  LossTable table(regions, sorted, n);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      auto it = cols.find({r, l});
      if (it == cols.end() || it->second.size() != n) {
        throw Error(ErrorKind::kSchema, path + ": region " + regions[r] + " lambda " + format_double(lambdas[l]) +
                                            " does not have " + std::to_string(n) + " replications");
      }
      auto col = table.column(r, table.lambda_index(lambdas[l]));
      std::vector<char> seen(n, 0);
      for (auto [rep, v] : it->second) {
        if (rep >= n || seen[rep]) throw Error(ErrorKind::kSchema, path + ": replication indices are not 0..n-1");
        seen[rep] = 1;
        col[rep] = v;
      }
    }
  }
  return table;
}

}  // namespace spatialrisk
