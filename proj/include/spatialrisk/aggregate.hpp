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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spatialrisk/cost.hpp"
#include "spatialrisk/region.hpp"

namespace spatialrisk {

/// L_N = sum(w C) / sum(w) over the rasterized cells of A.
double aggregate_loss(std::span<const double> cost, const CellWeights& weights);
double aggregate_loss(std::span<const double> cost, const RegionUnion& a, const GridSpec& grid,
                      const RasterOptions& options = {});

struct NamedRegion {
  std::string id;
  RegionUnion region;
};

struct McPlan {
  std::uint64_t seed = 1;
  std::size_t n_reps = 1;
  GridSpec grid{Box{0.0, 0.0, 1.0, 1.0}, 0.05};
  std::vector<NamedRegion> regions;
  std::vector<double> lambdas{1.0};
  unsigned threads = 0;  // 0 = hardware concurrency
  RasterOptions raster;

  void validate() const;
};

/// L_N per (region, lambda, replication). Rows of values() are stored region
/// major, then lambda, then replication.
class LossTable {
 public:
  LossTable() = default;
  LossTable(std::vector<std::string> regions, std::vector<double> lambdas, std::size_t n_reps);

  const std::vector<std::string>& regions() const { return regions_; }
  const std::vector<double>& lambdas() const { return lambdas_; }
  std::size_t n_reps() const { return n_reps_; }

  std::size_t region_index(const std::string& id) const;
  std::size_t lambda_index(double lambda) const;

  std::span<double> column(std::size_t region, std::size_t lambda);
  std::span<const double> column(std::size_t region, std::size_t lambda) const;
  std::span<const double> column(const std::string& region, double lambda) const {
    return column(region_index(region), lambda_index(lambda));
  }

  std::uint64_t seed = 0;

 private:
  std::vector<std::string> regions_;
  std::vector<double> lambdas_;
  std::size_t n_reps_ = 0;
  std::vector<double> values_;
};

/// Draws cost fields for replication indices of one master seed. Thread-safe.
class CostSampler {
 public:
  CostSampler(const CostModel& model, const GridSpec& grid, std::uint64_t master_seed);

  const GridSpec& grid() const { return sim_.grid(); }
  const CostModel& model() const { return model_; }
  /// `z` is scratch of one value per cell; `cost` receives C.
  void sample(std::size_t rep, std::span<double> z, std::span<double> cost) const;

 private:
  CostModel model_;
  FieldSimulator sim_;
  std::uint64_t seed_;
};

/// The spatial scaling lambda A of a region about its barycentre.
RegionUnion scaled_region(const RegionUnion& a, double lambda);

LossTable run_replications(const McPlan& plan, const CostModel& model);

/// Columns region_id,lambda,rep,l_n; doubles written round-trip exact.
void write_loss_csv(const LossTable& table, const std::string& path);
LossTable read_loss_csv(const std::string& path);

/// Shortest round-trip representation of a double.
std::string format_double(double v);

}  // namespace spatialrisk
