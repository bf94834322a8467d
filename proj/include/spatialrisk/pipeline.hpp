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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spatialrisk/axioms.hpp"
#include "spatialrisk/cost.hpp"
#include "spatialrisk/error.hpp"
#include "spatialrisk/risk.hpp"

namespace spatialrisk {

inline constexpr const char* kVersion = "0.1.0";

struct CheckSpec {
  std::string type;  // translation | subadditivity | homogeneity | clt | premium | integrability | variogram
  std::string field;  // "checks[i]" for diagnostics
  std::string region, shifted, a1, a2, union_id;
  std::vector<RiskMeasureKind> kinds;
  std::vector<double> lambdas;
  std::optional<double> premium;
  double premium_offset = 0.0;
  double level = 0.99;
  double q = 1.0;
  std::vector<double> radii;
  std::size_t n_reps = 10000;
};

struct SigmaConfig {
  std::size_t n_reps = 1000;
  std::optional<double> R;
};

struct RunConfig {
  std::string source;  // config text, echoed in the manifest
  std::string path;
  CostModel cost;
  McPlan plan;
  std::map<std::string, RegionUnion> regions;
  std::vector<RiskMeasureKind> kinds;
  std::size_t bootstrap = kDefaultBootstrap;
  std::optional<SigmaConfig> sigma;
  std::vector<CheckSpec> checks;
  std::string output = "out";

  const RegionUnion& region(const std::string& id) const;
  /// Needed whenever a check uses sigma_C.
  bool needs_sigma() const;
};

/// Parses a JSON config (comments allowed). Errors are kConfig with the line
/// or field path, or kExcludedLevel for var at level 1/2.
RunConfig parse_config(const std::string& text, const std::string& name = "<config>");
RunConfig load_config(const std::string& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_reps;
  std::optional<std::string> output;
  std::optional<unsigned> threads;
};
void apply_overrides(RunConfig& cfg, const Overrides& o);

/// Writes losses.csv (and sigma.csv / sigma_summary.csv when needed). With
/// `fields` > 0 also writes the first `fields` max-stable samples.
void stage_simulate(const RunConfig& cfg, std::size_t fields = 0);
/// Reads losses.csv, writes risk_estimates.csv.
void stage_estimate(const RunConfig& cfg);
/// Reads losses.csv (and sigma files), writes homogeneity.csv and
/// checks_summary.txt. Returns the reports.
std::vector<CheckReport> stage_check(const RunConfig& cfg);
/// All three stages plus the manifest.
std::vector<CheckReport> run_pipeline(const RunConfig& cfg);

void write_manifest(const RunConfig& cfg, const std::string& stage);

void write_sigma(const SigmaEstimate& s, const std::string& dir);
SigmaEstimate read_sigma(const std::string& dir);

/// CLI exit code for an error kind.
int exit_code(ErrorKind kind);
inline constexpr int kExitCheckFailed = 5;

}  // namespace spatialrisk
