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

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spatialrisk/aggregate.hpp"
#include "spatialrisk/risk.hpp"

namespace spatialrisk {

// ---------------------------------------------------------------------------
// Integrated covariance sigma_C^2 = integral of Cov(C(0), C(x)) dx.

/// One annulus {round(|l| / h) = index} of the pooled covariance curve.
struct CovarianceBin {
  double radius = 0.0;  // index * h
  double k = 0.0;       // mean of k(l) over lattice lags in the annulus
  double std_err = 0.0;
  std::size_t lags = 0;
  double partial = 0.0;  // sigma^2 over the disc up to and including this annulus
};

struct SigmaEstimate {
  double sigma2 = 0.0;
  double std_err = 0.0;
  double R = 0.0;  // truncation radius
  double h = 0.0;  // lag resolution
  std::size_t n_reps = 0;
  double mean = 0.0;       // pooled mean of C
  double k0 = 0.0;         // Var C(0)
  double tail = 0.0;       // contribution of the last annulus inside R
  bool R_from_rule = false;
  std::vector<CovarianceBin> curve;  // every annulus up to the edge limit
  std::string note;

  double sigma() const { return sigma2 > 0.0 ? std::sqrt(sigma2) : 0.0; }
};

/// Pools C(x) C(x + l) over all cell pairs of each replication with FFTs.
/// Replications are processed in fixed blocks so the result does not depend
/// on the thread count.
class CovarianceAccumulator {
 public:
  explicit CovarianceAccumulator(const GridSpec& grid);
  ~CovarianceAccumulator();
  CovarianceAccumulator(const CovarianceAccumulator&) = delete;
  CovarianceAccumulator& operator=(const CovarianceAccumulator&) = delete;

  const GridSpec& grid() const { return grid_; }
  /// Largest admissible truncation radius (half the shorter grid side).
  double max_radius() const;
  void add(std::span<const double> field);
  /// Merges another accumulator's replications after this one's.
  void merge(const CovarianceAccumulator& other);
  /// Drops accumulated replications, keeping the FFT plans.
  void clear();
  std::size_t count() const { return mu_.size(); }

  /// k(l) with stderr at an integer lattice lag.
  std::pair<double, double> k_at(long lx, long ly) const;
  /// Estimate at radius R, or the default rule when R is empty. R beyond
  /// max_radius() is an edge-effect error.
  SigmaEstimate finish(std::optional<double> R = std::nullopt) const;

 private:
  struct Fft;
  GridSpec grid_;
  long lx_max_, ly_max_;
  std::size_t n_bins_;
  std::vector<std::size_t> bin_of_;   // per lag in the window, n_bins_ if outside
  std::vector<std::size_t> bin_lags_;
  // Per lag across replications: sum of m2 = S / P, of m2^2 and of m2 * mu.
  std::vector<double> s1_, s2_, s12_;
  std::vector<double> mu_;                 // per replication cell mean
  std::vector<std::vector<double>> ann_;   // per replication annulus sums of m2
  std::unique_ptr<Fft> fft_;
};

struct SigmaOptions {
  std::size_t n_reps = 1000;
  std::optional<double> R;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

SigmaEstimate estimate_sigma(const CostModel& model, const GridSpec& grid, const SigmaOptions& options);

// ---------------------------------------------------------------------------
// Axiom checks

struct CheckReport {
  std::string check;
  CheckStatus status = CheckStatus::kInconclusive;
  std::string details;
  double statistic = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// PASS when the level-CIs of the two estimates overlap. Without the
/// stationarity flag the check is reported as a precondition violation.
CheckReport check_translation(const RiskEstimate& a, const RiskEstimate& shifted, bool stationary,
                              double level = 0.99);

/// R(A1 u A2) - min(R(A1), R(A2)) with a paired bootstrap CI; PASS unless the
/// whole interval is above zero.
CheckReport check_subadditivity(const RegionUnion& a1, const RegionUnion& a2, const RiskEstimate& r1,
                                const RiskEstimate& r2, const RiskEstimate& r_union, double level = 0.99);

// ---------------------------------------------------------------------------
// Asymptotic homogeneity R(lambda A) = K1 + K2 / lambda^gamma

struct HomogeneityFit {
  RiskMeasureKind kind;
  double K1 = 0.0, K2 = 0.0, gamma = 0.0;
  double K1_se = 0.0, K2_se = 0.0, gamma_se = 0.0;
  std::array<double, 2> K1_ci{}, K2_ci{}, gamma_ci{};
  std::vector<double> lambdas;
  std::vector<double> values;
  double residual_norm = 0.0;
  bool unstable = false;
  std::size_t failed_refits = 0;
  std::string note;
};

struct FitOptions {
  bool require_ladder = true;  // >= 4 points spanning a factor >= 8
  double ci_level = 0.95;
};

/// Least squares fit of the three-parameter curve. `std_errs` (optional)
/// weight the points and judge monotonicity; `draws[i]` are bootstrap
/// replicates of point i, paired across points, used for parameter CIs.
HomogeneityFit fit_homogeneity(std::span<const double> lambdas, std::span<const double> values,
                               std::span<const double> std_errs, const std::vector<std::vector<double>>& draws,
                               const RiskMeasureKind& kind, const FitOptions& options = {});
HomogeneityFit fit_homogeneity(std::span<const RiskEstimate> estimates, const FitOptions& options = {});

struct TheoreticalConstants {
  double K1 = 0.0, K2 = 0.0, gamma = 0.0;
};

/// Limit constants for a stationary cost field with sigma_C, mean mu, on a
/// region of area nu. var at alpha = 1/2 is an excluded-level error.
TheoreticalConstants theoretical_constants(const RiskMeasureKind& kind, double sigma_c, double mu, double nu);

struct ConstantsComparison {
  RiskMeasureKind kind;
  TheoreticalConstants theory;
  HomogeneityFit fit;
  double K1_dev = 0.0;  // absolute, since K1 may be 0
  double K2_rel = 0.0;
  double gamma_dev = 0.0;
  CheckStatus status = CheckStatus::kInconclusive;
  std::string details;
};

ConstantsComparison compare_constants(const HomogeneityFit& fit, const SigmaEstimate& sigma, double mu, double nu,
                                      const RiskMeasureKind& kind);

// ---------------------------------------------------------------------------
// Rescaled losses lambda (L_N(lambda A) - mu)

struct CltRow {
  double lambda = 0.0;
  std::size_t n = 0;
  double mean = 0.0, variance = 0.0, skewness = 0.0, kurtosis = 0.0;  // excess kurtosis
  double mean_se = 0.0, variance_se = 0.0, skewness_se = 0.0, kurtosis_se = 0.0;
  double variance_ratio = 0.0;  // variance / target
  bool degenerate = false;
};

struct CltReport {
  std::string region_id;
  double mu = 0.0;
  double target_variance = 0.0;
  std::vector<CltRow> rows;
  std::string note;
};

struct SampleMoments {
  double mean, variance, skewness, kurtosis;
};
SampleMoments sample_moments(std::span<const double> x);

CltReport clt_report(const LossTable& table, const std::string& region_id, double mu, const SigmaEstimate& sigma,
                     double nu, const Bootstrap* boot = nullptr);

// ---------------------------------------------------------------------------

/// Finite-ladder look at the Brown-Resnick VaR conditions: the ratio
/// sup_{x in [0,1]^2} (gamma(h) - gamma(x + h)) / gamma(h), and
/// gamma(h) / log|h|, at lags (r, 0). Reported, never asserted.
struct VariogramConditionRow {
  double r = 0.0;
  double sup_ratio = 0.0;
  double growth = 0.0;
};
std::vector<VariogramConditionRow> variogram_conditions(const VariogramSpec& v, std::span<const double> radii);

}  // namespace spatialrisk
