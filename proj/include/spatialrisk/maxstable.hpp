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

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spatialrisk/gaussfield.hpp"
#include "spatialrisk/region.hpp"
#include "spatialrisk/rng.hpp"

namespace spatialrisk {

/// Smith (Gaussian storm) model. Storms are truncated where the density drops
/// below eps times its peak; the truncated density is renormalised so that
/// margins stay exactly standard Frechet.
struct SmithModel {
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
  double eps = 1e-4;
  std::size_t max_points = 5'000'000;
};

/// Brown-Resnick model with spectral field exp(W - Var W / 2).
struct BrownResnickModel {
  VariogramSpec variogram = VariogramSpec::power(1.0, 1.0);
  double eps = 1e-4;
  std::size_t max_points = 5'000'000;
  std::size_t pilot_draws = 1000;
};

using MaxStableModel = std::variant<SmithModel, BrownResnickModel>;

void validate(const SmithModel& model);
void validate(const BrownResnickModel& model);
std::string describe(const MaxStableModel& model);

/// One realisation on the cell centres of a grid.
struct FieldSample {
  GridSpec grid;
  std::vector<double> values;
  std::string model;
  std::uint64_t seed = 0;
  std::size_t points = 0;  // Poisson points consumed

  double at(Point p) const;
};

class SmithSimulator {
 public:
  SmithSimulator(const SmithModel& model, const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  /// Fills `out` (one value per cell); returns the number of storms used.
  std::size_t simulate(Rng& rng, std::span<double> out) const;
  /// Storm intensity peak (1/(2 pi sqrt(det Sigma))).
  double density_peak() const { return peak_; }
  /// Area of the padded storm-centre window.
  double window_area() const { return window_.area(); }

 private:
  SmithModel model_;
  GridSpec grid_;
  double qa_, qb_, qc_;  // inverse covariance entries
  double lambda_min_;    // smallest eigenvalue of the inverse covariance
  double peak_;
  double level_;         // quadratic-form cutoff 2 log(1/eps)
  double ext_x_, ext_y_;
  Box window_;
  std::size_t tile_ = 8;
};

class BrownResnickSimulator {
 public:
  /// Builds the Gaussian driver on the cell centres (anchored at the cell
  /// nearest the grid centre) and runs the pilot that estimates the sup
  /// quantile used by the stopping rule.
  BrownResnickSimulator(const BrownResnickModel& model, const GridSpec& grid, Rng& pilot_rng);

  const GridSpec& grid() const { return grid_; }
  const GaussDriver& driver() const { return driver_; }
  double sup_quantile() const { return sup_quantile_; }
  /// Per-cell pilot mean of Y and its standard error.
  const std::vector<double>& pilot_mean() const { return pilot_mean_; }
  const std::vector<double>& pilot_stderr() const { return pilot_stderr_; }

  std::size_t simulate(Rng& rng, std::span<double> out) const;

 private:
  BrownResnickModel model_;
  GridSpec grid_;
  GaussDriver driver_;
  std::vector<double> half_variance_;
  double sup_quantile_ = 0.0;
  std::vector<double> pilot_mean_;
  std::vector<double> pilot_stderr_;
};

/// Simulator for either variant; pilot randomness comes from `pilot_seed`.
class FieldSimulator {
 public:
  FieldSimulator(const MaxStableModel& model, const GridSpec& grid, std::uint64_t pilot_seed);

  const GridSpec& grid() const;
  std::size_t simulate(Rng& rng, std::span<double> out) const;
  const MaxStableModel& model() const { return model_; }
  const BrownResnickSimulator* brown_resnick() const { return std::get_if<BrownResnickSimulator>(&impl_); }

 private:
  MaxStableModel model_;
  std::variant<SmithSimulator, BrownResnickSimulator> impl_;
};

FieldSample simulate_smith(const SmithModel& model, const GridSpec& grid, Rng& rng);
/// Runs the pilot from `rng` and then draws one sample.
FieldSample simulate_brown_resnick(const BrownResnickModel& model, const GridSpec& grid, Rng& rng);

struct ExtremalCoefficient {
  Point x1;
  Point x2;
  double theta = 0.0;
  double std_err = 0.0;
  double u = 1.0;
  std::size_t n = 0;         // replications (0 for analytic values)
  bool analytic = false;
  bool level_in_range = true;  // joint non-exceedance fraction in (0.05, 0.95)
};

inline constexpr std::size_t kMinExtremalSamples = 10'000;

/// theta = -u log(joint non-exceedance fraction), delta-method std_err.
ExtremalCoefficient extremal_coefficient_empirical(std::span<const FieldSample> samples, Point x1, Point x2,
                                                   double u = 1.0);
/// Same estimator on paired values.
ExtremalCoefficient extremal_coefficient_empirical(std::span<const double> z1, std::span<const double> z2,
                                                   double u = 1.0);

/// Smith extremal coefficient by 2-D Gauss-Legendre quadrature of the
/// exponent measure: theta = 2 - integral of min(f(s), f(s - h)).
double smith_theta_quadrature(const Eigen::Matrix2d& sigma, Point h, int panels = 200);

/// alpha-mixing bound 2 (2 - theta).
double mixing_bound(double theta);
double mixing_bound(const ExtremalCoefficient& theta);

struct IntegrabilityReport {
  double q = 0.0;
  std::vector<double> radii;
  std::vector<double> partial;     // integral over the disc of each radius
  std::vector<double> increments;  // partial[k] - partial[k-1] (partial[-1] = 0)
  std::vector<double> ratios;      // increments[k] / increments[k-1]
  bool consistent_with_finite = false;
  bool inconclusive = false;
  std::string note;
};

using ThetaFunction = std::function<double(Point)>;

/// Integrates [2 - theta(0, x)]^(1/q) over discs of the given increasing radii.
/// `theta_noise` is the absolute noise level of theta used to judge
/// monotonicity (0 for quadrature oracles).
IntegrabilityReport check_theta_integrability(const ThetaFunction& theta, double q, std::span<const double> radii,
                                              double theta_noise = 0.0);
IntegrabilityReport check_theta_integrability(const SmithModel& model, double q, std::span<const double> radii);

/// Radial theta estimated from simulated Brown-Resnick samples on a transect
/// with spacing dr up to r_max. Returns the interpolated function and the
/// largest std_err seen on the transect.
std::pair<ThetaFunction, double> empirical_theta_brown_resnick(const BrownResnickModel& model, double r_max,
                                                               double dr, std::size_t n_reps, std::uint64_t seed);
IntegrabilityReport check_theta_integrability(const BrownResnickModel& model, double q,
                                              std::span<const double> radii, std::size_t n_reps,
                                              std::uint64_t seed);

/// Writes cell_x, cell_y, value rows.
void write_field_csv(const FieldSample& sample, const std::string& path);

}  // namespace spatialrisk
