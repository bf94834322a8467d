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
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spatialrisk/maxstable.hpp"
#include "spatialrisk/region.hpp"

namespace spatialrisk {

/// GEV margins (eta, tau, xi) obtained from standard Frechet values.
struct GevParams {
  double eta = 0.0;
  double tau = 1.0;
  double xi = 0.0;
};

/// eta + tau (z^xi - 1) / xi, or eta + tau log z when xi == 0.
double gev_transform(double z, const GevParams& p);
double gev_inverse(double y, const GevParams& p);

struct IndicatorDamage {
  double u = 1.0;
};
struct PowerDamage {
  double u = 1.0;
  double beta = 1.0;
};
/// Piecewise-linear in z, constant outside the knot range.
struct TableDamage {
  std::vector<double> z;
  std::vector<double> d;
};

class DamageFunction {
 public:
  using Form = std::variant<IndicatorDamage, PowerDamage, TableDamage>;

  static DamageFunction indicator(double u);
  static DamageFunction power(double u, double beta);
  static DamageFunction table(std::vector<double> z, std::vector<double> d);

  const Form& form() const { return form_; }
  double operator()(double z) const;
  bool monotone() const { return monotone_; }
  /// True when D is non-decreasing and not constant.
  bool nondecreasing_nonconstant() const { return monotone_ && !constant_; }
  /// Upper bound of |D| (used for analytic moment bounds).
  double bound() const { return bound_; }

 private:
  explicit DamageFunction(Form f) : form_(std::move(f)) {}
  Form form_;
  bool monotone_ = true;
  bool constant_ = false;
  double bound_ = 1.0;
};

class ExposureField {
 public:
  static ExposureField constant(double c);
  /// Row-major values over `grid`, index iy * nx + ix.
  static ExposureField raster(GridSpec grid, std::vector<double> values);
  /// CSV with lines "cell_x,cell_y,value" (header optional); every cell of
  /// `grid` must appear exactly once.
  static ExposureField raster_csv(const std::string& path, const GridSpec& grid);

  bool is_constant() const { return !grid_; }
  double constant_value() const { return c_; }
  const std::optional<GridSpec>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double at_cell(std::size_t i) const { return grid_ ? values_[i] : c_; }

 private:
  ExposureField() = default;
  double c_ = 1.0;
  std::optional<GridSpec> grid_;
  std::vector<double> values_;
};

struct CostModel {
  MaxStableModel field = SmithModel{};
  std::optional<GevParams> gev;
  DamageFunction damage = DamageFunction::indicator(1.0);
  ExposureField exposure = ExposureField::constant(1.0);

  /// C for one value z of the max-stable field, at cell `i`.
  double cost(double z, std::size_t i) const;
  /// Constant exposure, so the cost field inherits stationarity.
  bool stationary() const { return exposure.is_constant(); }
};

/// Cellwise C = E D(D1(z)) over a field sample.
std::vector<double> evaluate_cost(const CostModel& model, const FieldSample& z);
/// Same, writing into `out` (for the replication loop).
void evaluate_cost(const CostModel& model, const GridSpec& grid, std::span<const double> z, std::span<double> out);

struct MomentEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
  bool analytic = false;
  /// Analytic finiteness: bounded damage times bounded exposure.
  bool finite_by_bound = false;
};

/// E|C(0)|^p. Indicator damage with constant exposure is exact; other kinds
/// use Monte Carlo from direct Frechet draws (the one-point law of any simple
/// max-stable field), at exposure of the first cell for rasters.
MomentEstimate marginal_moment(const CostModel& model, double p, std::size_t n_reps, std::uint64_t seed = 1);

/// E[C(0)] for constant exposure by quadrature against the Frechet density.
double expected_cost_quadrature(const CostModel& model);

}  // namespace spatialrisk
