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
#include <span>
#include <variant>
#include <vector>

#include "spatialrisk/region.hpp"
#include "spatialrisk/rng.hpp"

namespace spatialrisk {

/// gamma(h) = m * |h|^psi with m > 0 and 0 < psi <= 2.
struct PowerVariogram {
  double m = 1.0;
  double psi = 1.0;
};

/// Radial samples (r_k, gamma_k), r_0 = 0, gamma_0 = 0, r strictly
/// increasing. Linear interpolation inside, constant beyond the last radius.
struct TabulatedVariogram {
  std::vector<double> r;
  std::vector<double> gamma;
};

class VariogramSpec {
 public:
  using Form = std::variant<PowerVariogram, TabulatedVariogram>;

  static VariogramSpec power(double m, double psi);
  static VariogramSpec table(std::vector<double> r, std::vector<double> gamma);

  const Form& form() const { return form_; }
  /// gamma at Euclidean lag length `dist` >= 0.
  double operator()(double dist) const;
  double at(Point lag) const;

 private:
  explicit VariogramSpec(Form form) : form_(std::move(form)) {}
  Form form_;
};

/// Centred Gaussian field with stationary increments, anchored so that
/// W(anchor) = 0, restricted to a finite site list.
/// Cov(W(x), W(y)) = (gamma(x - a) + gamma(y - a) - gamma(x - y)) / 2.
class GaussDriver {
 public:
  const VariogramSpec& variogram() const { return variogram_; }
  const std::vector<Point>& sites() const { return sites_; }
  Point anchor() const { return anchor_; }
  /// Diagonal jitter that made the factorization succeed (0 if none).
  double jitter() const { return jitter_; }
  /// Var(W(site_i)) = gamma(site_i - anchor).
  double variance(std::size_t i) const { return variances_[i]; }
  const std::vector<double>& variances() const { return variances_; }

  /// The anchored covariance matrix over all sites (no jitter).
  Eigen::MatrixXd covariance() const;

  /// One draw of W at every site. `out` has one slot per site.
  void sample(Rng& rng, std::span<double> out) const;
  std::vector<double> sample(Rng& rng) const;

 private:
  friend GaussDriver build_driver(const VariogramSpec&, std::vector<Point>, Point);
  GaussDriver(VariogramSpec v) : variogram_(std::move(v)) {}

  VariogramSpec variogram_;
  std::vector<Point> sites_;
  Point anchor_;
  double jitter_ = 0.0;
  std::vector<double> variances_;
  std::vector<std::size_t> active_;  // sites not at the anchor
  Eigen::MatrixXd factor_;           // lower-triangular, over active_ sites
};

/// Assembles the anchored covariance and factorizes it, escalating diagonal
/// jitter 0, 1e-10, 1e-9, ..., 1e-6 (times trace/n). Sites must be distinct.
/// Sites equal to the anchor are held at zero and left out of the factor.
GaussDriver build_driver(const VariogramSpec& v, std::vector<Point> sites, Point anchor = {0.0, 0.0});

std::vector<double> sample_gaussian(const GaussDriver& d, Rng& rng);

}  // namespace spatialrisk
