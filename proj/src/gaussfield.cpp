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

#include "spatialrisk/gaussfield.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spatialrisk/error.hpp"

namespace spatialrisk {

VariogramSpec VariogramSpec::power(double m, double psi) {
  if (!(m > 0.0) || !std::isfinite(m)) throw Error(ErrorKind::kInvalidParameter, "variogram m must be positive");
  if (!(psi > 0.0 && psi <= 2.0)) throw Error(ErrorKind::kInvalidParameter, "variogram psi must be in (0, 2]");
  return VariogramSpec(PowerVariogram{m, psi});
}

VariogramSpec VariogramSpec::table(std::vector<double> r, std::vector<double> gamma) {
  if (r.size() != gamma.size() || r.size() < 2) {
    throw Error(ErrorKind::kInvalidParameter, "variogram table needs matching r and gamma with >= 2 entries");
  }
  if (r[0] != 0.0 || gamma[0] != 0.0) {
    throw Error(ErrorKind::kInvalidParameter, "variogram table must start at r = 0 with gamma = 0");
  }
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (!(r[i] > r[i - 1])) throw Error(ErrorKind::kInvalidParameter, "variogram table radii must increase");
    if (!(gamma[i] >= 0.0) || !std::isfinite(gamma[i])) {
      throw Error(ErrorKind::kInvalidParameter, "variogram table values must be non-negative");
    }
  }
  return VariogramSpec(TabulatedVariogram{std::move(r), std::move(gamma)});
}

double VariogramSpec::operator()(double dist) const {
  if (dist <= 0.0) return 0.0;
  if (const auto* p = std::get_if<PowerVariogram>(&form_)) return p->m * std::pow(dist, p->psi);
  const auto& t = std::get<TabulatedVariogram>(form_);
  if (dist >= t.r.back()) return t.gamma.back();
  auto it = std::upper_bound(t.r.begin(), t.r.end(), dist);
  std::size_t k = static_cast<std::size_t>(it - t.r.begin());
  double w = (dist - t.r[k - 1]) / (t.r[k] - t.r[k - 1]);
  return (1.0 - w) * t.gamma[k - 1] + w * t.gamma[k];
}

double VariogramSpec::at(Point lag) const { return (*this)(std::hypot(lag.x, lag.y)); }

Eigen::MatrixXd GaussDriver::covariance() const {
  const auto n = static_cast<Eigen::Index>(sites_.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double c = 0.5 * (variances_[i] + variances_[j] - variogram_.at(sites_[i] - sites_[j]));
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  return cov;
}

void GaussDriver::sample(Rng& rng, std::span<double> out) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(active_.size());
  Eigen::VectorXd xi(m);
  for (Eigen::Index i = 0; i < m; ++i) xi[i] = normal(rng);
  Eigen::VectorXd w = factor_.triangularView<Eigen::Lower>() * xi;
  std::fill(out.begin(), out.end(), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) out[active_[i]] = w[i];
}

std::vector<double> GaussDriver::sample(Rng& rng) const {
  std::vector<double> out(sites_.size());
  sample(rng, out);
  return out;
}

GaussDriver build_driver(const VariogramSpec& v, std::vector<Point> sites, Point anchor) {
  if (sites.empty()) throw Error(ErrorKind::kInvalidParameter, "driver needs at least one site");
  {
    std::vector<Point> sorted = sites;
    std::sort(sorted.begin(), sorted.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error(ErrorKind::kInvalidParameter, "driver sites must be distinct");
    }
  }
  GaussDriver d(v);
  d.anchor_ = anchor;
  d.variances_.resize(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    d.variances_[i] = v.at(sites[i] - anchor);
    if (!(sites[i] == anchor)) d.active_.push_back(i);
  }
  d.sites_ = std::move(sites);

  const auto m = static_cast<Eigen::Index>(d.active_.size());
  Eigen::MatrixXd cov(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      std::size_t a = d.active_[i], b = d.active_[j];
      double c = 0.5 * (d.variances_[a] + d.variances_[b] - v.at(d.sites_[a] - d.sites_[b]));
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  if (m == 0) return d;
  const double scale = cov.trace() / static_cast<double>(m);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    if (attempt > 0) jitter = scale * 1e-10 * std::pow(10.0, attempt - 1);
    Eigen::MatrixXd a = cov;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      d.factor_ = llt.matrixL();
      d.jitter_ = jitter;
      return d;
    }
  }
  throw Error(ErrorKind::kNotPositiveSemidefinite,
              "covariance not positive semidefinite after jitter " + std::to_string(jitter));
}

std::vector<double> sample_gaussian(const GaussDriver& d, Rng& rng) { return d.sample(rng); }

}  // namespace spatialrisk
