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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spatialrisk/aggregate.hpp"

namespace spatialrisk {

struct RiskMeasureKind {
  enum class Type { kExpectation, kVariance, kVar, kEs };
  Type type = Type::kExpectation;
  double alpha = 0.0;  // only for kVar / kEs

  static RiskMeasureKind expectation() { return {Type::kExpectation, 0.0}; }
  static RiskMeasureKind variance() { return {Type::kVariance, 0.0}; }
  static RiskMeasureKind var(double alpha);
  static RiskMeasureKind es(double alpha);
  /// Parses "expectation", "variance", "var(0.95)", "es(0.99)".
  static RiskMeasureKind parse(const std::string& text);

  bool has_level() const { return type == Type::kVar || type == Type::kEs; }
  /// "expectation", "variance", "var", "es".
  std::string name() const;
  /// name() plus the level, e.g. "var(0.95)".
  std::string label() const;
  /// Minimum number of replications the estimator accepts.
  std::size_t min_samples() const;

  friend bool operator==(const RiskMeasureKind&, const RiskMeasureKind&) = default;
};

double sample_mean(std::span<const double> x);
/// Unbiased sample variance (0 for a single value).
double sample_variance(std::span<const double> x);
/// x_(ceil(alpha n)), the left-continuous inverse of the empirical CDF.
double empirical_var(std::span<const double> x, double alpha);
/// (1 / (1 - alpha)) times the integral of the empirical quantile over (alpha, 1).
double empirical_es(std::span<const double> x, double alpha);
/// Applies the kind's estimator; `scratch` may be reused between calls.
double apply_measure(const RiskMeasureKind& kind, std::span<const double> x, std::vector<double>& scratch);
double apply_measure(const RiskMeasureKind& kind, std::span<const double> x);

/// Bootstrap resample indices shared by every column with n replications, so
/// differences between columns are paired.
class Bootstrap {
 public:
  Bootstrap(std::size_t n, std::size_t resamples, std::uint64_t seed);

  std::size_t n() const { return n_; }
  std::size_t resamples() const { return resamples_; }
  /// Estimates of `kind` on each resample of x.
  std::vector<double> draws(const RiskMeasureKind& kind, std::span<const double> x) const;
  /// Draws of an arbitrary statistic of a resampled column.
  template <class Stat>
  std::vector<double> draws_of(std::span<const double> x, Stat stat) const {
    std::vector<double> out(resamples_), buf(n_);
    for (std::size_t b = 0; b < resamples_; ++b) {
      const std::uint32_t* idx = index_.data() + b * n_;
      for (std::size_t i = 0; i < n_; ++i) buf[i] = x[idx[i]];
      out[b] = stat(std::span<const double>(buf));
    }
    return out;
  }

 private:
  std::size_t n_;
  std::size_t resamples_;
  std::vector<std::uint32_t> index_;
};

inline constexpr std::size_t kDefaultBootstrap = 200;

struct RiskEstimate {
  RiskMeasureKind kind;
  double estimate = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
  std::string region_id;
  double lambda = 1.0;
  std::vector<double> draws;  // bootstrap replicates of the estimate
};

/// Throws kSampleSize naming the threshold when n is too small for `kind`.
void require_samples(const RiskMeasureKind& kind, std::size_t n);

RiskEstimate spatial_risk(const LossTable& table, const RiskMeasureKind& kind, const std::string& region_id,
                          double lambda, const Bootstrap& boot);
RiskEstimate spatial_risk(std::span<const double> losses, const RiskMeasureKind& kind, const Bootstrap& boot);

/// Standard deviation of bootstrap draws.
double bootstrap_stderr(std::span<const double> draws);

enum class CheckStatus { kPass, kFail, kInconclusive, kPreconditionViolated };
const char* to_string(CheckStatus s);

/// Two-sided normal quantile for a confidence level (0.99 -> 2.5758).
double normal_critical(double level);

struct AdequacyReport {
  RiskMeasureKind kind;
  double premium = 0.0;
  double union_side = 0.0;  // Pi(L(A1 u A2) - nu(A1 u A2) p_r)
  double single_side = 0.0;  // Pi(L(A1) - nu(A1) p_r)
  double difference = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double single_risk = 0.0;  // Pi(L_N(A1)), against which the premium is checked
  bool precondition = false;
  bool holds = false;
  CheckStatus status = CheckStatus::kInconclusive;
  std::string details;
};

/// Empirical check of the premium adequacy inequality on paired columns of
/// L_N(A1), L_N(A2), L_N(A1 u A2). Only VaR and ES qualify.
AdequacyReport premium_adequacy(const RegionUnion& a1, const RegionUnion& a2, std::span<const double> ln_a1,
                                std::span<const double> ln_union, double premium, const RiskMeasureKind& kind,
                                const Bootstrap& boot, double level = 0.99);

}  // namespace spatialrisk
