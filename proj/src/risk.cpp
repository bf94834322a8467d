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

#include "spatialrisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "spatialrisk/error.hpp"
#include "spatialrisk/gaussian.hpp"

namespace spatialrisk {
namespace {

void check_level(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::kInvalidParameter, "risk level alpha must be in (0, 1)");
}

void check_nonempty(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorKind::kSampleSize, "empty sample");
}

// ceil(alpha n), treating alpha n within rounding of an integer as that integer.
std::size_t upper_rank(double alpha, std::size_t n) {
  const double t = alpha * static_cast<double>(n);
  const double r = std::round(t);
  double k = std::abs(t - r) <= 1e-9 * std::max(1.0, t) ? r : std::ceil(t);
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, n);
}

std::string format_level(double a) {
  std::ostringstream os;
  os << a;
  return os.str();
}

}  // namespace

RiskMeasureKind RiskMeasureKind::var(double alpha) {
  check_level(alpha);
  return {Type::kVar, alpha};
}

RiskMeasureKind RiskMeasureKind::es(double alpha) {
  check_level(alpha);
  return {Type::kEs, alpha};
}

RiskMeasureKind RiskMeasureKind::parse(const std::string& text) {
  if (text == "expectation") return expectation();
  if (text == "variance") return variance();
  auto open = text.find('(');
  if (open != std::string::npos && text.back() == ')') {
    std::string head = text.substr(0, open);
    std::string arg = text.substr(open + 1, text.size() - open - 2);
    std::size_t used = 0;
    double alpha = 0.0;
    try {
      alpha = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == arg.size() && used > 0) {
      if (head == "var") return var(alpha);
      if (head == "es") return es(alpha);
    }
  }
  throw Error(ErrorKind::kConfig, "unknown risk kind '" + text + "' (expectation, variance, var(a), es(a))");
}

std::string RiskMeasureKind::name() const {
  switch (type) {
    case Type::kExpectation: return "expectation";
    case Type::kVariance: return "variance";
    case Type::kVar: return "var";
    case Type::kEs: return "es";
  }
  return "?";
}

std::string RiskMeasureKind::label() const {
  return has_level() ? name() + "(" + format_level(alpha) + ")" : name();
}

std::size_t RiskMeasureKind::min_samples() const {
  if (!has_level()) return 30;
  return std::max<std::size_t>(1000, static_cast<std::size_t>(std::ceil(50.0 / (1.0 - alpha) - 1e-9)));
}

double sample_mean(std::span<const double> x) {
  check_nonempty(x);
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  check_nonempty(x);
  if (x.size() < 2) return 0.0;
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

namespace {

double var_inplace(std::vector<double>& buf, double alpha) {
  const std::size_t k = upper_rank(alpha, buf.size());
  std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k - 1), buf.end());
  return buf[k - 1];
}

double es_inplace(std::vector<double>& buf, double alpha) {
  const std::size_t n = buf.size();
  const std::size_t k = upper_rank(alpha, n);
  std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k - 1), buf.end());
  const double nd = static_cast<double>(n);
  double tail = 0.0;
  for (std::size_t i = k; i < n; ++i) tail += buf[i];
  const double boundary = std::max(0.0, static_cast<double>(k) / nd - alpha);
  const double es = (boundary * buf[k - 1] + tail / nd) / (1.0 - alpha);
  // Rounding can put the average a hair below the boundary quantile.
  return std::max(es, buf[k - 1]);
}

}  // namespace

double empirical_var(std::span<const double> x, double alpha) {
  check_nonempty(x);
  check_level(alpha);
  std::vector<double> buf(x.begin(), x.end());
  return var_inplace(buf, alpha);
}

double empirical_es(std::span<const double> x, double alpha) {
  check_nonempty(x);
  check_level(alpha);
  std::vector<double> buf(x.begin(), x.end());
  return es_inplace(buf, alpha);
}

double apply_measure(const RiskMeasureKind& kind, std::span<const double> x, std::vector<double>& scratch) {
  check_nonempty(x);
  switch (kind.type) {
    case RiskMeasureKind::Type::kExpectation: return sample_mean(x);
    case RiskMeasureKind::Type::kVariance: return sample_variance(x);
    case RiskMeasureKind::Type::kVar:
      check_level(kind.alpha);
      scratch.assign(x.begin(), x.end());
      return var_inplace(scratch, kind.alpha);
    case RiskMeasureKind::Type::kEs:
      check_level(kind.alpha);
      scratch.assign(x.begin(), x.end());
      return es_inplace(scratch, kind.alpha);
  }
  return 0.0;
}

double apply_measure(const RiskMeasureKind& kind, std::span<const double> x) {
  std::vector<double> scratch;
  return apply_measure(kind, x, scratch);
}

Bootstrap::Bootstrap(std::size_t n, std::size_t resamples, std::uint64_t seed) : n_(n), resamples_(resamples) {
  if (n == 0 || resamples == 0) throw Error(ErrorKind::kSampleSize, "bootstrap needs n > 0 and resamples > 0");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorKind::kInvalidParameter, "sample too large");
  index_.resize(n * resamples);
  const std::uint64_t base = derive_seed(seed, kBootstrapStream);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  for (std::size_t b = 0; b < resamples; ++b) {
    Rng rng = make_rng(base, b);
    for (std::size_t i = 0; i < n; ++i) index_[b * n + i] = pick(rng);
  }
}

std::vector<double> Bootstrap::draws(const RiskMeasureKind& kind, std::span<const double> x) const {
  if (x.size() != n_) throw Error(ErrorKind::kAlignment, "bootstrap built for a different sample size");
  std::vector<double> scratch;
  return draws_of(x, [&](std::span<const double> s) { return apply_measure(kind, s, scratch); });
}

double bootstrap_stderr(std::span<const double> draws) {
  if (draws.size() < 2) return 0.0;
  return std::sqrt(sample_variance(draws));
}

void require_samples(const RiskMeasureKind& kind, std::size_t n) {
  const std::size_t need = kind.min_samples();
  if (n < need) {
    throw Error(ErrorKind::kSampleSize, kind.label() + " needs at least " + std::to_string(need) +
                                            " replications, got " + std::to_string(n));
  }
}

RiskEstimate spatial_risk(std::span<const double> losses, const RiskMeasureKind& kind, const Bootstrap& boot) {
  require_samples(kind, losses.size());
  RiskEstimate est;
  est.kind = kind;
  est.n = losses.size();
  est.estimate = apply_measure(kind, losses);
  est.draws = boot.draws(kind, losses);
  est.std_err = bootstrap_stderr(est.draws);
  return est;
}

RiskEstimate spatial_risk(const LossTable& table, const RiskMeasureKind& kind, const std::string& region_id,
                          double lambda, const Bootstrap& boot) {
  RiskEstimate est = spatial_risk(table.column(region_id, lambda), kind, boot);
  est.region_id = region_id;
  est.lambda = lambda;
  return est;
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass: return "PASS";
    case CheckStatus::kFail: return "FAIL";
    case CheckStatus::kInconclusive: return "INCONCLUSIVE";
    case CheckStatus::kPreconditionViolated: return "PRECONDITION_VIOLATED";
  }
  return "?";
}

double normal_critical(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::kInvalidParameter, "confidence level must be in (0, 1)");
  return normal_quantile(0.5 + 0.5 * level);
}

AdequacyReport premium_adequacy(const RegionUnion& a1, const RegionUnion& a2, std::span<const double> ln_a1,
                                std::span<const double> ln_union, double premium, const RiskMeasureKind& kind,
                                const Bootstrap& boot, double level) {
  if (!kind.has_level()) {
    throw Error(ErrorKind::kInvalidParameter, "premium adequacy needs a translation-invariant, homogeneous kind (var, es)");
  }
  for (const auto& p : a1.parts()) {
    for (const auto& q : a2.parts()) {
      if (!disjoint(p, q)) throw Error(ErrorKind::kDisjointness, "premium adequacy regions overlap");
    }
  }
  if (ln_a1.size() != ln_union.size()) throw Error(ErrorKind::kAlignment, "columns differ in length");
  require_samples(kind, ln_a1.size());

  const double nu1 = a1.measure(), nuu = a1.measure() + a2.measure();
  std::vector<double> s1(ln_a1.size()), su(ln_union.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    s1[i] = nu1 * ln_a1[i] - nu1 * premium;
    su[i] = nuu * ln_union[i] - nuu * premium;
  }
  AdequacyReport r;
  r.kind = kind;
  r.premium = premium;
  r.single_risk = apply_measure(kind, ln_a1);
  r.precondition = premium >= r.single_risk;
  r.union_side = apply_measure(kind, su);
  r.single_side = apply_measure(kind, s1);
  r.difference = r.union_side - r.single_side;
  auto d1 = boot.draws(kind, s1), du = boot.draws(kind, su);
  std::vector<double> diff(d1.size());
  for (std::size_t b = 0; b < diff.size(); ++b) diff[b] = du[b] - d1[b];
  const double se = bootstrap_stderr(diff), z = normal_critical(level);
  r.ci_low = r.difference - z * se;
  r.ci_high = r.difference + z * se;
  r.holds = r.ci_low <= 0.0;
  std::ostringstream os;
  os.precision(6);
  os << "union side " << r.union_side << ", single side " << r.single_side << ", difference " << r.difference
     << " [" << r.ci_low << ", " << r.ci_high << "]";
  if (!r.precondition) {
    r.status = CheckStatus::kPreconditionViolated;
    os << "; premium " << premium << " below " << kind.label() << "(L_N(A1)) = " << r.single_risk
       << ", inequality not asserted";
  } else {
    r.status = r.holds ? CheckStatus::kPass : CheckStatus::kFail;
  }
  r.details = os.str();
  return r;
}

}  // namespace spatialrisk
