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

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "spatialrisk/error.hpp"
#include "spatialrisk/risk.hpp"

using namespace spatialrisk;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal quantile by bisection on the erfc-based CDF.
double quantile_bisect(double a) {
  double lo = -40, hi = 40;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi_cdf(mid) < a ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ES by midpoint quadrature of the quantile function over (a, 1).
double es_quadrature(double a) {
  const int n = 20000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += quantile_bisect(a + (i + 0.5) * (1 - a) / n);
  return s / n;
}

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> x(n);
  for (double& v : x) v = d(rng);
  return x;
}

}  // namespace

TEST_SUITE("risk") {
TEST_CASE("kinds") {
  CHECK(RiskMeasureKind::parse("var(0.95)") == RiskMeasureKind::var(0.95));
  CHECK(RiskMeasureKind::parse("es(0.99)").label() == "es(0.99)");
  CHECK(RiskMeasureKind::parse("variance") == RiskMeasureKind::variance());
  CHECK_THROWS_AS(RiskMeasureKind::var(1.0), Error);
  CHECK_THROWS_AS(RiskMeasureKind::parse("median"), Error);
  CHECK(RiskMeasureKind::expectation().min_samples() == 30);
  CHECK(RiskMeasureKind::var(0.95).min_samples() == 1000);
  CHECK(RiskMeasureKind::es(0.999).min_samples() == 50000);
}

TEST_CASE("VaR and ES examples") {
  std::vector<double> x(10);
  std::iota(x.begin(), x.end(), 1.0);
  CHECK(empirical_var(x, 0.9) == 9.0);
  CHECK(empirical_es(x, 0.9) == doctest::Approx(10.0));
  CHECK(empirical_var(x, 0.5) == 5.0);
  CHECK(empirical_es(x, 0.75) == doctest::Approx((0.05 * 8 + 0.1 * 9 + 0.1 * 10) / 0.25));
  std::vector<double> c(17, 4.25);
  CHECK(empirical_var(c, 0.3) == 4.25);
  CHECK(empirical_es(c, 0.3) == doctest::Approx(4.25));
  CHECK_THROWS_AS(empirical_var(std::vector<double>{}, 0.5), Error);
  CHECK_THROWS_AS(empirical_es(std::vector<double>{}, 0.5), Error);
}

TEST_CASE("Gaussian oracles") {
  const double q = quantile_bisect(0.95), es = es_quadrature(0.95);
  CHECK(q == doctest::Approx(1.6448536).epsilon(1e-6));
  CHECK(es == doctest::Approx(std::exp(-q * q / 2) / std::sqrt(2 * M_PI) / 0.05).epsilon(1e-3));
  auto x = normals(1000000, 11);
  CHECK(std::abs(empirical_var(x, 0.95) - q) < 0.01);
  CHECK(std::abs(empirical_es(x, 0.95) - es) < 0.02);
  CHECK(normal_critical(0.99) == doctest::Approx(quantile_bisect(0.995)).epsilon(1e-9));
}

TEST_CASE("sample invariances") {
  auto x = normals(2001, 3);
  for (double a : {0.05, 0.5, 0.95, 0.99}) {
    const double v = empirical_var(x, a), e = empirical_es(x, a);
    CHECK(e >= v);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i] + 3.0;
    CHECK(empirical_var(y, a) == 2.0 * v + 3.0);
    CHECK(empirical_es(y, a) == doctest::Approx(2.0 * e + 3.0).epsilon(1e-12));
  }
  double prev = -1e300;
  for (double a = 0.01; a < 1.0; a += 0.01) {
    const double e = empirical_es(x, a);
    CHECK(e >= prev - 1e-12);
    prev = e;
  }
}

TEST_CASE("bootstrap and sample-size rules") {
  auto x = normals(1000, 5);
  Bootstrap b1(x.size(), 200, 9), b2(x.size(), 200, 9);
  auto e1 = spatial_risk(x, RiskMeasureKind::var(0.95), b1), e2 = spatial_risk(x, RiskMeasureKind::var(0.95), b2);
  CHECK(e1.std_err == e2.std_err);
  CHECK(e1.std_err > 0.0);
  auto m = spatial_risk(x, RiskMeasureKind::expectation(), b1);
  CHECK(m.std_err == doctest::Approx(1.0 / std::sqrt(1000.0)).epsilon(0.2));
  auto es = spatial_risk(x, RiskMeasureKind::es(0.95), b1);
  CHECK(es.estimate >= e1.estimate);
  for (std::size_t i = 0; i < es.draws.size(); ++i) CHECK(es.draws[i] >= e1.draws[i]);

  std::vector<double> small(999, 1.0);
  try {
    spatial_risk(small, RiskMeasureKind::var(0.95), Bootstrap(small.size(), 10, 1));
    FAIL("expected a sample-size error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSampleSize);
    CHECK(std::string(e.what()).find("1000") != std::string::npos);
  }
  std::vector<double> few(29, 1.0);
  CHECK_THROWS_AS(spatial_risk(few, RiskMeasureKind::expectation(), Bootstrap(few.size(), 10, 1)), Error);
  std::vector<double> flat(30, 2.5);
  CHECK(spatial_risk(flat, RiskMeasureKind::variance(), Bootstrap(flat.size(), 10, 1)).estimate == 0.0);
}

TEST_CASE("expectation of indicator losses") {
  McPlan p;
  p.seed = 4;
  p.n_reps = 4000;
  p.grid = GridSpec(Box{0, 0, 2, 1}, 0.1);
  p.regions = {{"A", Region::rect(0, 0, 1, 1)}};
  LossTable t = run_replications(p, CostModel{});
  auto est = spatial_risk(t, RiskMeasureKind::expectation(), "A", 1.0, Bootstrap(t.n_reps(), 200, 1));
  CHECK(std::abs(est.estimate - (1 - std::exp(-1.0))) < 3 * est.std_err);
  CHECK(est.region_id == "A");
}

TEST_CASE("premium adequacy") {
  Region a1 = Region::rect(0, 0, 1, 1), a2 = Region::rect(1, 0, 2, 1);
  const auto kind = RiskMeasureKind::var(0.95);
  std::vector<double> c(1000, 0.7);
  Bootstrap boot(c.size(), 50, 1);
  auto flat = premium_adequacy(a1, a2, c, c, 0.7, kind, boot);
  CHECK(flat.union_side == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(flat.single_side == doctest::Approx(0.0).epsilon(1e-15));
  auto low = premium_adequacy(a1, a2, c, c, 0.6, kind, boot);
  CHECK_FALSE(low.precondition);
  CHECK(low.status == CheckStatus::kPreconditionViolated);
  CHECK_THROWS_AS(premium_adequacy(a1, Region::rect(0.5, 0, 1.5, 1), c, c, 0.7, kind, boot), Error);

  for (std::uint64_t seed : {101u, 202u}) {
    McPlan p;
    p.seed = seed;
    p.n_reps = 2000;
    p.grid = GridSpec(Box{0, 0, 2, 1}, 0.05);
    p.regions = {{"A1", a1}, {"U", RegionUnion({a1, a2})}};
    LossTable t = run_replications(p, CostModel{});
    auto l1 = t.column("A1", 1.0), lu = t.column("U", 1.0);
    const double pr = empirical_var(l1, 0.95) + 0.05;
    auto rep = premium_adequacy(a1, a2, l1, lu, pr, kind, Bootstrap(t.n_reps(), 200, seed));
    CHECK(rep.precondition);
    CHECK(rep.holds);
    CHECK(rep.status == CheckStatus::kPass);
  }
}
}
