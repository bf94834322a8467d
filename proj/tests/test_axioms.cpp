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
#include <random>

#include "doctest.h"
#include "spatialrisk/axioms.hpp"
#include "spatialrisk/error.hpp"

using namespace spatialrisk;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double quantile_bisect(double a) {
  double lo = -40, hi = 40;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi_cdf(mid) < a ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> ladder() { return {1, 2, 4, 8, 16}; }

}  // namespace

TEST_SUITE("axioms") {
TEST_CASE("white noise integrates to v times the cell area") {
  GridSpec g(Box{0, 0, 4, 4}, 0.125);
  CovarianceAccumulator acc(g);
  std::mt19937_64 rng(2);
  const double v = 2.5;
  std::normal_distribution<double> d(1.0, std::sqrt(v));
  std::vector<double> f(g.cell_count());
  for (int r = 0; r < 400; ++r) {
    for (double& x : f) x = d(rng);
    acc.add(f);
  }
  CHECK(acc.count() == 400);
  SigmaEstimate s = acc.finish();
  const double a = g.cell_area();
  CHECK(s.R_from_rule);
  CHECK(std::abs(s.sigma2 - v * a) < 3.0 * s.std_err + 0.02 * v * a);
  CHECK(s.k0 == doctest::Approx(v).epsilon(0.02));
  auto [k1, se1] = acc.k_at(1, 0);
  CHECK(std::abs(k1) < 3.0 * se1 + 1e-3);
}

TEST_CASE("constant field has no covariance") {
  GridSpec g(Box{0, 0, 2, 2}, 0.25);
  CovarianceAccumulator acc(g);
  std::vector<double> f(g.cell_count(), 3.0);
  for (int r = 0; r < 20; ++r) acc.add(f);
  SigmaEstimate s = acc.finish(0.5);
  CHECK(s.sigma2 == doctest::Approx(0.0).epsilon(1e-12));
  for (const auto& b : s.curve) CHECK(std::abs(b.k) < 1e-12);
}

TEST_CASE("edge effect") {
  GridSpec g(Box{0, 0, 2, 1}, 0.1);
  CovarianceAccumulator acc(g);
  std::vector<double> f(g.cell_count(), 1.0);
  acc.add(f);
  acc.add(f);
  try {
    acc.finish(0.8);
    FAIL("expected an edge-effect error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEdgeEffect);
  }
}

TEST_CASE("Smith indicator covariance at three lags") {
  GridSpec g(Box{-3, -3, 3, 3}, 0.25);
  CostSampler s(CostModel{}, g, 12);
  CovarianceAccumulator acc(g);
  std::vector<double> z(g.cell_count()), c(g.cell_count());
  for (std::size_t r = 0; r < 3000; ++r) {
    s.sample(r, z, c);
    acc.add(c);
  }
  for (long lx : {2L, 4L, 8L}) {
    const double h = lx * g.h();
    const double theta = 2.0 * phi_cdf(h / 2.0);
    const double oracle = 1.0 - 2.0 * std::exp(-1.0) + std::exp(-theta) - std::pow(1.0 - std::exp(-1.0), 2);
    auto [k, se] = acc.k_at(lx, 0);
    CHECK(std::abs(k - oracle) < 3.0 * se);
  }
}

TEST_CASE("estimate_sigma is deterministic and thread invariant") {
  GridSpec g(Box{-2, -2, 2, 2}, 0.2);
  SigmaOptions o{.n_reps = 64, .R = 1.0, .seed = 3, .threads = 1};
  SigmaEstimate a = estimate_sigma(CostModel{}, g, o);
  o.threads = 4;
  SigmaEstimate b = estimate_sigma(CostModel{}, g, o);
  CHECK(a.sigma2 == b.sigma2);
  CHECK(a.std_err == b.std_err);
  CHECK(a.n_reps == 64);
  CHECK(a.sigma2 > 0.0);
  for (std::size_t i = 1; i < a.curve.size() && a.curve[i].radius <= 1.0; ++i)
    if (a.curve[i].k >= 0) CHECK(a.curve[i].partial >= a.curve[i - 1].partial);
}

TEST_CASE("noiseless homogeneity curves are recovered") {
  auto lam = ladder();
  struct Case {
    double k1, k2, g;
  };
  for (Case t : {Case{2, 3, 1}, Case{0, 5, 2}, Case{0.6, 0.4, 0.25}, Case{1, -2, 0.5}, Case{-3, 7, 3}}) {
    std::vector<double> y;
    for (double l : lam) y.push_back(t.k1 + t.k2 * std::pow(l, -t.g));
    HomogeneityFit f = fit_homogeneity(lam, y, {}, {}, RiskMeasureKind::variance());
    CHECK(std::abs(f.K1 - t.k1) <= 1e-6 * std::max(1.0, std::abs(t.k1)));
    CHECK(std::abs(f.K2 - t.k2) <= 1e-6 * std::abs(t.k2));
    CHECK(std::abs(f.gamma - t.g) <= 1e-6 * t.g);
    CHECK(f.residual_norm < 1e-6);
    CHECK_FALSE(f.unstable);
  }
  std::vector<double> two{1, 2, 3};
  CHECK_THROWS_AS(fit_homogeneity(two, two, {}, {}, RiskMeasureKind::variance()), Error);
  std::vector<double> y4{1, 1, 1, 1}, l4{1, 2, 3, 4};
  CHECK_THROWS_AS(fit_homogeneity(l4, y4, {}, {}, RiskMeasureKind::variance()), Error);
}

TEST_CASE("bootstrap draws give parameter intervals") {
  auto lam = ladder();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> e(0.0, 1e-3);
  std::vector<double> y, se;
  std::vector<std::vector<double>> draws;
  for (double l : lam) {
    const double mu = 0.5 + 1.5 / l;
    y.push_back(mu);
    se.push_back(1e-3);
    std::vector<double> d(200);
    for (double& v : d) v = mu + e(rng);
    draws.push_back(d);
  }
  HomogeneityFit f = fit_homogeneity(lam, y, se, draws, RiskMeasureKind::var(0.9));
  CHECK(f.gamma_ci[0] < 1.0);
  CHECK(f.gamma_ci[1] > 1.0);
  CHECK(f.gamma_se > 0.0);
  CHECK(f.K2_ci[0] > 0.0);
}

TEST_CASE("theoretical constants") {
  const double q = quantile_bisect(0.95);
  CHECK(q == doctest::Approx(1.64485).epsilon(1e-5));
  CHECK(phi_pdf(q) == doctest::Approx(0.10314).epsilon(1e-4));
  auto es = theoretical_constants(RiskMeasureKind::es(0.95), 1.0, 0.3, 1.0);
  CHECK(es.K2 == doctest::Approx(phi_pdf(q) / 0.05).epsilon(1e-9));
  CHECK(es.K2 == doctest::Approx(2.0627).epsilon(1e-4));
  CHECK(es.K1 == 0.3);
  CHECK(es.gamma == 1.0);
  auto v = theoretical_constants(RiskMeasureKind::variance(), 1.0, 0.3, 1.0);
  CHECK(v.K1 == 0.0);
  CHECK(v.K2 == 1.0);
  CHECK(v.gamma == 2.0);
  auto var = theoretical_constants(RiskMeasureKind::var(0.95), 2.0, 0.3, 4.0);
  CHECK(var.K2 == doctest::Approx(q).epsilon(1e-9));
  for (double a = 0.51; a < 0.999; a += 0.01) {
    const double qa = quantile_bisect(a);
    CHECK(phi_pdf(qa) / (1 - a) > qa);
    CHECK(theoretical_constants(RiskMeasureKind::es(a), 1.0, 0, 1.0).K2 >
          theoretical_constants(RiskMeasureKind::var(a), 1.0, 0, 1.0).K2);
  }
  try {
    theoretical_constants(RiskMeasureKind::var(0.5), 1.0, 0, 1.0);
    FAIL("expected an excluded-level error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kExcludedLevel);
  }
}

TEST_CASE("compare constants on an exact curve") {
  auto lam = ladder();
  std::vector<double> y;
  for (double l : lam) y.push_back(2.0 / (l * l));
  std::vector<double> se(lam.size(), 1e-4);
  std::vector<std::vector<double>> draws;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> e(0.0, 1e-4);
  for (double v : y) {
    std::vector<double> d(200);
    for (double& x : d) x = v + e(rng);
    draws.push_back(d);
  }
  HomogeneityFit f = fit_homogeneity(lam, y, se, draws, RiskMeasureKind::variance());
  SigmaEstimate s;
  s.sigma2 = 2.0;
  s.std_err = 0.01;
  auto cmp = compare_constants(f, s, 0.0, 1.0, RiskMeasureKind::variance());
  CHECK(cmp.theory.K2 == doctest::Approx(2.0));
  CHECK(cmp.status == CheckStatus::kPass);
  s.sigma2 = 4.0;
  CHECK(compare_constants(f, s, 0.0, 1.0, RiskMeasureKind::variance()).status == CheckStatus::kFail);
}

TEST_CASE("translation and sub-additivity reports") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> d(0.5, 0.1);
  std::vector<double> x(2000);
  for (double& v : x) v = d(rng);
  Bootstrap boot(x.size(), 200, 1);
  for (auto kind : {RiskMeasureKind::expectation(), RiskMeasureKind::var(0.95)}) {
    RiskEstimate a = spatial_risk(x, kind, boot);
    CheckReport same = check_translation(a, a, true);
    CHECK(same.status == CheckStatus::kPass);
    CHECK(check_translation(a, a, false).status == CheckStatus::kPreconditionViolated);
  }
  // Shifted by a large offset: disjoint intervals fail.
  std::vector<double> y(x);
  for (double& v : y) v += 1.0;
  CHECK(check_translation(spatial_risk(x, RiskMeasureKind::expectation(), boot),
                          spatial_risk(y, RiskMeasureKind::expectation(), boot), true)
            .status == CheckStatus::kFail);

  Region a1 = Region::rect(0, 0, 1, 1), a2 = Region::rect(1, 0, 2, 1);
  std::vector<double> flat(2000, 1.0);
  auto vf = spatial_risk(flat, RiskMeasureKind::variance(), boot);
  auto rep = check_subadditivity(a1, a2, vf, vf, vf);
  CHECK(rep.status == CheckStatus::kPass);
  CHECK(rep.statistic == 0.0);
  CHECK_THROWS_AS(check_subadditivity(a1, Region::rect(0.5, 0, 1.5, 1), vf, vf, vf), Error);
  // Union riskier than both parts.
  auto lo = spatial_risk(x, RiskMeasureKind::expectation(), boot);
  auto hi = spatial_risk(y, RiskMeasureKind::expectation(), boot);
  CHECK(check_subadditivity(a1, a2, lo, lo, hi).status == CheckStatus::kFail);
}

TEST_CASE("Smith sub-additivity and translation at two seeds") {
  Region a1 = Region::rect(0, 0, 1, 1), a2 = Region::rect(1, 0, 2, 1);
  for (std::uint64_t seed : {31u, 32u}) {
    McPlan p;
    p.seed = seed;
    p.n_reps = 3000;
    p.grid = GridSpec(Box{0, 0, 4, 1}, 0.1);
    p.regions = {{"A1", a1}, {"A2", a2}, {"U", RegionUnion({a1, a2})}, {"S", translate(a1, {3, 0})}};
    LossTable t = run_replications(p, CostModel{});
    Bootstrap boot(t.n_reps(), 200, seed);
    for (auto kind : {RiskMeasureKind::expectation(), RiskMeasureKind::es(0.95)}) {
      auto r1 = spatial_risk(t, kind, "A1", 1.0, boot), r2 = spatial_risk(t, kind, "A2", 1.0, boot),
           ru = spatial_risk(t, kind, "U", 1.0, boot), rs = spatial_risk(t, kind, "S", 1.0, boot);
      CHECK(check_subadditivity(a1, a2, r1, r2, ru).status == CheckStatus::kPass);
      CHECK(check_translation(r1, rs, true).status == CheckStatus::kPass);
    }
  }
}

TEST_CASE("clt report on a constant field") {
  LossTable t({"A"}, {1, 2, 4, 8}, 50);
  for (std::size_t l = 0; l < 4; ++l)
    for (double& v : t.column(0, l)) v = 0.25;
  SigmaEstimate s;
  s.sigma2 = 1.0;
  CltReport r = clt_report(t, "A", 0.25, s, 1.0);
  for (const auto& row : r.rows) {
    CHECK(row.degenerate);
    CHECK(row.variance == 0.0);
  }
}

TEST_CASE("sample moments") {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x(400000);
  for (double& v : x) v = e(rng);
  SampleMoments m = sample_moments(x);
  CHECK(m.mean == doctest::Approx(1.0).epsilon(0.01));
  CHECK(m.variance == doctest::Approx(1.0).epsilon(0.02));
  CHECK(m.skewness == doctest::Approx(2.0).epsilon(0.05));
  CHECK(m.kurtosis == doctest::Approx(6.0).epsilon(0.15));
}

TEST_CASE("variogram condition diagnostics") {
  std::vector<double> radii{4, 8, 16, 32, 64};
  auto rows = variogram_conditions(VariogramSpec::power(1.0, 1.0), radii);
  REQUIRE(rows.size() == radii.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::abs(rows[i].sup_ratio) < 1e-12);  // gamma is radial and increasing
    if (i > 0) CHECK(rows[i].growth > rows[i - 1].growth);
  }
}
}
