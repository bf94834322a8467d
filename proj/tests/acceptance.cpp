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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "spatialrisk/axioms.hpp"
#include "spatialrisk/error.hpp"
#include "spatialrisk/gaussian.hpp"
#include "spatialrisk/maxstable.hpp"
#include "spatialrisk/risk.hpp"

using namespace spatialrisk;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& details, double seconds) {
  std::printf("criterion %2d: %s  (%.1fs) %s\n", id, pass ? "PASS" : "FAIL", seconds, details.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <class F>
void criterion(int id, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string details;
  bool pass = false;
  try {
    pass = body(details);
  } catch (const std::exception& e) {
    details += std::string(" exception: ") + e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, pass, details, s);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double ks_frechet(std::vector<double> z) {
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = std::exp(-1.0 / z[i]);
    d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  return d;
}

// Independent Gaussian oracles: bisection on erfc, density in closed form.
double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }
double q_bisect(double a) {
  double lo = -40, hi = 40;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi_cdf(mid) < a ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Smith Sigma = I coefficient by a tensor Gauss-Legendre rule on
// 2 - int min(f(s), f(s - h)) ds, written independently of the library.
double theta_oracle(double hx) {
  static const double x5[] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                              0.9061798459386640};
  static const double w5[] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                              0.2369268850561891};
  const int panels = 240;
  const double lo = -10.0 + hx / 2, hi = 10.0 + hx / 2, ylo = -10.0, yhi = 10.0;
  const double dx = (hi - lo) / panels, dy = (yhi - ylo) / panels;
  double s = 0.0;
  for (int i = 0; i < panels; ++i)
    for (int a = 0; a < 5; ++a) {
      const double x = lo + (i + 0.5 + 0.5 * x5[a]) * dx;
      for (int j = 0; j < panels; ++j)
        for (int b = 0; b < 5; ++b) {
          const double y = ylo + (j + 0.5 + 0.5 * x5[b]) * dy;
          const double f0 = std::exp(-0.5 * (x * x + y * y)), f1 = std::exp(-0.5 * ((x - hx) * (x - hx) + y * y));
          s += w5[a] * w5[b] * std::min(f0, f1);
        }
    }
  return 2.0 - s * dx * dy / 4.0 / (2.0 * kPi);
}

std::vector<double> series_at(const FieldSimulator& sim, std::size_t cell, std::size_t n, std::uint64_t seed) {
  std::vector<double> z(sim.grid().cell_count()), out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    Rng rng = make_rng(seed, r);
    sim.simulate(rng, z);
    out.push_back(z[cell]);
  }
  return out;
}

// The shared homothety experiment: Smith Sigma = I, indicator u = 1,
// unit square A, N = 10^4, ladder {1, 2, 4, 8, 16}.
struct Ladder {
  LossTable table;
  SigmaEstimate sigma;
  double mu_exact = 1.0 - std::exp(-1.0);
  double nu = 1.0;
  Bootstrap boot{1, 1, 1};
  RiskEstimate at(const RiskMeasureKind& k, double lambda) const {
    return spatial_risk(table, k, "A", lambda, boot);
  }
  std::vector<RiskEstimate> fit_points(const RiskMeasureKind& k) const {
    std::vector<RiskEstimate> e;
    for (double l : {2.0, 4.0, 8.0, 16.0}) e.push_back(at(k, l));
    return e;
  }
};

Ladder& ladder() {
  static Ladder* L = [] {
    auto* p = new Ladder;
    McPlan plan;
    plan.seed = 2026;
    plan.n_reps = 10000;
    plan.grid = GridSpec(Box{-8, -8, 8, 8}, 0.1);
    plan.regions = {{"A", Region::rect(-0.5, -0.5, 0.5, 0.5)}};
    plan.lambdas = {1, 2, 4, 8, 16};
    CostModel model;
    p->table = run_replications(plan, model);
    p->sigma = estimate_sigma(model, plan.grid, SigmaOptions{.n_reps = 2000, .R = std::nullopt, .seed = 2027});
    p->boot = Bootstrap(plan.n_reps, kDefaultBootstrap, 2028);
    return p;
  }();
  return *L;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  // 1. Standard Frechet margins.
  criterion(1, [](std::string& d) {
    GridSpec gs(Box{0, 0, 1, 1}, 0.25);
    FieldSimulator smith(SmithModel{}, gs, derive_seed(1, kPilotStream));
    const double ks_s = ks_frechet(series_at(smith, *gs.locate({0.6, 0.4}), 100000, 1));
    GridSpec gb(Box{0, 0, 1, 1}, 0.25);
    FieldSimulator br(BrownResnickModel{}, gb, derive_seed(2, kPilotStream));
    const double ks_b = ks_frechet(series_at(br, *gb.locate({0.1, 0.1}), 100000, 2));
    d = fmt("KS smith %.5f (< 0.01), KS brown-resnick %.5f (< 0.015), 1e5 reps each", ks_s, ks_b);
    return ks_s < 0.01 && ks_b < 0.015;
  });

  // 2. Empirical extremal coefficients against the quadrature oracle.
  criterion(2, [](std::string& d) {
    GridSpec g(Box{-0.5, -0.5, 20.5, 0.5}, 1.0);
    FieldSimulator sim(SmithModel{}, g, 3);
    const std::size_t n = 20000;
    std::vector<double> z(g.cell_count()), z0, z1, z20;
    for (std::size_t r = 0; r < n; ++r) {
      Rng rng = make_rng(4, r);
      sim.simulate(rng, z);
      z0.push_back(z[0]);
      z1.push_back(z[1]);
      z20.push_back(z[20]);
    }
    const double oracle = theta_oracle(1.0);
    auto t1 = extremal_coefficient_empirical(z0, z1), t0 = extremal_coefficient_empirical(z0, z0),
         tf = extremal_coefficient_empirical(z0, z20);
    const bool p1 = std::abs(t1.theta - oracle) <= 3 * t1.std_err;
    const bool p0 = std::abs(t0.theta - 1.0) <= 3 * t0.std_err;
    const bool pf = std::abs(tf.theta - 2.0) <= 3 * tf.std_err;
    d = fmt("theta(1,0) %.4f +- %.4f vs oracle %.5f; theta(x,x) %.4f +- %.4f; theta(20,0) %.4f +- %.4f", t1.theta,
            t1.std_err, oracle, t0.theta, t0.std_err, tf.theta, tf.std_err);
    return p1 && p0 && pf;
  });

  // 3. Expectation axiom at every ladder point.
  criterion(3, [](std::string& d) {
    Ladder& L = ladder();
    bool ok = true;
    for (double l : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      auto e = L.at(RiskMeasureKind::expectation(), l);
      const bool p = std::abs(e.estimate - L.mu_exact) <= 3 * e.std_err;
      ok = ok && p;
      d += fmt("l=%g %.5f+-%.5f%s ", l, e.estimate, e.std_err, p ? "" : "*");
    }
    d += fmt("(target %.5f)", L.mu_exact);
    return ok;
  });

  // 4. Variance decays with order -2 and K2 = sigma^2 / nu.
  criterion(4, [](std::string& d) {
    Ladder& L = ladder();
    auto pts = L.fit_points(RiskMeasureKind::variance());
    HomogeneityFit f = fit_homogeneity(pts);
    const double target = L.sigma.sigma2 / L.nu;
    d = fmt("gamma %.4f (in [1.6, 2.4]), K2 %.4f vs sigma^2/nu %.4f (rel %.3f, <= 0.25), K1 %.5f", f.gamma, f.K2,
            target, std::abs(f.K2 - target) / target, f.K1);
    return f.gamma >= 1.6 && f.gamma <= 2.4 && std::abs(f.K2 - target) <= 0.25 * target;
  });

  // 5. VaR decays with order -1.
  criterion(5, [](std::string& d) {
    Ladder& L = ladder();
    const auto kind = RiskMeasureKind::var(0.95);
    HomogeneityFit f = fit_homogeneity(L.fit_points(kind));
    auto v16 = L.at(kind, 16.0);
    auto m16 = L.at(RiskMeasureKind::expectation(), 16.0);
    const double lhs = 16.0 * (v16.estimate - m16.estimate);
    const double rhs = L.sigma.sigma() * q_bisect(0.95) / std::sqrt(L.nu);
    const bool pg = f.gamma >= 0.7 && f.gamma <= 1.3;
    const bool pk = std::abs(f.K1 - L.mu_exact) <= 3 * f.K1_se;
    const bool pr = std::abs(lhs - rhs) <= 0.15 * rhs;
    d = fmt("gamma %.4f%s, K1 %.5f +- %.5f%s, 16(VaR-mu) %.4f vs %.4f (rel %.3f)%s", f.gamma, pg ? "" : "*", f.K1,
            f.K1_se, pk ? "" : "*", lhs, rhs, std::abs(lhs - rhs) / rhs, pr ? "" : "*");
    return pg && pk && pr;
  });

  // 6. ES decays with order -1 and dominates VaR.
  criterion(6, [](std::string& d) {
    Ladder& L = ladder();
    bool dom = true;
    for (double l : {1.0, 2.0, 4.0, 8.0, 16.0})
      dom = dom && L.at(RiskMeasureKind::es(0.95), l).estimate >= L.at(RiskMeasureKind::var(0.95), l).estimate;
    auto e16 = L.at(RiskMeasureKind::es(0.95), 16.0);
    auto m16 = L.at(RiskMeasureKind::expectation(), 16.0);
    const double lhs = 16.0 * (e16.estimate - m16.estimate);
    const double rhs = L.sigma.sigma() * phi_pdf(q_bisect(0.95)) / 0.05 / std::sqrt(L.nu);
    const bool pr = std::abs(lhs - rhs) <= 0.15 * rhs;
    d = fmt("16(ES-mu) %.4f vs %.4f (rel %.3f), ES >= VaR on ladder: %s", lhs, rhs, std::abs(lhs - rhs) / rhs,
            dom ? "yes" : "no");
    return pr && dom;
  });

  // 7. CLT rescaling at lambda = 16.
  criterion(7, [](std::string& d) {
    Ladder& L = ladder();
    auto m16 = L.at(RiskMeasureKind::expectation(), 16.0);
    CltReport r = clt_report(L.table, "A", m16.estimate, L.sigma, L.nu, &L.boot);
    const CltRow& row = r.rows.back();
    const bool ps = std::abs(row.skewness) - 3 * row.skewness_se < 0.1;
    const bool pk = std::abs(row.kurtosis) - 3 * row.kurtosis_se < 0.2;
    const bool pv = std::abs(row.variance_ratio - 1.0) <= 0.15;
    d = fmt("skew %.4f +- %.4f%s, ex.kurt %.4f +- %.4f%s, var/target %.4f%s (sigma^2 %.4f +- %.4f, R %.2f)",
            row.skewness, row.skewness_se, ps ? "" : "*", row.kurtosis, row.kurtosis_se, pk ? "" : "*",
            row.variance_ratio, pv ? "" : "*", L.sigma.sigma2, L.sigma.std_err, L.sigma.R);
    return ps && pk && pv;
  });

  // 8. Sub-additivity and translation, both stationary models.
  criterion(8, [](std::string& d) {
    Region a1 = Region::rect(0, 0, 1, 1), a2 = Region::rect(1, 0, 2, 1);
    const std::vector<RiskMeasureKind> kinds{RiskMeasureKind::expectation(), RiskMeasureKind::variance(),
                                             RiskMeasureKind::var(0.95), RiskMeasureKind::es(0.95)};
    bool ok = true;
    for (int m = 0; m < 2; ++m) {
      McPlan p;
      p.seed = 88 + m;
      p.n_reps = 10000;
      p.grid = GridSpec(Box{0, 0, 4, 1}, m == 0 ? 0.1 : 0.2);
      p.regions = {{"A1", a1}, {"A2", a2}, {"U", RegionUnion({a1, a2})}, {"S", translate(a1, {3, 0})}};
      CostModel model;
      if (m == 1) model.field = BrownResnickModel{};
      LossTable t = run_replications(p, model);
      Bootstrap boot(t.n_reps(), kDefaultBootstrap, 90 + m);
      d += m == 0 ? "smith:" : " brown-resnick:";
      for (const auto& k : kinds) {
        auto r1 = spatial_risk(t, k, "A1", 1.0, boot), r2 = spatial_risk(t, k, "A2", 1.0, boot),
             ru = spatial_risk(t, k, "U", 1.0, boot), rs = spatial_risk(t, k, "S", 1.0, boot);
        auto sub = check_subadditivity(a1, a2, r1, r2, ru, 0.99);
        auto tr = check_translation(r1, rs, model.stationary(), 0.99);
        const bool p1 = sub.status == CheckStatus::kPass, p2 = tr.status == CheckStatus::kPass;
        ok = ok && p1 && p2;
        d += fmt(" %s sub %s trans %s;", k.label().c_str(), to_string(sub.status), to_string(tr.status));
      }
    }
    return ok;
  });

  // 9. Noiseless homogeneity curves.
  criterion(9, [](std::string& d) {
    std::vector<double> lam{1, 2, 4, 8, 16};
    double worst = 0.0;
    for (double g : {0.25, 0.5, 1.0, 2.0, 3.0}) {
      const double k1 = 0.6, k2 = 1.5;
      std::vector<double> y;
      for (double l : lam) y.push_back(k1 + k2 * std::pow(l, -g));
      HomogeneityFit f = fit_homogeneity(lam, y, {}, {}, RiskMeasureKind::variance());
      worst = std::max({worst, std::abs(f.K1 - k1) / k1, std::abs(f.K2 - k2) / k2, std::abs(f.gamma - g) / g});
    }
    d = fmt("worst relative error %.3g (<= 1e-6)", worst);
    return worst <= 1e-6;
  });

  // 10. Two full CLI runs produce byte-identical CSVs.
  criterion(10, [](std::string& d) {
    fs::path dir = fs::temp_directory_path() / "spatialrisk_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = R"cfg({
  "model": {"variant": "smith", "sigma": "I"},
  "cost": {"damage": {"kind": "indicator", "u": 1}, "exposure": {"kind": "const", "c": 1}},
  "plan": {"seed": 7, "n_reps": 2000, "grid": {"x0": -2, "y0": -2, "x1": 4, "y1": 2, "h": 0.1},
           "lambdas": [0.5, 1, 2, 4]},
  "regions": {"A": {"rect": [-0.5, -0.5, 0.5, 0.5]}, "B": {"translate": "A", "by": [1.5, 0]}},
  "risk": ["expectation", "variance", "var(0.95)", "es(0.95)"],
  "sigma": {"n_reps": 200},
  "checks": [{"type": "translation", "region": "A", "shifted": "B", "lambdas": [1]},
             {"type": "homogeneity", "region": "A", "kinds": ["var(0.95)"]},
             {"type": "clt", "region": "A"}]
})cfg";
    std::ofstream(dir / "run.cfg") << cfg;
    for (const char* o : {"a", "b"}) {
      const std::string cmd = std::string(SPATIALRISK_CLI) + " run --config " + (dir / "run.cfg").string() +
                              " --out " + (dir / o).string() + " > /dev/null 2>&1";
      const int st = std::system(cmd.c_str());
      const int code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
      if (code != 0 && code != 5) {
        d = fmt("run exited with %d", code);
        return false;
      }
    }
    std::size_t n = 0;
    bool same = true;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      if (e.path().extension() != ".csv") continue;
      ++n;
      const fs::path other = dir / "b" / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
        same = false;
        d += " differs: " + e.path().filename().string();
      }
    }
    d = fmt("%zu csv files compared, identical: %s", n, same ? "yes" : "no") + d;
    return same && n >= 5;
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
