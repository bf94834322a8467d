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

// Command-line front end: run / simulate / estimate / check / oracle.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "spatialrisk/error.hpp"
#include "spatialrisk/gaussian.hpp"
#include "spatialrisk/maxstable.hpp"
#include "spatialrisk/pipeline.hpp"

using namespace spatialrisk;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_reps;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config,config", c.config, "JSON config file")->required();
  app->add_option("--seed", c.seed, "Override plan.seed");
  app->add_option("--n-reps", c.n_reps, "Override plan.n_reps");
  app->add_option("--out", c.out, "Override the output directory");
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
}

RunConfig load(const Common& c) {
  RunConfig cfg = load_config(c.config);
  apply_overrides(cfg, Overrides{c.seed, c.n_reps, c.out, c.threads});
  return cfg;
}

int report(const std::vector<CheckReport>& reports) {
  bool failed = false;
  for (const auto& r : reports) {
    std::cout << to_string(r.status) << "  " << r.check << "\n";
    if (r.status == CheckStatus::kFail) failed = true;
    if (r.status == CheckStatus::kInconclusive) std::cerr << "warning: inconclusive: " << r.check << "\n";
  }
  return failed ? kExitCheckFailed : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial risk measures of max-stable cost fields"};
  app.require_subcommand(1);

  Common run_opts, sim_opts, est_opts, chk_opts;
  std::size_t fields = 0;
  auto* run = app.add_subcommand("run", "Simulate, estimate and check in one go");
  add_common(run, run_opts);
  auto* sim = app.add_subcommand("simulate", "Simulate losses (and sigma_C) only");
  add_common(sim, sim_opts);
  sim->add_option("--fields", fields, "Also write the first N max-stable samples");
  auto* est = app.add_subcommand("estimate", "Risk table from an existing losses.csv");
  add_common(est, est_opts);
  auto* chk = app.add_subcommand("check", "Axiom checks from existing tables");
  add_common(chk, chk_opts);

  auto* oracle = app.add_subcommand("oracle", "Quadrature and closed-form oracles");
  oracle->require_subcommand(1);
  std::string sigma_text = "I";
  std::vector<double> lag{1.0, 0.0};
  int panels = 400;
  auto* o_theta = oracle->add_subcommand("theta", "Smith extremal coefficient theta(0, h)");
  o_theta->add_option("--sigma", sigma_text, "\"I\" or s11,s12,s22");
  o_theta->add_option("--lag", lag, "Lag vector h")->expected(2);
  o_theta->add_option("--panels", panels, "Quadrature panels per axis");
  double alpha = 0.95;
  auto* o_gauss = oracle->add_subcommand("gaussian", "Standard normal quantile and density");
  o_gauss->add_option("--alpha", alpha, "Level in (0, 1)");
  double u = 1.0;
  auto* o_frechet = oracle->add_subcommand("frechet", "Standard Frechet exceedance probability");
  o_frechet->add_option("--u", u, "Threshold > 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors count as configuration errors; --help exits 0.
    return app.exit(e) == 0 ? 0 : exit_code(ErrorKind::kConfig);
  }

  try {
    if (*run) {
      RunConfig cfg = load(run_opts);
      return report(run_pipeline(cfg));
    }
    if (*sim) {
      RunConfig cfg = load(sim_opts);
      write_manifest(cfg, "simulate");
      stage_simulate(cfg, fields);
      return 0;
    }
    if (*est) {
      stage_estimate(load(est_opts));
      return 0;
    }
    if (*chk) return report(stage_check(load(chk_opts)));
    if (*o_theta) {
      Eigen::Matrix2d s = Eigen::Matrix2d::Identity();
      if (sigma_text != "I") {
        std::vector<double> v;
        std::stringstream ss(sigma_text);
        std::string item;
        while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
        if (v.size() != 3) throw Error(ErrorKind::kConfig, "--sigma expects I or s11,s12,s22");
        s << v[0], v[1], v[1], v[2];
      }
      const double theta = smith_theta_quadrature(s, {lag[0], lag[1]}, panels);
      std::printf("theta=%.10f\nmixing_bound=%.10f\n", theta, mixing_bound(theta));
      return 0;
    }
    if (*o_gauss) {
      const double q = normal_quantile(alpha);
      std::printf("q=%.10f\nphi=%.10f\nes_factor=%.10f\n", q, normal_pdf(q), normal_pdf(q) / (1.0 - alpha));
      return 0;
    }
    if (*o_frechet) {
      if (!(u > 0.0)) throw Error(ErrorKind::kInvalidParameter, "--u must be positive");
      std::printf("exceedance=%.10f\ncdf=%.10f\n", -std::expm1(-1.0 / u), std::exp(-1.0 / u));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
