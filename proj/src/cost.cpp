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

#include "spatialrisk/cost.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "spatialrisk/error.hpp"

namespace spatialrisk {

double gev_transform(double z, const GevParams& p) {
  if (!(z > 0.0) || !std::isfinite(z)) throw Error(ErrorKind::kDomain, "GEV transform needs z > 0");
  if (!(p.tau > 0.0)) throw Error(ErrorKind::kInvalidParameter, "GEV scale tau must be positive");
  const double lz = std::log(z);
  if (p.xi == 0.0) return p.eta + p.tau * lz;
  return p.eta + p.tau * std::expm1(p.xi * lz) / p.xi;
}

double gev_inverse(double y, const GevParams& p) {
  if (!(p.tau > 0.0)) throw Error(ErrorKind::kInvalidParameter, "GEV scale tau must be positive");
  const double s = (y - p.eta) / p.tau;
  if (p.xi == 0.0) return std::exp(s);
  const double a = p.xi * s;
  if (!(a > -1.0)) {
    // Outside the GEV support: below it for xi > 0, above it for xi < 0.
    return p.xi > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::exp(std::log1p(a) / p.xi);
}

DamageFunction DamageFunction::indicator(double u) {
  if (!(u > 0.0) || !std::isfinite(u)) throw Error(ErrorKind::kInvalidParameter, "indicator threshold u must be > 0");
  return DamageFunction(IndicatorDamage{u});
}

DamageFunction DamageFunction::power(double u, double beta) {
  if (!(u > 0.0) || !std::isfinite(u)) throw Error(ErrorKind::kInvalidParameter, "power damage needs u > 0");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::kInvalidParameter, "power damage needs beta > 0");
  return DamageFunction(PowerDamage{u, beta});
}

DamageFunction DamageFunction::table(std::vector<double> z, std::vector<double> d) {
  if (z.empty() || z.size() != d.size()) {
    throw Error(ErrorKind::kInvalidParameter, "damage table needs matching, non-empty z and d");
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i]) || !std::isfinite(d[i])) throw Error(ErrorKind::kInvalidParameter, "damage table has non-finite entries");
    if (i > 0 && !(z[i] > z[i - 1])) throw Error(ErrorKind::kInvalidParameter, "damage table z must be strictly increasing");
  }
  DamageFunction f(TableDamage{z, d});
  f.monotone_ = std::is_sorted(d.begin(), d.end());
  f.constant_ = std::all_of(d.begin(), d.end(), [&](double v) { return v == d.front(); });
  double b = 0.0;
  for (double v : d) b = std::max(b, std::abs(v));
  f.bound_ = b;
  return f;
}

double DamageFunction::operator()(double z) const {
  if (const auto* ind = std::get_if<IndicatorDamage>(&form_)) return z > ind->u ? 1.0 : 0.0;
  if (const auto* pw = std::get_if<PowerDamage>(&form_)) {
    if (!(z > 0.0)) return 0.0;
    if (z >= pw->u) return 1.0;
    return std::pow(z / pw->u, pw->beta);
  }
  const auto& t = std::get<TableDamage>(form_);
  if (z <= t.z.front()) return t.d.front();
  if (z >= t.z.back()) return t.d.back();
  auto it = std::upper_bound(t.z.begin(), t.z.end(), z);
  std::size_t k = static_cast<std::size_t>(it - t.z.begin());
  double w = (z - t.z[k - 1]) / (t.z[k] - t.z[k - 1]);
  return (1.0 - w) * t.d[k - 1] + w * t.d[k];
}

ExposureField ExposureField::constant(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorKind::kInvalidParameter, "exposure must be non-negative");
  ExposureField e;
  e.c_ = c;
  return e;
}

ExposureField ExposureField::raster(GridSpec grid, std::vector<double> values) {
  if (values.size() != grid.cell_count()) throw Error(ErrorKind::kAlignment, "exposure raster size does not match grid");
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::kInvalidParameter, "exposure must be non-negative");
  }
  ExposureField e;
  e.c_ = 0.0;
  e.grid_ = std::move(grid);
  e.values_ = std::move(values);
  return e;
}

ExposureField ExposureField::raster_csv(const std::string& path, const GridSpec& grid) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read exposure raster " + path);
  std::vector<double> values(grid.cell_count(), 0.0);
  std::vector<char> seen(grid.cell_count(), 0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, y, v;
    if (!(ls >> x >> y >> v)) {
      if (lineno == 1) continue;  // header
      throw Error(ErrorKind::kSchema, path + ":" + std::to_string(lineno) + ": expected cell_x,cell_y,value");
    }
    auto idx = grid.locate({x, y});
    if (!idx) throw Error(ErrorKind::kAlignment, path + ":" + std::to_string(lineno) + ": cell outside the grid");
    if (seen[*idx]) throw Error(ErrorKind::kAlignment, path + ":" + std::to_string(lineno) + ": duplicate cell");
    seen[*idx] = 1;
    values[*idx] = v;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(ErrorKind::kAlignment, "exposure raster " + path + " does not cover every grid cell");
  }
  return raster(grid, std::move(values));
}

double CostModel::cost(double z, std::size_t i) const {
  const double e = exposure.at_cell(i);
  if (e == 0.0) return 0.0;
  const double y = gev ? gev_transform(z, *gev) : z;
  return e * damage(y);
}

void evaluate_cost(const CostModel& model, const GridSpec& grid, std::span<const double> z, std::span<double> out) {
  if (z.size() != grid.cell_count() || out.size() != z.size()) {
    throw Error(ErrorKind::kAlignment, "cost evaluation: sample size does not match grid");
  }
  if (model.exposure.grid() && !(*model.exposure.grid() == grid)) {
    throw Error(ErrorKind::kAlignment, "exposure raster grid differs from the simulation grid");
  }
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = model.cost(z[i], i);
}

std::vector<double> evaluate_cost(const CostModel& model, const FieldSample& z) {
  std::vector<double> out(z.values.size());
  evaluate_cost(model, z.grid, z.values, out);
  return out;
}

namespace {

// Frechet values where the composed damage has kinks or jumps.
std::vector<double> damage_breaks(const CostModel& m) {
  std::vector<double> y;
  if (const auto* ind = std::get_if<IndicatorDamage>(&m.damage.form())) y.push_back(ind->u);
  else if (const auto* pw = std::get_if<PowerDamage>(&m.damage.form())) y.push_back(pw->u);
  else y = std::get<TableDamage>(m.damage.form()).z;
  std::vector<double> z;
  for (double v : y) {
    double zz = m.gev ? gev_inverse(v, *m.gev) : v;
    if (zz > 0.0 && std::isfinite(zz)) z.push_back(zz);
  }
  return z;
}

// E[g(Z)] for standard Frechet Z via w = exp(-1/z): integral of g(-1/log w) over (0, 1).
template <class G>
double frechet_expectation(G g, const std::vector<double>& z_breaks) {
  std::vector<double> w = {0.0, 1.0};
  for (double z : z_breaks) w.push_back(std::exp(-1.0 / z));
  std::sort(w.begin(), w.end());
  w.erase(std::unique(w.begin(), w.end()), w.end());
  // tanh-sinh copes with the log-type behaviour of the integrand at w = 0 and w = 1.
  boost::math::quadrature::tanh_sinh<double> rule;
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < w.size(); ++s) {
    total += rule.integrate([&](double ww) { return ww <= 0.0 || ww >= 1.0 ? 0.0 : g(-1.0 / std::log(ww)); },
                            w[s], w[s + 1]);
  }
  return total;
}

}  // namespace

double expected_cost_quadrature(const CostModel& model) {
  if (!model.exposure.is_constant()) throw Error(ErrorKind::kInvalidParameter, "quadrature needs constant exposure");
  return frechet_expectation([&](double z) { return model.cost(z, 0); }, damage_breaks(model));
}

MomentEstimate marginal_moment(const CostModel& model, double p, std::size_t n_reps, std::uint64_t seed) {
  if (!(p > 0.0)) throw Error(ErrorKind::kInvalidParameter, "moment order p must be positive");
  MomentEstimate out;
  const double e = model.exposure.at_cell(0);
  double ebound = model.exposure.is_constant() ? e : 0.0;
  for (double v : model.exposure.values()) ebound = std::max(ebound, v);
  out.finite_by_bound = std::isfinite(model.damage.bound() * ebound);

  if (std::holds_alternative<IndicatorDamage>(model.damage.form())) {
    // D in {0, 1}: E|C|^p = e^p P(D1(Z) > u).
    const double u = std::get<IndicatorDamage>(model.damage.form()).u;
    const double zu = model.gev ? gev_inverse(u, *model.gev) : u;
    const double exceed = zu <= 0.0 ? 1.0 : (std::isinf(zu) ? 0.0 : -std::expm1(-1.0 / zu));
    out.value = std::pow(e, p) * exceed;
    out.analytic = true;
    return out;
  }
  if (n_reps < 2) throw Error(ErrorKind::kSampleSize, "marginal moment needs >= 2 draws");
  Rng rng = make_rng(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n_reps; ++i) {
    double w;
    do w = unif(rng);
    while (w <= 0.0);
    const double z = -1.0 / std::log(w);
    const double v = std::pow(std::abs(model.cost(z, 0)), p);
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(n_reps);
  out.value = sum / n;
  out.std_err = std::sqrt(std::max(0.0, (sum2 - n * out.value * out.value) / (n - 1.0)) / n);
  out.n = n_reps;
  return out;
}

}  // namespace spatialrisk
