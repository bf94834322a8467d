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

#include "spatialrisk/maxstable.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "spatialrisk/error.hpp"
#include "spatialrisk/gaussian.hpp"

namespace spatialrisk {
namespace {

void validate_eps(double eps) {
  if (!(eps > 0.0 && eps <= 0.01)) throw Error(ErrorKind::kInvalidParameter, "eps must be in (0, 0.01]");
}

// 5-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> kGlNodes = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                            0.9061798459386640};
constexpr std::array<double, 5> kGlWeights = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                              0.4786286704993665, 0.2369268850561891};

}  // namespace

void validate(const SmithModel& model) {
  const auto& s = model.sigma;
  if (!s.allFinite() || std::abs(s(0, 1) - s(1, 0)) > 1e-12 * (std::abs(s(0, 1)) + 1.0)) {
    throw Error(ErrorKind::kInvalidParameter, "Smith sigma must be symmetric");
  }
  if (!(s(0, 0) > 0.0) || !(s.determinant() > 0.0)) {
    throw Error(ErrorKind::kInvalidParameter, "Smith sigma must be positive definite");
  }
  validate_eps(model.eps);
  if (model.max_points == 0) throw Error(ErrorKind::kInvalidParameter, "max_points must be positive");
}

void validate(const BrownResnickModel& model) {
  validate_eps(model.eps);
  if (model.max_points == 0) throw Error(ErrorKind::kInvalidParameter, "max_points must be positive");
  if (model.pilot_draws < 10) throw Error(ErrorKind::kInvalidParameter, "pilot_draws must be >= 10");
}

std::string describe(const MaxStableModel& model) {
  std::ostringstream os;
  os.precision(17);
  if (const auto* s = std::get_if<SmithModel>(&model)) {
    os << "smith sigma=[[" << s->sigma(0, 0) << "," << s->sigma(0, 1) << "],[" << s->sigma(1, 0) << ","
       << s->sigma(1, 1) << "]] eps=" << s->eps;
  } else {
    const auto& b = std::get<BrownResnickModel>(model);
    os << "br ";
    if (const auto* p = std::get_if<PowerVariogram>(&b.variogram.form())) {
      os << "power m=" << p->m << " psi=" << p->psi;
    } else {
      os << "table(" << std::get<TabulatedVariogram>(b.variogram.form()).r.size() << ")";
    }
    os << " eps=" << b.eps << " pilot=" << b.pilot_draws;
  }
  return os.str();
}

double FieldSample::at(Point p) const {
  auto idx = grid.locate(p);
  if (!idx) throw Error(ErrorKind::kOutOfBounds, "point outside the sample grid");
  return values[*idx];
}

// ---------------------------------------------------------------------------
// Smith

SmithSimulator::SmithSimulator(const SmithModel& model, const GridSpec& grid) : model_(model), grid_(grid) {
  validate(model);
  Eigen::Matrix2d inv = model.sigma.inverse();
  qa_ = inv(0, 0);
  qb_ = 0.5 * (inv(0, 1) + inv(1, 0));
  qc_ = inv(1, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(inv);
  lambda_min_ = eig.eigenvalues().minCoeff();
  peak_ = 1.0 / (2.0 * kPi * std::sqrt(model.sigma.determinant()));
  level_ = 2.0 * std::log(1.0 / model.eps);
  ext_x_ = std::sqrt(level_ * model.sigma(0, 0));
  ext_y_ = std::sqrt(level_ * model.sigma(1, 1));
  const Box& b = grid.bbox();
  // Cell centres lie inside b shrunk by h/2, so this window holds every storm
  // centre whose truncated ellipse reaches a centre.
  double half = 0.5 * grid.h();
  window_ = Box{b.x0 + half - ext_x_, b.y0 + half - ext_y_, b.x1 - half + ext_x_, b.y1 - half + ext_y_};
}

std::size_t SmithSimulator::simulate(Rng& rng, std::span<double> out) const {
  const std::size_t nx = grid_.nx(), ny = grid_.ny();
  if (out.size() != nx * ny) throw Error(ErrorKind::kAlignment, "output span does not match grid");
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t T = tile_;
  const std::size_t ntx = (nx + T - 1) / T, nty = (ny + T - 1) / T;
  std::vector<double> tile_min(ntx * nty, 0.0);
  double global_min = 0.0;

  const double h = grid_.h();
  const double gx0 = grid_.bbox().x0 + 0.5 * h, gy0 = grid_.bbox().y0 + 0.5 * h;
  const double area = window_.area();
  // Truncated storms carry mass 1 - eps; scaling U by 1/(1 - eps) restores
  // exact unit-Frechet margins.
  const double mass = 1.0 - model_.eps;
  const bool diagonal = qb_ == 0.0;

  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> ux(window_.x0, window_.x1), uy(window_.y0, window_.y1);
  std::vector<double> fx, fy;

  double gamma = 0.0;
  std::size_t count = 0;
  for (;;) {
    gamma += expo(rng);
    const double top = area / (gamma * mass) * peak_;
    if (top < global_min) break;
    if (++count > model_.max_points) {
      throw Error(ErrorKind::kTruncationBudget, "Smith simulation exceeded " + std::to_string(model_.max_points) +
                                                    " storms before stopping");
    }
    const double cx = ux(rng), cy = uy(rng);

    // Cells whose centres fall inside the storm's bounding box.
    auto lo_index = [](double v, std::size_t n) -> std::ptrdiff_t {
      double f = std::ceil(v);
      if (f < 0) return 0;
      return static_cast<std::ptrdiff_t>(std::min<double>(f, static_cast<double>(n)));
    };
    auto hi_index = [](double v, std::size_t n) -> std::ptrdiff_t {
      double f = std::floor(v);
      if (f < 0) return -1;
      return static_cast<std::ptrdiff_t>(std::min<double>(f, static_cast<double>(n) - 1));
    };
    const std::ptrdiff_t ix0 = lo_index((cx - ext_x_ - gx0) / h, nx), ix1 = hi_index((cx + ext_x_ - gx0) / h, nx);
    const std::ptrdiff_t iy0 = lo_index((cy - ext_y_ - gy0) / h, ny), iy1 = hi_index((cy + ext_y_ - gy0) / h, ny);
    if (ix0 > ix1 || iy0 > iy1) continue;

    if (diagonal) {
      fx.resize(static_cast<std::size_t>(ix1 - ix0 + 1));
      fy.resize(static_cast<std::size_t>(iy1 - iy0 + 1));
      for (std::ptrdiff_t i = ix0; i <= ix1; ++i) {
        double dx = gx0 + static_cast<double>(i) * h - cx;
        fx[static_cast<std::size_t>(i - ix0)] = qa_ * dx * dx;
      }
      for (std::ptrdiff_t j = iy0; j <= iy1; ++j) {
        double dy = gy0 + static_cast<double>(j) * h - cy;
        fy[static_cast<std::size_t>(j - iy0)] = qc_ * dy * dy;
      }
    }

    bool touched = false;
    for (std::size_t ty = static_cast<std::size_t>(iy0) / T; ty <= static_cast<std::size_t>(iy1) / T; ++ty) {
      for (std::size_t tx = static_cast<std::size_t>(ix0) / T; tx <= static_cast<std::size_t>(ix1) / T; ++tx) {
        double& tmin = tile_min[ty * ntx + tx];
        // Lower bound of the quadratic form over the tile's centre box.
        double bx0 = gx0 + static_cast<double>(tx * T) * h, by0 = gy0 + static_cast<double>(ty * T) * h;
        double bx1 = gx0 + static_cast<double>(std::min(nx, (tx + 1) * T) - 1) * h;
        double by1 = gy0 + static_cast<double>(std::min(ny, (ty + 1) * T) - 1) * h;
        double ddx = std::max({bx0 - cx, 0.0, cx - bx1}), ddy = std::max({by0 - cy, 0.0, cy - by1});
        double qlb = lambda_min_ * (ddx * ddx + ddy * ddy);
        if (qlb >= level_) continue;
        if (top * std::exp(-0.5 * qlb) <= tmin) continue;

        std::size_t jx0 = std::max<std::size_t>(tx * T, static_cast<std::size_t>(ix0));
        std::size_t jx1 = std::min<std::size_t>((tx + 1) * T - 1, static_cast<std::size_t>(ix1));
        std::size_t jy0 = std::max<std::size_t>(ty * T, static_cast<std::size_t>(iy0));
        std::size_t jy1 = std::min<std::size_t>((ty + 1) * T - 1, static_cast<std::size_t>(iy1));
        bool changed = false;
        for (std::size_t j = jy0; j <= jy1; ++j) {
          double* row = out.data() + j * nx;
          if (diagonal) {
            const double qy = fy[j - static_cast<std::size_t>(iy0)];
            for (std::size_t i = jx0; i <= jx1; ++i) {
              double q = fx[i - static_cast<std::size_t>(ix0)] + qy;
              if (q >= level_) continue;
              double v = top * std::exp(-0.5 * q);
              if (v > row[i]) {
                row[i] = v;
                changed = true;
              }
            }
          } else {
            const double dy = gy0 + static_cast<double>(j) * h - cy;
            for (std::size_t i = jx0; i <= jx1; ++i) {
              double dx = gx0 + static_cast<double>(i) * h - cx;
              double q = qa_ * dx * dx + 2.0 * qb_ * dx * dy + qc_ * dy * dy;
              if (q >= level_) continue;
              double v = top * std::exp(-0.5 * q);
              if (v > row[i]) {
                row[i] = v;
                changed = true;
              }
            }
          }
        }
        if (changed) {
          double m = std::numeric_limits<double>::infinity();
          std::size_t cy0 = ty * T, cy1 = std::min(ny, (ty + 1) * T);
          std::size_t cx0 = tx * T, cx1 = std::min(nx, (tx + 1) * T);
          for (std::size_t j = cy0; j < cy1; ++j) {
            const double* row = out.data() + j * nx;
            for (std::size_t i = cx0; i < cx1; ++i) m = std::min(m, row[i]);
          }
          tmin = m;
          touched = true;
        }
      }
    }
    if (touched) global_min = *std::min_element(tile_min.begin(), tile_min.end());
  }
  return count;
}

// ---------------------------------------------------------------------------
// Brown-Resnick

namespace {

std::vector<Point> cell_centres(const GridSpec& grid) {
  std::vector<Point> sites(grid.cell_count());
  for (std::size_t i = 0; i < sites.size(); ++i) sites[i] = grid.cell_center(i);
  return sites;
}

Point central_cell(const GridSpec& grid) {
  const Box& b = grid.bbox();
  Point c{0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1)};
  std::size_t ix = std::min(grid.nx() - 1, static_cast<std::size_t>((c.x - b.x0) / grid.h()));
  std::size_t iy = std::min(grid.ny() - 1, static_cast<std::size_t>((c.y - b.y0) / grid.h()));
  return grid.cell_center(grid.index(ix, iy));
}

}  // namespace

BrownResnickSimulator::BrownResnickSimulator(const BrownResnickModel& model, const GridSpec& grid, Rng& pilot_rng)
    : model_(model), grid_(grid), driver_(build_driver(model.variogram, cell_centres(grid), central_cell(grid))) {
  validate(model);
  const std::size_t n = grid.cell_count();
  half_variance_.resize(n);
  for (std::size_t i = 0; i < n; ++i) half_variance_[i] = 0.5 * driver_.variance(i);

  std::vector<double> sups(model.pilot_draws);
  std::vector<double> sum(n, 0.0), sum2(n, 0.0), w(n);
  for (std::size_t k = 0; k < model.pilot_draws; ++k) {
    driver_.sample(pilot_rng, w);
    double sup = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double y = std::exp(w[i] - half_variance_[i]);
      sup = std::max(sup, y);
      sum[i] += y;
      sum2[i] += y * y;
    }
    sups[k] = sup;
  }
  std::sort(sups.begin(), sups.end());
  // Order statistic ceil((1 - eps) m) of the pilot sups.
  const double m = static_cast<double>(model.pilot_draws);
  auto k = static_cast<std::size_t>(std::ceil((1.0 - model.eps) * m - 1e-9));
  k = std::clamp<std::size_t>(k, 1, model.pilot_draws);
  sup_quantile_ = sups[k - 1];

  pilot_mean_.resize(n);
  pilot_stderr_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = sum[i] / m;
    double var = std::max(0.0, (sum2[i] - m * mean * mean) / (m - 1.0));
    pilot_mean_[i] = mean;
    pilot_stderr_[i] = std::sqrt(var / m);
  }
}

std::size_t BrownResnickSimulator::simulate(Rng& rng, std::span<double> out) const {
  const std::size_t n = grid_.cell_count();
  if (out.size() != n) throw Error(ErrorKind::kAlignment, "output span does not match grid");
  std::fill(out.begin(), out.end(), 0.0);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(n);
  double gamma = 0.0, zmin = 0.0;
  std::size_t count = 0;
  for (;;) {
    gamma += expo(rng);
    const double u = 1.0 / gamma;
    if (u * sup_quantile_ < zmin) break;
    if (++count > model_.max_points) {
      throw Error(ErrorKind::kTruncationBudget, "Brown-Resnick simulation exceeded " +
                                                    std::to_string(model_.max_points) + " points before stopping");
    }
    driver_.sample(rng, w);
    const double logu = std::log(u);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double v = std::exp(logu + w[i] - half_variance_[i]);
      if (v > out[i]) out[i] = v;
      m = std::min(m, out[i]);
    }
    zmin = m;
  }
  return count;
}

// ---------------------------------------------------------------------------

namespace {

std::variant<SmithSimulator, BrownResnickSimulator> make_impl(const MaxStableModel& model, const GridSpec& grid,
                                                              std::uint64_t pilot_seed) {
  if (const auto* s = std::get_if<SmithModel>(&model)) return SmithSimulator(*s, grid);
  Rng pilot(pilot_seed);
  return BrownResnickSimulator(std::get<BrownResnickModel>(model), grid, pilot);
}

}  // namespace

FieldSimulator::FieldSimulator(const MaxStableModel& model, const GridSpec& grid, std::uint64_t pilot_seed)
    : model_(model), impl_(make_impl(model, grid, pilot_seed)) {}

const GridSpec& FieldSimulator::grid() const {
  return std::visit([](const auto& s) -> const GridSpec& { return s.grid(); }, impl_);
}

std::size_t FieldSimulator::simulate(Rng& rng, std::span<double> out) const {
  return std::visit([&](const auto& s) { return s.simulate(rng, out); }, impl_);
}

FieldSample simulate_smith(const SmithModel& model, const GridSpec& grid, Rng& rng) {
  SmithSimulator sim(model, grid);
  FieldSample s{grid, std::vector<double>(grid.cell_count()), describe(MaxStableModel{model}), 0, 0};
  s.points = sim.simulate(rng, s.values);
  return s;
}

FieldSample simulate_brown_resnick(const BrownResnickModel& model, const GridSpec& grid, Rng& rng) {
  BrownResnickSimulator sim(model, grid, rng);
  FieldSample s{grid, std::vector<double>(grid.cell_count()), describe(MaxStableModel{model}), 0, 0};
  s.points = sim.simulate(rng, s.values);
  return s;
}

// ---------------------------------------------------------------------------
// Extremal coefficient

ExtremalCoefficient extremal_coefficient_empirical(std::span<const double> z1, std::span<const double> z2, double u) {
  if (z1.size() != z2.size()) throw Error(ErrorKind::kInvalidParameter, "paired samples differ in length");
  if (!(u > 0.0)) throw Error(ErrorKind::kInvalidParameter, "level u must be positive");
  const std::size_t n = z1.size();
  if (n < kMinExtremalSamples) {
    throw Error(ErrorKind::kSampleSize, "extremal coefficient needs >= " + std::to_string(kMinExtremalSamples) +
                                            " samples, got " + std::to_string(n));
  }
  std::size_t below = 0;
  for (std::size_t i = 0; i < n; ++i) below += (z1[i] <= u && z2[i] <= u);
  if (below == 0 || below == n) {
    throw Error(ErrorKind::kLevelUnusable, "joint non-exceedance fraction is 0 or 1 at u = " + std::to_string(u));
  }
  const double p = static_cast<double>(below) / static_cast<double>(n);
  ExtremalCoefficient out;
  out.theta = -u * std::log(p);
  out.std_err = u * std::sqrt((1.0 - p) / (p * static_cast<double>(n)));
  out.u = u;
  out.n = n;
  out.level_in_range = p > 0.05 && p < 0.95;
  return out;
}

ExtremalCoefficient extremal_coefficient_empirical(std::span<const FieldSample> samples, Point x1, Point x2,
                                                   double u) {
  std::vector<double> z1(samples.size()), z2(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    z1[i] = samples[i].at(x1);
    z2[i] = samples[i].at(x2);
  }
  ExtremalCoefficient out = extremal_coefficient_empirical(z1, z2, u);
  out.x1 = x1;
  out.x2 = x2;
  return out;
}

double smith_theta_quadrature(const Eigen::Matrix2d& sigma, Point h, int panels) {
  if (panels < 1) throw Error(ErrorKind::kInvalidParameter, "panels must be positive");
  SmithModel check{sigma, 1e-4, 1};
  validate(check);
  const Eigen::Matrix2d inv = sigma.inverse();
  const double norm = 1.0 / (2.0 * kPi * std::sqrt(sigma.determinant()));
  auto f = [&](double x, double y) { return norm * std::exp(-0.5 * (inv(0, 0) * x * x + 2.0 * inv(0, 1) * x * y + inv(1, 1) * y * y)); };
  // min(f(s), f(s - h)) is concentrated around h/2; a box of 9 standard
  // deviations around it holds all but ~1e-17 of either density.
  const double reach = 9.0;
  const double mx = 0.5 * h.x, my = 0.5 * h.y;
  const double wx = reach * std::sqrt(sigma(0, 0)) + 0.5 * std::abs(h.x);
  const double wy = reach * std::sqrt(sigma(1, 1)) + 0.5 * std::abs(h.y);
  const double dx = 2.0 * wx / panels, dy = 2.0 * wy / panels;
  double total = 0.0;
  for (int pj = 0; pj < panels; ++pj) {
    const double ycen = my - wy + (pj + 0.5) * dy;
    for (int pi = 0; pi < panels; ++pi) {
      const double xcen = mx - wx + (pi + 0.5) * dx;
      double acc = 0.0;
      for (std::size_t b = 0; b < kGlNodes.size(); ++b) {
        const double y = ycen + 0.5 * dy * kGlNodes[b];
        double row = 0.0;
        for (std::size_t a = 0; a < kGlNodes.size(); ++a) {
          const double x = xcen + 0.5 * dx * kGlNodes[a];
          row += kGlWeights[a] * std::min(f(x, y), f(x - h.x, y - h.y));
        }
        acc += kGlWeights[b] * row;
      }
      total += acc * 0.25 * dx * dy;
    }
  }
  return std::clamp(2.0 - total, 1.0, 2.0);
}

double mixing_bound(double theta) {
  if (!(theta >= 1.0 && theta <= 2.0)) {
    throw Error(ErrorKind::kInvalidCoefficient, "extremal coefficient " + std::to_string(theta) + " outside [1, 2]");
  }
  return 2.0 * (2.0 - theta);
}

double mixing_bound(const ExtremalCoefficient& theta) { return mixing_bound(theta.theta); }

// ---------------------------------------------------------------------------
// Integrability of [2 - theta]^(1/q)

IntegrabilityReport check_theta_integrability(const ThetaFunction& theta, double q, std::span<const double> radii,
                                              double theta_noise) {
  if (!(q > 0.0)) throw Error(ErrorKind::kInvalidParameter, "exponent q must be positive");
  if (radii.empty()) throw Error(ErrorKind::kInvalidParameter, "radius ladder is empty");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > (k == 0 ? 0.0 : radii[k - 1]))) {
      throw Error(ErrorKind::kInvalidParameter, "radius ladder must be positive and increasing");
    }
  }
  IntegrabilityReport rep;
  rep.q = q;
  rep.radii.assign(radii.begin(), radii.end());
  auto g = [&](double r, double phi) {
    double t = theta({r * std::cos(phi), r * std::sin(phi)});
    return std::pow(std::max(0.0, 2.0 - t), 1.0 / q);
  };
  // theta(0, x) = theta(0, -x): integrate angles over [0, pi) and double.
  const int n_angle = 16;
  double running = 0.0, inner = 0.0;
  for (double outer : radii) {
    const int panels = std::max(4, static_cast<int>(std::ceil((outer - inner) / 0.5)));
    const double dr = (outer - inner) / panels;
    double ring = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double rc = inner + (p + 0.5) * dr;
      for (std::size_t a = 0; a < kGlNodes.size(); ++a) {
        const double r = rc + 0.5 * dr * kGlNodes[a];
        double ang = 0.0;
        for (int k = 0; k < n_angle; ++k) ang += g(r, kPi * (k + 0.5) / n_angle);
        ang *= 2.0 * kPi / n_angle;
        ring += kGlWeights[a] * 0.5 * dr * r * ang;
      }
    }
    running += ring;
    rep.partial.push_back(running);
    rep.increments.push_back(ring);
    inner = outer;
  }
  bool monotone = true;
  for (std::size_t k = 0; k < rep.increments.size(); ++k) {
    // Noise allowance: integrand error bounded by noise^(1/q) over the annulus.
    double annulus = kPi * (rep.radii[k] * rep.radii[k] - (k ? rep.radii[k - 1] * rep.radii[k - 1] : 0.0));
    double allowance = theta_noise > 0.0 ? 3.0 * std::pow(theta_noise, 1.0 / q) * annulus : 1e-12;
    if (rep.increments[k] < -allowance) monotone = false;
  }
  for (std::size_t k = 1; k < rep.increments.size(); ++k) {
    rep.ratios.push_back(rep.increments[k - 1] > 0.0 ? rep.increments[k] / rep.increments[k - 1] : 0.0);
  }
  if (!monotone) {
    rep.inconclusive = true;
    rep.note = "partial integrals are not monotone beyond noise";
  } else if (rep.partial.back() == 0.0) {
    rep.consistent_with_finite = true;
    rep.note = "integrand vanishes on the ladder";
  } else if (!rep.ratios.empty() && rep.ratios.back() < 0.5) {
    rep.consistent_with_finite = true;
    rep.note = "tail increments shrink geometrically";
  } else {
    rep.note = "tail increments do not shrink geometrically on this ladder";
  }
  return rep;
}

IntegrabilityReport check_theta_integrability(const SmithModel& model, double q, std::span<const double> radii) {
  validate(model);
  Eigen::Matrix2d sigma = model.sigma;
  return check_theta_integrability([sigma](Point x) { return smith_theta_quadrature(sigma, x, 32); }, q, radii);
}

std::pair<ThetaFunction, double> empirical_theta_brown_resnick(const BrownResnickModel& model, double r_max,
                                                               double dr, std::size_t n_reps, std::uint64_t seed) {
  if (!(r_max > 0.0 && dr > 0.0)) throw Error(ErrorKind::kInvalidParameter, "transect needs r_max, dr > 0");
  const auto cells = static_cast<std::size_t>(std::ceil(r_max / dr)) + 1;
  GridSpec grid(Box{-0.5 * dr, -0.5 * dr, (static_cast<double>(cells) - 0.5) * dr, 0.5 * dr}, dr);
  FieldSimulator sim(MaxStableModel{model}, grid, derive_seed(seed, kPilotStream));
  std::vector<std::vector<double>> columns(cells, std::vector<double>(n_reps));
  std::vector<double> z(grid.cell_count());
  for (std::size_t r = 0; r < n_reps; ++r) {
    Rng rng = make_rng(seed, r);
    sim.simulate(rng, z);
    for (std::size_t c = 0; c < cells; ++c) columns[c][r] = z[c];
  }
  std::vector<double> lags(cells), theta(cells);
  double worst = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    lags[c] = static_cast<double>(c) * dr;
    if (c == 0) {
      theta[c] = 1.0;
      continue;
    }
    ExtremalCoefficient e = extremal_coefficient_empirical(columns[0], columns[c], 1.0);
    theta[c] = std::clamp(e.theta, 1.0, 2.0);
    worst = std::max(worst, e.std_err);
  }
  ThetaFunction fn = [lags, theta](Point x) {
    double r = std::hypot(x.x, x.y);
    if (r >= lags.back()) return theta.back();
    auto it = std::upper_bound(lags.begin(), lags.end(), r);
    std::size_t k = static_cast<std::size_t>(it - lags.begin());
    double w = (r - lags[k - 1]) / (lags[k] - lags[k - 1]);
    return (1.0 - w) * theta[k - 1] + w * theta[k];
  };
  return {fn, worst};
}

IntegrabilityReport check_theta_integrability(const BrownResnickModel& model, double q,
                                              std::span<const double> radii, std::size_t n_reps,
                                              std::uint64_t seed) {
  if (radii.empty()) throw Error(ErrorKind::kInvalidParameter, "radius ladder is empty");
  auto [fn, noise] = empirical_theta_brown_resnick(model, radii.back(), 0.5, n_reps, seed);
  IntegrabilityReport rep = check_theta_integrability(fn, q, radii, noise);
  if (!rep.note.empty()) rep.note += "; ";
  rep.note += "theta estimated by simulation";
  return rep;
}

void write_field_csv(const FieldSample& sample, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path);
  os.precision(17);
  os << "cell_x,cell_y,value\n";
  for (std::size_t i = 0; i < sample.values.size(); ++i) {
    Point c = sample.grid.cell_center(i);
    os << c.x << ',' << c.y << ',' << sample.values[i] << '\n';
  }
}

}  // namespace spatialrisk
