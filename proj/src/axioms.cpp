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

#include "spatialrisk/axioms.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "spatialrisk/error.hpp"
#include "spatialrisk/gaussian.hpp"
#include "spatialrisk/parallel.hpp"

namespace spatialrisk {

// ---------------------------------------------------------------------------
// Covariance accumulation

struct CovarianceAccumulator::Fft {
  int mx = 0, my = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan forward = nullptr, backward = nullptr;

  Fft(int mx_, int my_) : mx(mx_), my(my_) {
    const std::size_t nr = static_cast<std::size_t>(mx) * static_cast<std::size_t>(my);
    const std::size_t nc = static_cast<std::size_t>(my) * static_cast<std::size_t>(mx / 2 + 1);
    real = fftw_alloc_real(nr);
    spec = fftw_alloc_complex(nc);
    forward = fftw_plan_dft_r2c_2d(my, mx, real, spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(my, mx, spec, real, FFTW_ESTIMATE);
  }
  ~Fft() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spec);
  }
};

namespace {
// FFTW's planner is not thread-safe; accumulators are normally built on one
// thread but this keeps concurrent construction correct as well.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

CovarianceAccumulator::CovarianceAccumulator(const GridSpec& grid) : grid_(grid) {
  const double rmax = max_radius();
  const std::size_t amax = static_cast<std::size_t>(std::floor(rmax / grid.h() + 1e-9));
  n_bins_ = amax + 1;
  lx_max_ = static_cast<long>(std::min<std::size_t>(amax, grid.nx() - 1));
  ly_max_ = static_cast<long>(std::min<std::size_t>(amax, grid.ny() - 1));
  const std::size_t wx = static_cast<std::size_t>(2 * lx_max_ + 1), wy = static_cast<std::size_t>(2 * ly_max_ + 1);
  bin_of_.assign(wx * wy, n_bins_);
  bin_lags_.assign(n_bins_, 0);
  for (long ly = -ly_max_; ly <= ly_max_; ++ly) {
    for (long lx = -lx_max_; lx <= lx_max_; ++lx) {
      auto b = static_cast<std::size_t>(std::lround(std::hypot(static_cast<double>(lx), static_cast<double>(ly))));
      if (b >= n_bins_) continue;
      bin_of_[static_cast<std::size_t>(ly + ly_max_) * wx + static_cast<std::size_t>(lx + lx_max_)] = b;
      ++bin_lags_[b];
    }
  }
  s1_.assign(wx * wy, 0.0);
  s2_.assign(wx * wy, 0.0);
  s12_.assign(wx * wy, 0.0);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fft_ = std::make_unique<Fft>(static_cast<int>(grid.nx()) + static_cast<int>(lx_max_),
                               static_cast<int>(grid.ny()) + static_cast<int>(ly_max_));
}

CovarianceAccumulator::~CovarianceAccumulator() {
  if (fft_) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fft_.reset();
  }
}

double CovarianceAccumulator::max_radius() const {
  return 0.5 * std::min(grid_.bbox().width(), grid_.bbox().height());
}

void CovarianceAccumulator::add(std::span<const double> field) {
  const std::size_t nx = grid_.nx(), ny = grid_.ny();
  if (field.size() != nx * ny) throw Error(ErrorKind::kAlignment, "covariance field does not match grid");
  Fft& f = *fft_;
  const std::size_t mx = static_cast<std::size_t>(f.mx), my = static_cast<std::size_t>(f.my);
  std::fill(f.real, f.real + mx * my, 0.0);
  double mean = 0.0;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      f.real[j * mx + i] = field[j * nx + i];
      mean += field[j * nx + i];
    }
  }
  mean /= static_cast<double>(nx * ny);
  fftw_execute(f.forward);
  const std::size_t nc = my * (mx / 2 + 1);
  for (std::size_t k = 0; k < nc; ++k) {
    const double re = f.spec[k][0], im = f.spec[k][1];
    f.spec[k][0] = re * re + im * im;
    f.spec[k][1] = 0.0;
  }
  fftw_execute(f.backward);
  const double norm = 1.0 / static_cast<double>(mx * my);

  const std::size_t wx = static_cast<std::size_t>(2 * lx_max_ + 1);
  std::vector<double> ann(n_bins_, 0.0);
  for (long ly = -ly_max_; ly <= ly_max_; ++ly) {
    const std::size_t ry = static_cast<std::size_t>((ly + static_cast<long>(my)) % static_cast<long>(my));
    const double py = static_cast<double>(ny - static_cast<std::size_t>(std::labs(ly)));
    for (long lx = -lx_max_; lx <= lx_max_; ++lx) {
      const std::size_t rx = static_cast<std::size_t>((lx + static_cast<long>(mx)) % static_cast<long>(mx));
      const double pairs = py * static_cast<double>(nx - static_cast<std::size_t>(std::labs(lx)));
      const double m2 = f.real[ry * mx + rx] * norm / pairs;
      const std::size_t w = static_cast<std::size_t>(ly + ly_max_) * wx + static_cast<std::size_t>(lx + lx_max_);
      s1_[w] += m2;
      s2_[w] += m2 * m2;
      s12_[w] += m2 * mean;
      if (bin_of_[w] < n_bins_) ann[bin_of_[w]] += m2;
    }
  }
  mu_.push_back(mean);
  ann_.push_back(std::move(ann));
}

void CovarianceAccumulator::merge(const CovarianceAccumulator& other) {
  if (!(other.grid_ == grid_)) throw Error(ErrorKind::kAlignment, "cannot merge accumulators on different grids");
  for (std::size_t w = 0; w < s1_.size(); ++w) {
    s1_[w] += other.s1_[w];
    s2_[w] += other.s2_[w];
    s12_[w] += other.s12_[w];
  }
  mu_.insert(mu_.end(), other.mu_.begin(), other.mu_.end());
  ann_.insert(ann_.end(), other.ann_.begin(), other.ann_.end());
}

void CovarianceAccumulator::clear() {
  std::fill(s1_.begin(), s1_.end(), 0.0);
  std::fill(s2_.begin(), s2_.end(), 0.0);
  std::fill(s12_.begin(), s12_.end(), 0.0);
  mu_.clear();
  ann_.clear();
}

std::pair<double, double> CovarianceAccumulator::k_at(long lx, long ly) const {
  if (std::labs(lx) > lx_max_ || std::labs(ly) > ly_max_) throw Error(ErrorKind::kEdgeEffect, "lag outside the accumulated window");
  const std::size_t n = mu_.size();
  if (n < 2) throw Error(ErrorKind::kSampleSize, "covariance needs >= 2 replications");
  const double nd = static_cast<double>(n);
  double mu = 0.0, mu2 = 0.0;
  for (double m : mu_) {
    mu += m;
    mu2 += m * m;
  }
  mu /= nd;
  const std::size_t w = static_cast<std::size_t>(ly + ly_max_) * static_cast<std::size_t>(2 * lx_max_ + 1) +
                        static_cast<std::size_t>(lx + lx_max_);
  const double xbar = s1_[w] / nd;
  const double vx = (s2_[w] - nd * xbar * xbar) / (nd - 1.0);
  const double cxm = (s12_[w] - nd * xbar * mu) / (nd - 1.0);
  const double vm = (mu2 - nd * mu * mu) / (nd - 1.0);
  // Influence of replication r on k: m2_r - 2 mu mean_r.
  const double var = std::max(0.0, vx - 4.0 * mu * cxm + 4.0 * mu * mu * vm);
  return {xbar - mu * mu, std::sqrt(var / nd)};
}

SigmaEstimate CovarianceAccumulator::finish(std::optional<double> R) const {
  const std::size_t n = mu_.size();
  if (n < 2) throw Error(ErrorKind::kSampleSize, "sigma estimation needs >= 2 replications");
  const double rmax = max_radius(), h = grid_.h(), h2 = h * h;
  if (R) {
    if (!(*R >= 0.0)) throw Error(ErrorKind::kInvalidParameter, "truncation radius must be non-negative");
    if (*R > rmax * (1.0 + 1e-9)) {
      throw Error(ErrorKind::kEdgeEffect, "truncation radius " + format_double(*R) + " exceeds half the grid extent " +
                                              format_double(rmax));
    }
  }
  const double nd = static_cast<double>(n);
  double mu = 0.0;
  for (double m : mu_) mu += m;
  mu /= nd;

  // g[r][b]: replication r's contribution to the annulus-b sum of k.
  std::vector<double> bin_mean(n_bins_, 0.0), bin_se(n_bins_, 0.0);
  for (std::size_t b = 0; b < n_bins_; ++b) {
    const double c = static_cast<double>(bin_lags_[b]);
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double g = ann_[r][b] - c * (2.0 * mu * mu_[r] - mu * mu);
      s += g;
      s2 += g * g;
    }
    const double m = s / nd;
    const double v = std::max(0.0, (s2 - nd * m * m) / (nd - 1.0));
    bin_mean[b] = m / c;
    bin_se[b] = std::sqrt(v / nd) / c;
  }

  SigmaEstimate out;
  out.h = h;
  out.n_reps = n;
  out.mean = mu;
  double partial = 0.0;
  for (std::size_t b = 0; b < n_bins_; ++b) {
    partial += h2 * bin_mean[b] * static_cast<double>(bin_lags_[b]);
    out.curve.push_back({static_cast<double>(b) * h, bin_mean[b], bin_se[b], bin_lags_[b], partial});
  }
  out.k0 = bin_mean[0];

  std::size_t last = n_bins_ - 1;
  if (R) {
    last = std::min(n_bins_ - 1, static_cast<std::size_t>(std::floor(*R / h + 1e-9)));
    out.R = *R;
  } else {
    bool found = false;
    for (std::size_t b = 1; b + 2 < n_bins_; ++b) {
      bool quiet = true;
      for (std::size_t j = b; j < b + 3; ++j) quiet = quiet && std::abs(bin_mean[j]) < 2.0 * bin_se[j];
      if (quiet) {
        last = b;
        found = true;
        break;
      }
    }
    out.R = static_cast<double>(last) * h;
    out.R_from_rule = true;
    if (!found) out.note = "covariance never fell to noise level; truncated at half the grid extent";
  }
  out.sigma2 = out.curve[last].partial;
  out.tail = h2 * bin_mean[last] * static_cast<double>(bin_lags_[last]);
  double s = 0.0, s2 = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double g = 0.0;
    for (std::size_t b = 0; b <= last; ++b) {
      g += ann_[r][b] - static_cast<double>(bin_lags_[b]) * (2.0 * mu * mu_[r] - mu * mu);
    }
    g *= h2;
    s += g;
    s2 += g * g;
  }
  const double m = s / nd;
  out.std_err = std::sqrt(std::max(0.0, (s2 - nd * m * m) / (nd - 1.0)) / nd);
  bool monotone = true;
  for (std::size_t b = 1; b <= last; ++b) monotone = monotone && out.curve[b].partial >= out.curve[b - 1].partial;
  if (!monotone) {
    if (!out.note.empty()) out.note += "; ";
    out.note += "partial integrals not monotone in R";
  }
  return out;
}

SigmaEstimate estimate_sigma(const CostModel& model, const GridSpec& grid, const SigmaOptions& options) {
  if (options.n_reps < 2) throw Error(ErrorKind::kSampleSize, "sigma estimation needs >= 2 replications");
  const std::uint64_t master = derive_seed(options.seed, kSigmaStream);
  check_seed_collisions(master, options.n_reps);
  CostSampler sampler(model, grid, master);
  const unsigned threads = resolve_threads(options.threads);
  constexpr std::size_t kBlock = 8;
  const std::size_t n_blocks = (options.n_reps + kBlock - 1) / kBlock;

  CovarianceAccumulator total(grid);
  if (options.R && *options.R > total.max_radius() * (1.0 + 1e-9)) {
    throw Error(ErrorKind::kEdgeEffect, "truncation radius " + format_double(*options.R) +
                                            " exceeds half the grid extent " + format_double(total.max_radius()));
  }
  std::vector<std::unique_ptr<CovarianceAccumulator>> acc;
  for (unsigned t = 0; t < threads; ++t) acc.push_back(std::make_unique<CovarianceAccumulator>(grid));
  std::vector<std::vector<double>> zbuf(threads, std::vector<double>(grid.cell_count()));
  std::vector<std::vector<double>> cbuf(threads, std::vector<double>(grid.cell_count()));

  for (std::size_t wave = 0; wave < n_blocks; wave += threads) {
    const std::size_t in_wave = std::min<std::size_t>(threads, n_blocks - wave);
    parallel_for(in_wave, threads, [&](std::size_t j, unsigned) {
      auto& a = *acc[j];
      a.clear();
      const std::size_t b = wave + j;
      for (std::size_t rep = b * kBlock; rep < std::min(options.n_reps, (b + 1) * kBlock); ++rep) {
        sampler.sample(rep, zbuf[j], cbuf[j]);
        a.add(cbuf[j]);
      }
    });
    for (std::size_t j = 0; j < in_wave; ++j) total.merge(*acc[j]);
  }
  return total.finish(options.R);
}

// ---------------------------------------------------------------------------
// Checks

CheckReport check_translation(const RiskEstimate& a, const RiskEstimate& shifted, bool stationary, double level) {
  CheckReport r;
  r.check = "translation " + a.kind.label() + " " + a.region_id + " vs " + shifted.region_id;
  const double z = normal_critical(level);
  r.statistic = shifted.estimate - a.estimate;
  const double pooled = std::sqrt(a.std_err * a.std_err + shifted.std_err * shifted.std_err);
  r.ci_low = r.statistic - z * pooled;
  r.ci_high = r.statistic + z * pooled;
  std::ostringstream os;
  os.precision(6);
  os << a.region_id << " " << a.estimate << " +- " << a.std_err << ", " << shifted.region_id << " "
     << shifted.estimate << " +- " << shifted.std_err;
  if (!stationary) {
    r.status = CheckStatus::kPreconditionViolated;
    os << "; stationarity precondition violated, no assertion";
  } else {
    const double gap = std::abs(r.statistic);
    const bool overlap = gap <= z * (a.std_err + shifted.std_err);
    r.status = overlap ? CheckStatus::kPass : CheckStatus::kFail;
    os << "; " << (overlap ? "" : "no ") << "overlap of " << level * 100 << "% intervals";
  }
  r.details = os.str();
  return r;
}

CheckReport check_subadditivity(const RegionUnion& a1, const RegionUnion& a2, const RiskEstimate& r1,
                                const RiskEstimate& r2, const RiskEstimate& r_union, double level) {
  for (const auto& p : a1.parts()) {
    for (const auto& q : a2.parts()) {
      if (!disjoint(p, q)) throw Error(ErrorKind::kDisjointness, "sub-additivity regions overlap");
    }
  }
  if (r1.draws.size() != r2.draws.size() || r1.draws.size() != r_union.draws.size() || r1.draws.empty()) {
    throw Error(ErrorKind::kAlignment, "sub-additivity needs paired bootstrap draws for all three estimates");
  }
  CheckReport r;
  r.check = "subadditivity " + r_union.kind.label() + " " + r_union.region_id;
  r.statistic = r_union.estimate - std::min(r1.estimate, r2.estimate);
  std::vector<double> diff(r1.draws.size());
  for (std::size_t b = 0; b < diff.size(); ++b) diff[b] = r_union.draws[b] - std::min(r1.draws[b], r2.draws[b]);
  const double se = bootstrap_stderr(diff), z = normal_critical(level);
  r.ci_low = r.statistic - z * se;
  r.ci_high = r.statistic + z * se;
  r.status = r.ci_low <= 0.0 ? CheckStatus::kPass : CheckStatus::kFail;
  std::ostringstream os;
  os.precision(6);
  os << "R(union) - min R = " << r.statistic << " [" << r.ci_low << ", " << r.ci_high << "]"
     << " (R1 " << r1.estimate << ", R2 " << r2.estimate << ", union " << r_union.estimate << ")";
  r.details = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Homogeneity fit

namespace {

struct Curve {
  std::vector<double> lam, y, w;
};

double sse(const Curve& c, double k1, double k2, double g) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.lam.size(); ++i) {
    const double r = c.y[i] - k1 - k2 * std::pow(c.lam[i], -g);
    s += c.w[i] * r * r;
  }
  return s;
}

// Weighted linear least squares of y on (1, lambda^-g).
std::pair<double, double> linear_k(const Curve& c, double g) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < c.lam.size(); ++i) {
    const double x = std::pow(c.lam[i], -g);
    sw += c.w[i];
    sx += c.w[i] * x;
    sy += c.w[i] * c.y[i];
    sxx += c.w[i] * x * x;
    sxy += c.w[i] * x * c.y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(std::abs(det) > 1e-300)) return {sy / sw, 0.0};
  return {(sxx * sy - sx * sxy) / det, (sw * sxy - sx * sy) / det};
}

// K2 for fixed K1 and g.
double k2_given(const Curve& c, double k1, double g) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < c.lam.size(); ++i) {
    const double x = std::pow(c.lam[i], -g);
    num += c.w[i] * x * (c.y[i] - k1);
    den += c.w[i] * x * x;
  }
  return den > 0 ? num / den : 0.0;
}

constexpr double kGammaMin = 1e-3;
constexpr double kGammaMax = 10.0;

template <class F>
double minimize_1d(F f, double lo, double hi) {
  auto res = boost::math::tools::brent_find_minima(f, lo, hi, std::numeric_limits<double>::digits / 2 + 8);
  return res.first;
}

struct Params {
  double k1, k2, g;
};

// Damped Gauss-Newton on all three parameters.
Params polish(const Curve& c, Params p) {
  double cur = sse(c, p.k1, p.k2, p.g), mu = 1e-3;
  for (int it = 0; it < 200 && cur > 0.0; ++it) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < c.lam.size(); ++i) {
      const double x = std::pow(c.lam[i], -p.g);
      const double r = c.y[i] - p.k1 - p.k2 * x;
      Eigen::Vector3d j(1.0, x, -p.k2 * x * std::log(c.lam[i]));
      jtj += c.w[i] * j * j.transpose();
      jtr += c.w[i] * j * r;
    }
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix3d a = jtj;
      for (int d = 0; d < 3; ++d) a(d, d) += mu * std::max(jtj(d, d), 1e-300);
      Eigen::Vector3d step = a.ldlt().solve(jtr);
      if (!step.allFinite()) break;
      Params q{p.k1 + step(0), p.k2 + step(1), std::clamp(p.g + step(2), kGammaMin, kGammaMax)};
      const double s = sse(c, q.k1, q.k2, q.g);
      if (s < cur) {
        const double rel = (cur - s) / cur;
        p = q;
        cur = s;
        mu = std::max(mu * 0.1, 1e-12);
        improved = true;
        if (rel < 1e-15) return p;
        break;
      }
      mu *= 10.0;
    }
    if (!improved) break;
  }
  return p;
}

Params fit_curve(const Curve& c) {
  const std::size_t n = c.lam.size();
  // Anchor K1 at the largest-lambda value, then log-linear regression.
  double k1 = c.y[n - 1], g = 1.0, k2 = 0.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, sign = 0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = c.y[i] - k1;
      if (d == 0.0) continue;
      const double lx = std::log(c.lam[i]), ly = std::log(std::abs(d));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      sign += d;
      ++m;
    }
    if (m >= 2 && m * sxx - sx * sx > 0) {
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      const double icpt = (sy - slope * sx) / m;
      g = std::clamp(-slope, kGammaMin, kGammaMax);
      k2 = (sign >= 0 ? 1.0 : -1.0) * std::exp(icpt);
    }
  }
  // Coordinate refinement: gamma (with K2) for fixed K1, then K1 and K2 for
  // fixed gamma.
  for (int round = 0; round < 5; ++round) {
    g = minimize_1d([&](double gg) { return sse(c, k1, k2_given(c, k1, gg), gg); }, kGammaMin, kGammaMax);
    std::tie(k1, k2) = linear_k(c, g);
  }
  // Safeguard against a poor local basin: scan the profile in gamma.
  auto profile = [&](double gg) {
    auto [a, b] = linear_k(c, gg);
    return sse(c, a, b, gg);
  };
  double best_g = g, best = profile(g);
  const int scan = 120;
  for (int i = 0; i <= scan; ++i) {
    const double gg = kGammaMin * std::pow(kGammaMax / kGammaMin, static_cast<double>(i) / scan);
    const double s = profile(gg);
    if (s < best) {
      best = s;
      best_g = gg;
    }
  }
  if (best_g != g) {
    const double lo = std::max(kGammaMin, best_g / 1.1), hi = std::min(kGammaMax, best_g * 1.1);
    g = minimize_1d(profile, lo, hi);
    std::tie(k1, k2) = linear_k(c, g);
  }
  return polish(c, {k1, k2, g});
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

HomogeneityFit fit_homogeneity(std::span<const double> lambdas, std::span<const double> values,
                               std::span<const double> std_errs, const std::vector<std::vector<double>>& draws,
                               const RiskMeasureKind& kind, const FitOptions& options) {
  const std::size_t n = lambdas.size();
  if (values.size() != n || (!std_errs.empty() && std_errs.size() != n)) {
    throw Error(ErrorKind::kInvalidParameter, "fit inputs differ in length");
  }
  if (n < 3) throw Error(ErrorKind::kInvalidParameter, "homogeneity fit needs >= 3 ladder points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lambdas[i] > 0.0) || (i > 0 && !(lambdas[i] > lambdas[i - 1]))) {
      throw Error(ErrorKind::kInvalidParameter, "lambda ladder must be positive and increasing");
    }
  }
  if (options.require_ladder && (n < 4 || lambdas[n - 1] / lambdas[0] < 8.0 * (1 - 1e-12))) {
    throw Error(ErrorKind::kInvalidParameter, "homogeneity fit needs >= 4 ladder points spanning a factor >= 8");
  }
  Curve c;
  c.lam.assign(lambdas.begin(), lambdas.end());
  c.y.assign(values.begin(), values.end());
  c.w.assign(n, 1.0);
  const bool weighted = !std_errs.empty() && std::all_of(std_errs.begin(), std_errs.end(), [](double s) { return s > 0.0; });
  if (weighted) {
    double mean_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      c.w[i] = 1.0 / (std_errs[i] * std_errs[i]);
      mean_w += c.w[i] / static_cast<double>(n);
    }
    for (double& w : c.w) w /= mean_w;
  }
  Params p = fit_curve(c);
  HomogeneityFit fit;
  fit.kind = kind;
  fit.K1 = p.k1;
  fit.K2 = p.k2;
  fit.gamma = p.g;
  fit.lambdas = c.lam;
  fit.values = c.y;
  double rn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = c.y[i] - p.k1 - p.k2 * std::pow(c.lam[i], -p.g);
    rn += r * r;
  }
  fit.residual_norm = std::sqrt(rn);

  std::ostringstream note;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d0 = std::abs(c.y[i] - p.k1), d1 = std::abs(c.y[i + 1] - p.k1);
    const double noise = std_errs.empty() ? 1e-12 * (std::abs(d0) + std::abs(p.k1)) + 1e-300
                                          : 2.0 * std::hypot(std_errs[i], std_errs[i + 1]);
    if (d1 > d0 + noise) {
      fit.unstable = true;
      note << "|R - K1| increases between lambda " << c.lam[i] << " and " << c.lam[i + 1] << "; ";
    }
  }
  if (p.g <= kGammaMin * 1.0001 || p.g >= kGammaMax * 0.9999) {
    fit.unstable = true;
    note << "gamma at search bound; ";
  }
  if (p.k2 == 0.0) {
    fit.unstable = true;
    note << "K2 vanishes, order undetermined; ";
  }

  if (!draws.empty()) {
    if (draws.size() != n) throw Error(ErrorKind::kInvalidParameter, "need bootstrap draws for every ladder point");
    const std::size_t nb = draws[0].size();
    std::vector<double> k1s, k2s, gs;
    for (std::size_t b = 0; b < nb; ++b) {
      Curve cb = c;
      for (std::size_t i = 0; i < n; ++i) {
        if (draws[i].size() != nb) throw Error(ErrorKind::kInvalidParameter, "bootstrap draws differ in count");
        cb.y[i] = draws[i][b];
      }
      Params q = fit_curve(cb);
      if (!std::isfinite(q.k1) || !std::isfinite(q.k2) || !std::isfinite(q.g)) {
        ++fit.failed_refits;
        continue;
      }
      k1s.push_back(q.k1);
      k2s.push_back(q.k2);
      gs.push_back(q.g);
    }
    if (k1s.size() >= 2) {
      const double lo = 0.5 * (1.0 - options.ci_level), hi = 1.0 - lo;
      fit.K1_se = std::sqrt(sample_variance(k1s));
      fit.K2_se = std::sqrt(sample_variance(k2s));
      fit.gamma_se = std::sqrt(sample_variance(gs));
      fit.K1_ci = {percentile(k1s, lo), percentile(k1s, hi)};
      fit.K2_ci = {percentile(k2s, lo), percentile(k2s, hi)};
      fit.gamma_ci = {percentile(gs, lo), percentile(gs, hi)};
    }
  }
  fit.note = note.str();
  if (fit.note.size() >= 2) fit.note.resize(fit.note.size() - 2);
  return fit;
}

HomogeneityFit fit_homogeneity(std::span<const RiskEstimate> estimates, const FitOptions& options) {
  if (estimates.empty()) throw Error(ErrorKind::kInvalidParameter, "no estimates to fit");
  std::vector<const RiskEstimate*> sorted;
  for (const auto& e : estimates) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->lambda < b->lambda; });
  std::vector<double> lam, val, se;
  std::vector<std::vector<double>> draws;
  bool have_draws = true;
  for (auto* e : sorted) {
    if (!(e->kind == sorted[0]->kind)) throw Error(ErrorKind::kInvalidParameter, "estimates mix risk kinds");
    lam.push_back(e->lambda);
    val.push_back(e->estimate);
    se.push_back(e->std_err);
    have_draws = have_draws && !e->draws.empty();
    draws.push_back(e->draws);
  }
  if (!have_draws) draws.clear();
  HomogeneityFit fit = fit_homogeneity(lam, val, se, draws, sorted[0]->kind, options);
  return fit;
}

TheoreticalConstants theoretical_constants(const RiskMeasureKind& kind, double sigma_c, double mu, double nu) {
  if (!(nu > 0.0)) throw Error(ErrorKind::kInvalidParameter, "region area must be positive");
  switch (kind.type) {
    case RiskMeasureKind::Type::kVariance:
      return {0.0, sigma_c * sigma_c / nu, 2.0};
    case RiskMeasureKind::Type::kVar:
      if (std::abs(kind.alpha - 0.5) < 1e-12) {
        throw Error(ErrorKind::kExcludedLevel, "var at level 1/2 has a vanishing second-order constant");
      }
      return {mu, sigma_c * normal_quantile(kind.alpha) / std::sqrt(nu), 1.0};
    case RiskMeasureKind::Type::kEs: {
      const double q = normal_quantile(kind.alpha);
      return {mu, sigma_c * normal_pdf(q) / (std::sqrt(nu) * (1.0 - kind.alpha)), 1.0};
    }
    case RiskMeasureKind::Type::kExpectation:
      break;
  }
  throw Error(ErrorKind::kInvalidParameter, "no second-order constants for the expectation kind");
}

ConstantsComparison compare_constants(const HomogeneityFit& fit, const SigmaEstimate& sigma, double mu, double nu,
                                      const RiskMeasureKind& kind) {
  ConstantsComparison out;
  out.kind = kind;
  out.fit = fit;
  std::ostringstream os;
  os.precision(6);
  if (!(sigma.sigma2 > 0.0)) {
    out.theory = theoretical_constants(kind, 0.0, mu, nu);
    out.status = CheckStatus::kInconclusive;
    os << "sigma_C estimate not positive";
    out.details = os.str();
    return out;
  }
  out.theory = theoretical_constants(kind, sigma.sigma(), mu, nu);
  out.K1_dev = fit.K1 - out.theory.K1;
  out.K2_rel = out.theory.K2 != 0.0 ? (fit.K2 - out.theory.K2) / out.theory.K2 : 0.0;
  out.gamma_dev = fit.gamma - out.theory.gamma;
  os << "fit (K1, K2, gamma) = (" << fit.K1 << ", " << fit.K2 << ", " << fit.gamma << "), theory ("
     << out.theory.K1 << ", " << out.theory.K2 << ", " << out.theory.gamma << "); K2 rel dev " << out.K2_rel;
  const bool sigma_zero_in_ci = sigma.sigma2 - 2.0 * sigma.std_err <= 0.0;
  const bool k2_zero_in_ci = fit.K2_ci[0] <= 0.0 && fit.K2_ci[1] >= 0.0 && (fit.K2_se > 0.0);
  if (sigma_zero_in_ci || k2_zero_in_ci) {
    out.status = CheckStatus::kInconclusive;
    os << "; " << (sigma_zero_in_ci ? "sigma_C" : "K2") << " interval contains 0";
  } else if (fit.unstable) {
    out.status = CheckStatus::kInconclusive;
    os << "; fit unstable (" << fit.note << ")";
  } else if (fit.K1_se > 0.0) {
    const bool ok = std::abs(out.K1_dev) <= 3.0 * fit.K1_se + 1e-12 &&
                    std::abs(fit.K2 - out.theory.K2) <= 3.0 * fit.K2_se + 1e-12 &&
                    std::abs(out.gamma_dev) <= 3.0 * fit.gamma_se + 1e-12;
    out.status = ok ? CheckStatus::kPass : CheckStatus::kFail;
    os << "; within 3 stderr: " << (ok ? "yes" : "no");
  } else {
    out.status = CheckStatus::kInconclusive;
    os << "; no bootstrap stderr for the fit";
  }
  out.details = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// CLT report

SampleMoments sample_moments(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  if (x.empty()) throw Error(ErrorKind::kSampleSize, "empty sample");
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m, d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  SampleMoments s{m, x.size() > 1 ? m2 * n / (n - 1.0) : 0.0, 0.0, 0.0};
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

CltReport clt_report(const LossTable& table, const std::string& region_id, double mu, const SigmaEstimate& sigma,
                     double nu, const Bootstrap* boot) {
  if (!(nu > 0.0)) throw Error(ErrorKind::kInvalidParameter, "region area must be positive");
  CltReport rep;
  rep.region_id = region_id;
  rep.mu = mu;
  rep.target_variance = sigma.sigma2 / nu;
  const std::size_t r = table.region_index(region_id);
  for (std::size_t l = 0; l < table.lambdas().size(); ++l) {
    const double lam = table.lambdas()[l];
    auto col = table.column(r, l);
    std::vector<double> y(col.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = lam * (col[i] - mu);
    CltRow row;
    row.lambda = lam;
    row.n = y.size();
    SampleMoments m = sample_moments(y);
    row.mean = m.mean;
    row.variance = m.variance;
    row.skewness = m.skewness;
    row.kurtosis = m.kurtosis;
    row.degenerate = !(m.variance > 0.0);
    row.variance_ratio = rep.target_variance > 0.0 ? m.variance / rep.target_variance : 0.0;
    const double n = static_cast<double>(y.size());
    row.mean_se = std::sqrt(m.variance / n);
    if (boot && boot->n() == y.size() && !row.degenerate) {
      std::vector<double> dv, ds, dk;
      boot->draws_of(y, [&](std::span<const double> s) {
        SampleMoments bm = sample_moments(s);
        dv.push_back(bm.variance);
        ds.push_back(bm.skewness);
        dk.push_back(bm.kurtosis);
        return 0.0;
      });
      row.variance_se = bootstrap_stderr(dv);
      row.skewness_se = bootstrap_stderr(ds);
      row.kurtosis_se = bootstrap_stderr(dk);
    } else if (n > 5) {
      // Normal-theory standard errors.
      row.variance_se = m.variance * std::sqrt(2.0 / (n - 1.0));
      row.skewness_se = std::sqrt(6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0)));
      row.kurtosis_se = 2.0 * row.skewness_se * std::sqrt((n * n - 1.0) / ((n - 3.0) * (n + 5.0)));
    }
    rep.rows.push_back(row);
  }
  if (std::any_of(rep.rows.begin(), rep.rows.end(), [](const CltRow& w) { return w.degenerate; })) {
    rep.note = "zero variance of rescaled losses";
  }
  return rep;
}

std::vector<VariogramConditionRow> variogram_conditions(const VariogramSpec& v, std::span<const double> radii) {
  std::vector<VariogramConditionRow> out;
  const int m = 21;
  for (double r : radii) {
    if (!(r > 0.0)) throw Error(ErrorKind::kInvalidParameter, "lag radii must be positive");
    const double g = v(r);
    double sup = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) {
        const double x = r + static_cast<double>(i) / (m - 1), y = static_cast<double>(j) / (m - 1);
        sup = std::max(sup, g - v(std::hypot(x, y)));
      }
    }
    VariogramConditionRow row;
    row.r = r;
    row.sup_ratio = g > 0.0 ? sup / g : std::numeric_limits<double>::infinity();
    row.growth = r > 1.0 ? g / std::log(r) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(row);
  }
  return out;
}

}  // namespace spatialrisk
