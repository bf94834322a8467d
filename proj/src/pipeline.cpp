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

#include "spatialrisk/pipeline.hpp"

#include <fftw3.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include "json.hpp"
#include <set>
#include <sstream>

#include "spatialrisk/error.hpp"
#include "spatialrisk/gaussian.hpp"

namespace spatialrisk {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::kConfig, "field '" + field + "': " + msg);
}

const Json* find(const Json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

double number(const Json& j, const std::string& field) {
  if (!j.is_number()) config_error(field, "expected a number");
  return j.get<double>();
}

double number(const Json& obj, const std::string& key, const std::string& field, std::optional<double> fallback = {}) {
  const Json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    config_error(field + "." + key, "missing");
  }
  return number(*v, field + "." + key);
}

std::uint64_t whole(const Json& obj, const std::string& key, const std::string& field, std::uint64_t fallback) {
  const Json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
    config_error(field + "." + key, "expected a non-negative integer");
  }
  return v->get<std::uint64_t>();
}

std::string text(const Json& obj, const std::string& key, const std::string& field) {
  const Json* v = find(obj, key);
  if (!v || !v->is_string()) config_error(field + "." + key, "expected a string");
  return v->get<std::string>();
}

std::vector<double> numbers(const Json& j, const std::string& field) {
  if (!j.is_array()) config_error(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

const Json& object(const Json& obj, const std::string& key, const std::string& field) {
  const Json* v = find(obj, key);
  if (!v || !v->is_object()) config_error(field.empty() ? key : field + "." + key, "expected an object");
  return *v;
}

// Rethrows library validation errors as config errors naming the field.
template <class F>
auto guarded(const std::string& field, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig || e.kind() == ErrorKind::kExcludedLevel) throw;
    std::string msg = e.what();
    throw Error(ErrorKind::kConfig, "field '" + field + "': " + msg);
  }
}

VariogramSpec parse_variogram(const Json& j, const std::string& field) {
  const std::string form = text(j, "form", field);
  return guarded(field, [&] {
    if (form == "power") return VariogramSpec::power(number(j, "m", field), number(j, "psi", field));
    if (form == "table") {
      const Json* r = find(j, "r");
      const Json* g = find(j, "gamma");
      if (!r || !g) config_error(field, "table variogram needs r and gamma");
      return VariogramSpec::table(numbers(*r, field + ".r"), numbers(*g, field + ".gamma"));
    }
    config_error(field + ".form", "expected 'power' or 'table'");
  });
}

MaxStableModel parse_model(const Json& j) {
  const std::string field = "model";
  const std::string variant = text(j, "variant", field);
  if (variant == "smith") {
    SmithModel m;
    const Json* s = find(j, "sigma");
    if (!s) config_error("model.sigma", "missing");
    {
      if (s->is_string() && s->get<std::string>() == "I") {
        m.sigma = Eigen::Matrix2d::Identity();
      } else {
        if (!s->is_array() || s->size() != 2) config_error("model.sigma", "expected [[a, b], [b, c]] or \"I\"");
        for (int r = 0; r < 2; ++r) {
          auto row = numbers((*s)[static_cast<std::size_t>(r)], "model.sigma[" + std::to_string(r) + "]");
          if (row.size() != 2) config_error("model.sigma", "rows must have two entries");
          m.sigma(r, 0) = row[0];
          m.sigma(r, 1) = row[1];
        }
      }
    }
    m.eps = number(j, "eps", field, m.eps);
    m.max_points = whole(j, "max_points", field, m.max_points);
    guarded(field, [&] { validate(m); });
    return m;
  }
  if (variant == "br") {
    BrownResnickModel m;
    const Json* v = find(j, "variogram");
    if (!v) config_error("model.variogram", "missing");
    m.variogram = parse_variogram(*v, "model.variogram");
    m.eps = number(j, "eps", field, m.eps);
    m.max_points = whole(j, "max_points", field, m.max_points);
    m.pilot_draws = whole(j, "pilot_draws", field, m.pilot_draws);
    guarded(field, [&] { validate(m); });
    return m;
  }
  config_error("model.variant", "expected 'smith' or 'br'");
}

DamageFunction parse_damage(const Json& j) {
  const std::string field = "cost.damage";
  const std::string kind = text(j, "kind", field);
  return guarded(field, [&] {
    if (kind == "indicator") return DamageFunction::indicator(number(j, "u", field));
    if (kind == "power") return DamageFunction::power(number(j, "u", field), number(j, "beta", field));
    if (kind == "table") {
      const Json* z = find(j, "z");
      const Json* d = find(j, "d");
      if (!z || !d) config_error(field, "table damage needs z and d");
      return DamageFunction::table(numbers(*z, field + ".z"), numbers(*d, field + ".d"));
    }
    config_error(field + ".kind", "expected 'indicator', 'power' or 'table'");
  });
}

Region parse_shape(const Json& j, const std::string& field) {
  return guarded(field, [&] {
    if (const Json* k = find(j, "kind")) {
      if (!k->is_string()) config_error(field + ".kind", "expected a string");
      const std::string kind = k->get<std::string>();
      if (kind == "rect")
        return Region::rect(number(j, "x0", field), number(j, "y0", field), number(j, "x1", field),
                            number(j, "y1", field));
      if (kind == "disc") return Region::disc({number(j, "cx", field), number(j, "cy", field)}, number(j, "r", field));
      if (kind == "poly") {
        const Json* p = find(j, "vertices");
        if (!p || !p->is_array()) config_error(field + ".vertices", "expected [[x, y], ...]");
        std::vector<Point> pts;
        for (std::size_t i = 0; i < p->size(); ++i) {
          auto v = numbers((*p)[i], field + ".vertices[" + std::to_string(i) + "]");
          if (v.size() != 2) config_error(field + ".vertices[" + std::to_string(i) + "]", "expected [x, y]");
          pts.push_back({v[0], v[1]});
        }
        return Region::polygon(pts);
      }
      config_error(field + ".kind", "expected 'rect', 'disc' or 'poly'");
    }
    if (const Json* r = find(j, "rect")) {
      auto v = numbers(*r, field + ".rect");
      if (v.size() != 4) config_error(field + ".rect", "expected [x0, y0, x1, y1]");
      return Region::rect(v[0], v[1], v[2], v[3]);
    }
    if (const Json* d = find(j, "disc")) {
      auto v = numbers(*d, field + ".disc");
      if (v.size() != 3) config_error(field + ".disc", "expected [cx, cy, r]");
      return Region::disc({v[0], v[1]}, v[2]);
    }
    if (const Json* p = find(j, "polygon")) {
      if (!p->is_array()) config_error(field + ".polygon", "expected [[x, y], ...]");
      std::vector<Point> pts;
      for (std::size_t i = 0; i < p->size(); ++i) {
        auto v = numbers((*p)[i], field + ".polygon[" + std::to_string(i) + "]");
        if (v.size() != 2) config_error(field + ".polygon[" + std::to_string(i) + "]", "expected [x, y]");
        pts.push_back({v[0], v[1]});
      }
      return Region::polygon(pts);
    }
    config_error(field, "expected one of rect, disc, polygon, union, translate");
  });
}

std::map<std::string, RegionUnion> parse_regions(const Json& j, std::vector<std::string>& order) {
  if (!j.is_object() || j.empty()) config_error("regions", "expected a non-empty object");
  std::map<std::string, RegionUnion> out;
  std::set<std::string> active;
  std::function<const RegionUnion&(const std::string&, const std::string&)> resolve =
      [&](const std::string& id, const std::string& from) -> const RegionUnion& {
    auto it = out.find(id);
    if (it != out.end()) return it->second;
    if (!j.contains(id)) config_error(from, "unknown region '" + id + "'");
    if (active.count(id)) config_error("regions." + id, "cyclic region definition");
    active.insert(id);
    const std::string field = "regions." + id;
    const Json& spec = j.at(id);
    if (!spec.is_object()) config_error(field, "expected an object");
    RegionUnion value = [&]() -> RegionUnion {
      if (const Json* u = find(spec, "union")) {
        if (!u->is_array() || u->empty()) config_error(field + ".union", "expected an array of region names");
        std::vector<Region> parts;
        for (std::size_t i = 0; i < u->size(); ++i) {
          if (!(*u)[i].is_string()) config_error(field + ".union[" + std::to_string(i) + "]", "expected a region name");
          const RegionUnion& sub = resolve((*u)[i].get<std::string>(), field + ".union[" + std::to_string(i) + "]");
          parts.insert(parts.end(), sub.parts().begin(), sub.parts().end());
        }
        return guarded(field, [&] { return RegionUnion(parts); });
      }
      if (const Json* t = find(spec, "translate")) {
        if (!t->is_string()) config_error(field + ".translate", "expected a region name");
        const Json* by = find(spec, "by");
        if (!by) config_error(field + ".by", "missing");
        auto v = numbers(*by, field + ".by");
        if (v.size() != 2) config_error(field + ".by", "expected [vx, vy]");
        return resolve(t->get<std::string>(), field + ".translate").translated({v[0], v[1]});
      }
      return RegionUnion(parse_shape(spec, field));
    }();
    active.erase(id);
    return out.emplace(id, std::move(value)).first->second;
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    resolve(it.key(), "regions");
    order.push_back(it.key());
  }
  return out;
}

RiskMeasureKind parse_kind(const Json& j, const std::string& field) {
  if (!j.is_string()) config_error(field, "expected a risk kind string");
  RiskMeasureKind k = guarded(field, [&] { return RiskMeasureKind::parse(j.get<std::string>()); });
  if (k.type == RiskMeasureKind::Type::kVar && std::abs(k.alpha - 0.5) < 1e-12) {
    throw Error(ErrorKind::kExcludedLevel, "field '" + field + "': var at level 0.5 is excluded (its second-order constant vanishes)");
  }
  return k;
}

std::vector<RiskMeasureKind> parse_kinds(const Json& j, const std::string& field) {
  if (!j.is_array()) config_error(field, "expected an array of risk kinds");
  std::vector<RiskMeasureKind> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_kind(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

std::string region_ref(const Json& obj, const std::string& key, const std::string& field,
                       const std::map<std::string, RegionUnion>& regions) {
  const std::string id = text(obj, key, field);
  if (!regions.count(id)) config_error(field + "." + key, "unknown region '" + id + "'");
  return id;
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

GridSpec default_grid(const Json* g, const std::vector<NamedRegion>& regions, const std::vector<double>& lambdas) {
  Box bb{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& r : regions) {
    for (double l : lambdas) {
      Box b = scaled_region(r.region, l).bounds();
      bb = Box{std::min(bb.x0, b.x0), std::min(bb.y0, b.y0), std::max(bb.x1, b.x1), std::max(bb.y1, b.y1)};
      for (const auto& p : scaled_region(r.region, l).parts()) {
        Box pb = p.bounds();
        smallest = std::min(smallest, std::min(pb.width(), pb.height()));
      }
    }
  }
  double h = smallest / 20.0;
  if (g) {
    h = number(*g, "h", "plan.grid", h);
    bb.x0 = number(*g, "x0", "plan.grid", bb.x0);
    bb.y0 = number(*g, "y0", "plan.grid", bb.y0);
    bb.x1 = number(*g, "x1", "plan.grid", bb.x1);
    bb.y1 = number(*g, "y1", "plan.grid", bb.y1);
  }
  if (!(h > 0.0)) config_error("plan.grid.h", "must be positive");
  return guarded("plan.grid", [&] { return GridSpec(bb, h); });
}

}  // namespace

const RegionUnion& RunConfig::region(const std::string& id) const {
  auto it = regions.find(id);
  if (it == regions.end()) throw Error(ErrorKind::kConfig, "unknown region '" + id + "'");
  return it->second;
}

bool RunConfig::needs_sigma() const {
  return std::any_of(checks.begin(), checks.end(),
                     [](const CheckSpec& c) { return c.type == "homogeneity" || c.type == "clt"; });
}

RunConfig parse_config(const std::string& source, const std::string& name) {
  Json j;
  try {
    j = Json::parse(source, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    std::string what = e.what();
    throw Error(ErrorKind::kConfig, name + ": " + line_col(source, e.byte == 0 ? 0 : e.byte - 1) + ": " + what);
  }
  if (!j.is_object()) throw Error(ErrorKind::kConfig, name + ": top level must be an object");
  static const std::set<std::string> known = {"model", "cost", "plan", "regions", "risk", "bootstrap", "sigma", "checks", "output"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) config_error(it.key(), "unknown top-level field");
  }

  RunConfig cfg;
  cfg.source = source;
  cfg.path = name;
  cfg.cost.field = parse_model(object(j, "model", ""));
  if (const Json* c = find(j, "cost")) {
    if (const Json* g = find(*c, "gev")) {
      GevParams p{number(*g, "eta", "cost.gev", 0.0), number(*g, "tau", "cost.gev", 1.0), number(*g, "xi", "cost.gev", 0.0)};
      if (!(p.tau > 0.0)) config_error("cost.gev.tau", "must be positive");
      cfg.cost.gev = p;
    }
    if (const Json* d = find(*c, "damage")) cfg.cost.damage = parse_damage(*d);
  }

  std::vector<std::string> order;
  cfg.regions = parse_regions(object(j, "regions", ""), order);

  const Json& plan = object(j, "plan", "");
  cfg.plan.seed = whole(plan, "seed", "plan", 1);
  cfg.plan.n_reps = whole(plan, "n_reps", "plan", 10000);
  if (const Json* l = find(plan, "lambdas")) cfg.plan.lambdas = numbers(*l, "plan.lambdas");
  cfg.plan.threads = static_cast<unsigned>(whole(plan, "threads", "plan", 0));
  if (const Json* b = find(plan, "boundary")) {
    if (*b == "exact") cfg.plan.raster.mode = BoundaryMode::kExact;
    else if (*b == "subsample") cfg.plan.raster.mode = BoundaryMode::kSubsample;
    else config_error("plan.boundary", "expected 'exact' or 'subsample'");
  }
  cfg.plan.regions.clear();
  for (const auto& id : order) cfg.plan.regions.push_back({id, cfg.regions.at(id)});
  guarded("plan", [&] { cfg.plan.validate(); });
  cfg.plan.grid = default_grid(find(plan, "grid"), cfg.plan.regions, cfg.plan.lambdas);

  // Exposure needs the grid for rasters.
  if (const Json* c = find(j, "cost")) {
    if (const Json* e = find(*c, "exposure")) {
      const std::string kind = text(*e, "kind", "cost.exposure");
      if (kind == "const") {
        cfg.cost.exposure = guarded("cost.exposure", [&] { return ExposureField::constant(number(*e, "c", "cost.exposure")); });
      } else if (kind == "raster") {
        fs::path p = text(*e, "path", "cost.exposure");
        if (p.is_relative() && name != "<config>") p = fs::path(name).parent_path() / p;
        cfg.cost.exposure = ExposureField::raster_csv(p.string(), cfg.plan.grid);
      } else {
        config_error("cost.exposure.kind", "expected 'const' or 'raster'");
      }
    }
  }

  if (const Json* r = find(j, "risk")) cfg.kinds = parse_kinds(*r, "risk");
  else cfg.kinds = {RiskMeasureKind::expectation(), RiskMeasureKind::variance(), RiskMeasureKind::var(0.95), RiskMeasureKind::es(0.95)};
  cfg.bootstrap = whole(j, "bootstrap", "", kDefaultBootstrap);
  if (cfg.bootstrap < 2) config_error("bootstrap", "need at least 2 resamples");
  if (const Json* s = find(j, "sigma")) {
    SigmaConfig sc;
    sc.n_reps = whole(*s, "n_reps", "sigma", sc.n_reps);
    if (const Json* R = find(*s, "R")) sc.R = number(*R, "sigma.R");
    cfg.sigma = sc;
  }
  if (const Json* o = find(j, "output")) {
    if (!o->is_string()) config_error("output", "expected a directory path");
    cfg.output = o->get<std::string>();
  }

  if (const Json* cs = find(j, "checks")) {
    if (!cs->is_array()) config_error("checks", "expected an array");
    for (std::size_t i = 0; i < cs->size(); ++i) {
      const std::string field = "checks[" + std::to_string(i) + "]";
      const Json& c = (*cs)[i];
      if (!c.is_object()) config_error(field, "expected an object");
      CheckSpec s;
      s.field = field;
      s.type = text(c, "type", field);
      s.level = number(c, "level", field, 0.99);
      if (const Json* k = find(c, "kinds")) s.kinds = parse_kinds(*k, field + ".kinds");
      else if (const Json* k1 = find(c, "kind")) s.kinds = {parse_kind(*k1, field + ".kind")};
      else s.kinds = cfg.kinds;
      if (const Json* l = find(c, "lambdas")) s.lambdas = numbers(*l, field + ".lambdas");
      else s.lambdas = cfg.plan.lambdas;
      for (double l : s.lambdas) {
        if (std::find(cfg.plan.lambdas.begin(), cfg.plan.lambdas.end(), l) == cfg.plan.lambdas.end()) {
          config_error(field + ".lambdas", "lambda " + format_double(l) + " is not in plan.lambdas");
        }
      }
      if (s.type == "translation") {
        s.region = region_ref(c, "region", field, cfg.regions);
        s.shifted = region_ref(c, "shifted", field, cfg.regions);
      } else if (s.type == "subadditivity" || s.type == "premium") {
        s.a1 = region_ref(c, "a1", field, cfg.regions);
        s.a2 = region_ref(c, "a2", field, cfg.regions);
        s.union_id = region_ref(c, "union", field, cfg.regions);
        if (s.type == "premium") {
          if (const Json* p = find(c, "premium")) s.premium = number(*p, field + ".premium");
          s.premium_offset = number(c, "premium_offset", field, 0.0);
          for (const auto& k : s.kinds) {
            if (!k.has_level()) config_error(field + ".kind", "premium adequacy needs var or es");
          }
        }
      } else if (s.type == "homogeneity" || s.type == "clt") {
        s.region = region_ref(c, "region", field, cfg.regions);
        if (s.type == "homogeneity") {
          for (const auto& k : s.kinds) {
            if (k.type == RiskMeasureKind::Type::kExpectation) config_error(field + ".kinds", "expectation has no decay order");
          }
        }
      } else if (s.type == "integrability") {
        s.q = number(c, "q", field, 1.0);
        if (!(s.q > 0.0)) config_error(field + ".q", "must be positive");
        if (const Json* r = find(c, "radii")) s.radii = numbers(*r, field + ".radii");
        else s.radii = {1, 2, 4, 8, 16};
        s.n_reps = whole(c, "n_reps", field, 10000);
      } else if (s.type == "variogram") {
        if (const Json* r = find(c, "radii")) s.radii = numbers(*r, field + ".radii");
        else s.radii = {2, 4, 8, 16, 32, 64};
      } else {
        config_error(field + ".type", "unknown check type '" + s.type + "'");
      }
      cfg.checks.push_back(std::move(s));
    }
  }
  if (cfg.needs_sigma() && !cfg.sigma) cfg.sigma = SigmaConfig{};
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.plan.seed = *o.seed;
  if (o.n_reps) {
    if (*o.n_reps < 1) throw Error(ErrorKind::kConfig, "--n-reps must be >= 1");
    cfg.plan.n_reps = *o.n_reps;
  }
  if (o.output) cfg.output = *o.output;
  if (o.threads) cfg.plan.threads = *o.threads;
}

namespace {

std::string path_in(const RunConfig& cfg, const std::string& file) { return (fs::path(cfg.output) / file).string(); }

void ensure_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create output directory " + cfg.output + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path);
  return os;
}

}  // namespace

void write_sigma(const SigmaEstimate& s, const std::string& dir) {
  auto os = open_out((fs::path(dir) / "sigma.csv").string());
  os << "radius,k,stderr,lags,partial,in_disc\n";
  for (const auto& b : s.curve) {
    os << format_double(b.radius) << ',' << format_double(b.k) << ',' << format_double(b.std_err) << ',' << b.lags
       << ',' << format_double(b.partial) << ',' << (b.radius <= s.R + 1e-9 * s.h ? 1 : 0) << '\n';
  }
  auto ss = open_out((fs::path(dir) / "sigma_summary.csv").string());
  ss << "sigma2,stderr,R,h,n_reps,mean,k0,tail,R_from_rule,note\n";
  ss << format_double(s.sigma2) << ',' << format_double(s.std_err) << ',' << format_double(s.R) << ','
     << format_double(s.h) << ',' << s.n_reps << ',' << format_double(s.mean) << ',' << format_double(s.k0) << ','
     << format_double(s.tail) << ',' << (s.R_from_rule ? 1 : 0) << ",\"" << s.note << "\"\n";
}

SigmaEstimate read_sigma(const std::string& dir) {
  const std::string path = (fs::path(dir) / "sigma_summary.csv").string();
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path + " (run simulate first)");
  std::string header, line;
  std::getline(in, header);
  const std::string expected = "sigma2,stderr,R,h,n_reps,mean,k0,tail,R_from_rule,note";
  if (header != expected) throw Error(ErrorKind::kSchema, path + ": expected header " + expected);
  if (!std::getline(in, line)) throw Error(ErrorKind::kSchema, path + ": missing summary row");
  std::vector<std::string> f;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    else if (ch == ',' && !quoted) {
      f.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  f.push_back(cur);
  if (f.size() != 10) throw Error(ErrorKind::kSchema, path + ": expected 10 columns");
  static const char* names[] = {"sigma2", "stderr", "R", "h", "n_reps", "mean", "k0", "tail", "R_from_rule", "note"};
  auto num = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      double v = std::stod(f[i], &used);
      if (used != f[i].size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::kSchema, path + ": column '" + names[i] + "' is not a number");
    }
  };
  SigmaEstimate s;
  s.sigma2 = num(0);
  s.std_err = num(1);
  s.R = num(2);
  s.h = num(3);
  s.n_reps = static_cast<std::size_t>(num(4));
  s.mean = num(5);
  s.k0 = num(6);
  s.tail = num(7);
  s.R_from_rule = num(8) != 0.0;
  s.note = f[9];
  return s;
}

void write_manifest(const RunConfig& cfg, const std::string& stage) {
  ensure_output(cfg);
  auto os = open_out(path_in(cfg, "manifest.txt"));
  os << "spatialrisk " << kVersion << "\n";
  os << "stage: " << stage << "\n";
  os << "config: " << cfg.path << "\n";
  os << "master_seed: " << cfg.plan.seed << "\n";
  os << "n_reps: " << cfg.plan.n_reps << "\n";
  os << "model: " << describe(cfg.cost.field) << "\n";
  os << "grid: [" << format_double(cfg.plan.grid.bbox().x0) << ", " << format_double(cfg.plan.grid.bbox().y0) << "] x ["
     << format_double(cfg.plan.grid.bbox().x1) << ", " << format_double(cfg.plan.grid.bbox().y1)
     << "], h = " << format_double(cfg.plan.grid.h()) << " (" << cfg.plan.grid.nx() << " x " << cfg.plan.grid.ny() << ")\n";
  os << "bootstrap: " << cfg.bootstrap << " resamples\n";
  os << "eigen: " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
  os << "fftw: " << fftw_version << "\n";
  os << "compiler: " << __VERSION__ << "\n";
  os << "--- config ---\n" << cfg.source;
  if (!cfg.source.empty() && cfg.source.back() != '\n') os << '\n';
}

void stage_simulate(const RunConfig& cfg, std::size_t fields) {
  ensure_output(cfg);
  LossTable table = run_replications(cfg.plan, cfg.cost);
  write_loss_csv(table, path_in(cfg, "losses.csv"));
  if (cfg.sigma) {
    SigmaOptions so;
    so.n_reps = cfg.sigma->n_reps;
    so.R = cfg.sigma->R;
    so.seed = cfg.plan.seed;
    so.threads = cfg.plan.threads;
    write_sigma(estimate_sigma(cfg.cost, cfg.plan.grid, so), cfg.output);
  }
  if (fields > 0) {
    FieldSimulator sim(cfg.cost.field, cfg.plan.grid, derive_seed(cfg.plan.seed, kPilotStream));
    for (std::size_t rep = 0; rep < fields; ++rep) {
      FieldSample s{cfg.plan.grid, std::vector<double>(cfg.plan.grid.cell_count()), describe(cfg.cost.field),
                    derive_seed(cfg.plan.seed, rep), 0};
      Rng rng = make_rng(cfg.plan.seed, rep);
      s.points = sim.simulate(rng, s.values);
      write_field_csv(s, path_in(cfg, "field_" + std::to_string(rep) + ".csv"));
    }
  }
}

namespace {

LossTable load_losses(const RunConfig& cfg) {
  LossTable t = read_loss_csv(path_in(cfg, "losses.csv"));
  for (const auto& r : cfg.plan.regions) {
    if (std::find(t.regions().begin(), t.regions().end(), r.id) == t.regions().end()) {
      throw Error(ErrorKind::kSchema, "losses.csv: column 'region_id' lacks region " + r.id);
    }
  }
  for (double l : cfg.plan.lambdas) t.lambda_index(l);
  return t;
}

class EstimateCache {
 public:
  EstimateCache(const LossTable& t, const Bootstrap& b) : table_(t), boot_(b) {}
  const RiskEstimate& get(const std::string& region, double lambda, const RiskMeasureKind& kind) {
    auto key = std::make_tuple(region, lambda, kind.label());
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, spatial_risk(table_, kind, region, lambda, boot_)).first;
    return it->second;
  }

 private:
  const LossTable& table_;
  const Bootstrap& boot_;
  std::map<std::tuple<std::string, double, std::string>, RiskEstimate> cache_;
};

std::string alpha_field(const RiskMeasureKind& k) { return k.has_level() ? format_double(k.alpha) : ""; }

// The two parts of lambda (A1 u A2): homothety of each part about the union's
// barycenter, so the scaled parts stay disjoint and tile the scaled union.
std::pair<RegionUnion, RegionUnion> scaled_pair(const RegionUnion& a1, const RegionUnion& a2, double lambda) {
  std::vector<Region> all = a1.parts();
  all.insert(all.end(), a2.parts().begin(), a2.parts().end());
  const Point b = RegionUnion(all).barycenter();
  auto map = [&](const RegionUnion& u) {
    std::vector<Region> out;
    for (const Region& p : u.parts()) {
      const Point c = p.barycenter();
      out.push_back(translate(scale(p, lambda), (lambda - 1.0) * (c - b)));
    }
    return RegionUnion(out);
  };
  return {map(a1), map(a2)};
}

}  // namespace

void stage_estimate(const RunConfig& cfg) {
  ensure_output(cfg);
  LossTable t = load_losses(cfg);
  Bootstrap boot(t.n_reps(), cfg.bootstrap, cfg.plan.seed);
  auto os = open_out(path_in(cfg, "risk_estimates.csv"));
  os << "region_id,lambda,kind,alpha,estimate,stderr,n\n";
  for (const auto& r : cfg.plan.regions) {
    for (double l : cfg.plan.lambdas) {
      for (const auto& k : cfg.kinds) {
        RiskEstimate e = spatial_risk(t, k, r.id, l, boot);
        os << r.id << ',' << format_double(l) << ',' << k.name() << ',' << alpha_field(k) << ','
           << format_double(e.estimate) << ',' << format_double(e.std_err) << ',' << e.n << '\n';
      }
    }
  }
}

std::vector<CheckReport> stage_check(const RunConfig& cfg) {
  ensure_output(cfg);
  LossTable t = load_losses(cfg);
  Bootstrap boot(t.n_reps(), cfg.bootstrap, cfg.plan.seed);
  EstimateCache cache(t, boot);
  std::optional<SigmaEstimate> sigma;
  if (cfg.needs_sigma()) sigma = read_sigma(cfg.output);
  // E[C(0)]: exact quadrature when the exposure is constant.
  const double mu = cfg.cost.exposure.is_constant() ? expected_cost_quadrature(cfg.cost) : (sigma ? sigma->mean : 0.0);

  std::vector<CheckReport> reports;
  std::ostringstream homog;
  homog << "region_id,kind,alpha,K1,K1_se,K2,K2_se,gamma,gamma_se,residual,unstable,theory_K1,theory_K2,theory_gamma,status\n";
  std::ostringstream clt_csv;
  bool have_clt = false;
  clt_csv << "region_id,lambda,n,mean,variance,variance_se,skewness,skewness_se,kurtosis,kurtosis_se,variance_ratio\n";

  for (const auto& c : cfg.checks) {
    if (c.type == "translation") {
      for (double l : c.lambdas) {
        for (const auto& k : c.kinds) {
          CheckReport r = check_translation(cache.get(c.region, l, k), cache.get(c.shifted, l, k), cfg.cost.stationary(), c.level);
          r.check += " lambda=" + format_double(l);
          reports.push_back(r);
        }
      }
    } else if (c.type == "subadditivity") {
      for (double l : c.lambdas) {
        for (const auto& k : c.kinds) {
          auto [s1, s2] = scaled_pair(cfg.region(c.a1), cfg.region(c.a2), l);
          CheckReport r = check_subadditivity(s1, s2,
                                              cache.get(c.a1, l, k), cache.get(c.a2, l, k), cache.get(c.union_id, l, k), c.level);
          r.check += " lambda=" + format_double(l);
          reports.push_back(r);
        }
      }
    } else if (c.type == "premium") {
      for (double l : c.lambdas) {
        for (const auto& k : c.kinds) {
          auto ln1 = t.column(c.a1, l);
          const double p = c.premium ? *c.premium : apply_measure(k, ln1) + c.premium_offset;
          auto [s1, s2] = scaled_pair(cfg.region(c.a1), cfg.region(c.a2), l);
          AdequacyReport a = premium_adequacy(s1, s2, ln1,
                                              t.column(c.union_id, l), p, k, boot, c.level);
          reports.push_back({"premium " + k.label() + " " + c.union_id + " lambda=" + format_double(l), a.status,
                             a.details, a.difference, a.ci_low, a.ci_high});
        }
      }
    } else if (c.type == "homogeneity") {
      const double nu = cfg.region(c.region).measure();
      for (const auto& k : c.kinds) {
        std::vector<RiskEstimate> ests;
        for (double l : c.lambdas) ests.push_back(cache.get(c.region, l, k));
        HomogeneityFit fit = fit_homogeneity(ests);
        ConstantsComparison cmp = compare_constants(fit, *sigma, mu, nu, k);
        homog << c.region << ',' << k.name() << ',' << alpha_field(k) << ',' << format_double(fit.K1) << ','
              << format_double(fit.K1_se) << ',' << format_double(fit.K2) << ',' << format_double(fit.K2_se) << ','
              << format_double(fit.gamma) << ',' << format_double(fit.gamma_se) << ',' << format_double(fit.residual_norm)
              << ',' << (fit.unstable ? 1 : 0) << ',' << format_double(cmp.theory.K1) << ',' << format_double(cmp.theory.K2)
              << ',' << format_double(cmp.theory.gamma) << ',' << to_string(cmp.status) << '\n';
        reports.push_back({"homogeneity " + k.label() + " " + c.region, cmp.status, cmp.details, fit.gamma,
                           fit.gamma_ci[0], fit.gamma_ci[1]});
      }
    } else if (c.type == "clt") {
      const double nu = cfg.region(c.region).measure();
      CltReport rep = clt_report(t, c.region, mu, *sigma, nu, &boot);
      have_clt = true;
      for (const auto& row : rep.rows) {
        clt_csv << c.region << ',' << format_double(row.lambda) << ',' << row.n << ',' << format_double(row.mean) << ','
                << format_double(row.variance) << ',' << format_double(row.variance_se) << ','
                << format_double(row.skewness) << ',' << format_double(row.skewness_se) << ','
                << format_double(row.kurtosis) << ',' << format_double(row.kurtosis_se) << ','
                << format_double(row.variance_ratio) << '\n';
      }
      const CltRow& last = rep.rows.back();
      std::ostringstream os;
      os.precision(6);
      os << "lambda " << last.lambda << ": variance " << last.variance << " vs target " << rep.target_variance
         << " (ratio " << last.variance_ratio << "), skewness " << last.skewness << " +- " << last.skewness_se
         << ", excess kurtosis " << last.kurtosis << " +- " << last.kurtosis_se;
      CheckStatus st;
      if (last.degenerate || !(rep.target_variance > 0.0)) {
        st = CheckStatus::kInconclusive;
        os << "; " << (rep.note.empty() ? "target variance not positive" : rep.note);
      } else {
        const bool normal = std::abs(last.skewness) <= 3.0 * last.skewness_se && std::abs(last.kurtosis) <= 3.0 * last.kurtosis_se;
        const double var_se = std::hypot(last.variance_se / rep.target_variance,
                                         last.variance_ratio * sigma->std_err / std::max(sigma->sigma2, 1e-300));
        const bool scale = std::abs(last.variance_ratio - 1.0) <= 3.0 * var_se;
        st = normal && scale ? CheckStatus::kPass : CheckStatus::kFail;
        os << "; moments " << (normal ? "" : "not ") << "consistent with the Gaussian limit, variance "
           << (scale ? "" : "not ") << "consistent with the target";
      }
      reports.push_back({"clt " + c.region, st, os.str(), last.variance_ratio, 0.0, 0.0});
    } else if (c.type == "integrability") {
      IntegrabilityReport ir;
      if (const auto* s = std::get_if<SmithModel>(&cfg.cost.field)) {
        ir = check_theta_integrability(*s, c.q, c.radii);
      } else {
        ir = check_theta_integrability(std::get<BrownResnickModel>(cfg.cost.field), c.q, c.radii, c.n_reps, cfg.plan.seed);
      }
      std::ostringstream os;
      os.precision(6);
      os << "q=" << c.q << " partial";
      for (std::size_t i = 0; i < ir.partial.size(); ++i) os << " R" << ir.radii[i] << ":" << ir.partial[i];
      os << "; " << ir.note;
      reports.push_back({"integrability q=" + format_double(c.q),
                         ir.consistent_with_finite ? CheckStatus::kPass : CheckStatus::kInconclusive, os.str(),
                         ir.partial.back(), 0.0, 0.0});
    } else if (c.type == "variogram") {
      std::ostringstream os;
      os.precision(6);
      if (const auto* b = std::get_if<BrownResnickModel>(&cfg.cost.field)) {
        auto rows = variogram_conditions(b->variogram, c.radii);
        for (const auto& r : rows) os << "r=" << r.r << " sup_ratio=" << r.sup_ratio << " growth=" << r.growth << "; ";
        os << "finite ladder only, not asserted";
      } else {
        os << "not a Brown-Resnick model";
      }
      reports.push_back({"variogram conditions", CheckStatus::kInconclusive, os.str(), 0.0, 0.0, 0.0});
    }
  }

  {
    auto os = open_out(path_in(cfg, "homogeneity.csv"));
    os << homog.str();
  }
  if (have_clt) {
    auto os = open_out(path_in(cfg, "clt.csv"));
    os << clt_csv.str();
  }
  auto os = open_out(path_in(cfg, "checks_summary.txt"));
  for (const auto& r : reports) {
    os << "{check: \"" << r.check << "\", status: " << to_string(r.status) << ", details: \"" << r.details << "\"}\n";
  }
  return reports;
}

std::vector<CheckReport> run_pipeline(const RunConfig& cfg) {
  write_manifest(cfg, "run");
  stage_simulate(cfg);
  stage_estimate(cfg);
  return stage_check(cfg);
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kTruncationBudget: return 3;
    case ErrorKind::kSampleSize: return 4;
    case ErrorKind::kExcludedLevel: return 6;
    case ErrorKind::kSchema: return 7;
    case ErrorKind::kIo: return 8;
    default: return 2;
  }
}

}  // namespace spatialrisk
