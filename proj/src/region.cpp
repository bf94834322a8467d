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

#include "spatialrisk/region.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spatialrisk/error.hpp"
#include "spatialrisk/gaussian.hpp"

namespace spatialrisk {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

double signed_area(const std::vector<Point>& v) {
  double s = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    const Point& p = v[i];
    const Point& q = v[(i + 1) % n];
    s += p.x * q.y - q.x * p.y;
  }
  return 0.5 * s;
}

bool on_segment(Point p, Point a, Point b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

int orientation(Point a, Point b, Point c) {
  double v = cross(a, b, c);
  double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), std::abs(c.x - a.x), std::abs(c.y - a.y), 1.0});
  if (std::abs(v) <= 1e-14 * scale * scale) return 0;
  return v > 0 ? 1 : -1;
}

bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  int o1 = orientation(p1, p2, q1);
  int o2 = orientation(p1, p2, q2);
  int o3 = orientation(q1, q2, p1);
  int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

void require_simple(const std::vector<Point>& v) {
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] == v[(i + 1) % n]) throw Error(ErrorKind::kInvalidRegion, "polygon has repeated vertex");
  }
  for (std::size_t i = 0; i < n; ++i) {
    Point a = v[i], b = v[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      Point c = v[j], d = v[(j + 1) % n];
      bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // Shared vertex only; reject a fold-back onto the previous edge.
        Point shared = (j == i + 1) ? b : a;
        Point other_ab = (j == i + 1) ? a : b;
        Point other_cd = (j == i + 1) ? d : c;
        if (orientation(other_ab, shared, other_cd) == 0) {
          Point u = other_ab - shared, w = other_cd - shared;
          if (u.x * w.x + u.y * w.y > 0) throw Error(ErrorKind::kInvalidRegion, "polygon edges overlap");
        }
        continue;
      }
      if (segments_intersect(a, b, c, d)) throw Error(ErrorKind::kInvalidRegion, "polygon is not simple");
    }
  }
}

bool polygon_contains(const std::vector<Point>& v, Point p) {
  const std::size_t n = v.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (orientation(v[j], v[i], p) == 0 && on_segment(p, v[j], v[i])) return true;
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      double xi = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (p.x < xi) inside = !inside;
    }
  }
  return inside;
}

// Sutherland-Hodgman clip of a (possibly concave) polygon against a box; the
// result's shoelace area equals the intersection area.
double polygon_box_area(const std::vector<Point>& poly, const Box& box) {
  std::vector<Point> in = poly, out;
  auto clip = [&](auto inside, auto intersect) {
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      Point cur = in[i], prev = in[(i + n - 1) % n];
      bool ci = inside(cur), pi = inside(prev);
      if (ci) {
        if (!pi) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pi) {
        out.push_back(intersect(prev, cur));
      }
    }
    std::swap(in, out);
  };
  auto at_x = [](double x) {
    return [x](Point a, Point b) { return Point{x, a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)}; };
  };
  auto at_y = [](double y) {
    return [y](Point a, Point b) { return Point{a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y), y}; };
  };
  clip([&](Point p) { return p.x >= box.x0; }, at_x(box.x0));
  if (in.empty()) return 0.0;
  clip([&](Point p) { return p.x <= box.x1; }, at_x(box.x1));
  if (in.empty()) return 0.0;
  clip([&](Point p) { return p.y >= box.y0; }, at_y(box.y0));
  if (in.empty()) return 0.0;
  clip([&](Point p) { return p.y <= box.y1; }, at_y(box.y1));
  if (in.size() < 3) return 0.0;
  return std::max(0.0, signed_area(in));
}

// Area of {|p| <= r, p.x <= x, p.y <= y} for a disc centred at the origin.
double disc_quadrant_area(double r, double x, double y) {
  if (x <= -r || y <= -r) return 0.0;
  const double r2 = r * r;
  auto s = [&](double t) { return std::sqrt(std::max(0.0, r2 - t * t)); };
  auto S = [&](double t) { return 0.5 * (t * s(t) + r2 * std::asin(std::clamp(t / r, -1.0, 1.0))); };
  const double xe = std::min(x, r);
  if (y >= r) return 2.0 * (S(xe) - S(-r));
  const double w = std::sqrt(r2 - y * y);
  auto piece = [&](double p, double q, bool middle) {
    q = std::min(q, xe);
    if (q <= p) return 0.0;
    if (middle) return y * (q - p) + S(q) - S(p);
    return y >= 0.0 ? 2.0 * (S(q) - S(p)) : 0.0;
  };
  return piece(-r, -w, false) + piece(-w, w, true) + piece(w, r, false);
}

double disc_box_area(const DiscShape& d, const Box& box) {
  const double a = box.x0 - d.center.x, b = box.x1 - d.center.x;
  const double c = box.y0 - d.center.y, e = box.y1 - d.center.y;
  const double r = d.radius;
  double area = disc_quadrant_area(r, b, e) - disc_quadrant_area(r, a, e) - disc_quadrant_area(r, b, c) +
                disc_quadrant_area(r, a, c);
  return std::clamp(area, 0.0, box.area());
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidRegion, std::string(what) + " is not finite");
}

}  // namespace

bool Box::contains(const Box& other, double tol) const {
  double t = tol * std::max({1.0, std::abs(x0), std::abs(x1), std::abs(y0), std::abs(y1)});
  return other.x0 >= x0 - t && other.x1 <= x1 + t && other.y0 >= y0 - t && other.y1 <= y1 + t;
}

Region Region::rect(double x0, double y0, double x1, double y1) {
  for (double v : {x0, y0, x1, y1}) require_finite(v, "rectangle coordinate");
  if (!(x1 > x0 && y1 > y0)) throw Error(ErrorKind::kInvalidRegion, "rectangle has zero or negative area");
  return Region(RectShape{Box{x0, y0, x1, y1}});
}

Region Region::disc(Point center, double radius) {
  require_finite(center.x, "disc centre");
  require_finite(center.y, "disc centre");
  require_finite(radius, "disc radius");
  if (!(radius > 0.0)) throw Error(ErrorKind::kInvalidRegion, "disc radius must be positive");
  return Region(DiscShape{center, radius});
}

Region Region::polygon(std::vector<Point> vertices) {
  if (vertices.size() < 3) throw Error(ErrorKind::kInvalidRegion, "polygon needs at least 3 vertices");
  for (const Point& p : vertices) {
    require_finite(p.x, "polygon vertex");
    require_finite(p.y, "polygon vertex");
  }
  double area = signed_area(vertices);
  if (area == 0.0) throw Error(ErrorKind::kInvalidRegion, "polygon has zero area");
  if (area < 0.0) throw Error(ErrorKind::kInvalidRegion, "polygon vertices must be counterclockwise");
  require_simple(vertices);
  return Region(PolygonShape{std::move(vertices)});
}

double Region::measure() const {
  return std::visit(Overloaded{
                        [](const RectShape& r) { return r.box.area(); },
                        [](const DiscShape& d) { return kPi * d.radius * d.radius; },
                        [](const PolygonShape& p) { return signed_area(p.vertices); },
                    },
                    shape_);
}

Point Region::barycenter() const {
  return std::visit(Overloaded{
                        [](const RectShape& r) {
                          return Point{0.5 * (r.box.x0 + r.box.x1), 0.5 * (r.box.y0 + r.box.y1)};
                        },
                        [](const DiscShape& d) { return d.center; },
                        [](const PolygonShape& p) {
                          const auto& v = p.vertices;
                          // Shift to the first vertex to limit cancellation.
                          Point o = v[0];
                          double a = 0.0, cx = 0.0, cy = 0.0;
                          for (std::size_t i = 0, n = v.size(); i < n; ++i) {
                            Point s = v[i] - o, t = v[(i + 1) % n] - o;
                            double w = s.x * t.y - t.x * s.y;
                            a += w;
                            cx += (s.x + t.x) * w;
                            cy += (s.y + t.y) * w;
                          }
                          return Point{o.x + cx / (3.0 * a), o.y + cy / (3.0 * a)};
                        },
                    },
                    shape_);
}

Box Region::bounds() const {
  return std::visit(Overloaded{
                        [](const RectShape& r) { return r.box; },
                        [](const DiscShape& d) {
                          return Box{d.center.x - d.radius, d.center.y - d.radius, d.center.x + d.radius,
                                     d.center.y + d.radius};
                        },
                        [](const PolygonShape& p) {
                          Box b{p.vertices[0].x, p.vertices[0].y, p.vertices[0].x, p.vertices[0].y};
                          for (const Point& q : p.vertices) {
                            b.x0 = std::min(b.x0, q.x);
                            b.y0 = std::min(b.y0, q.y);
                            b.x1 = std::max(b.x1, q.x);
                            b.y1 = std::max(b.y1, q.y);
                          }
                          return b;
                        },
                    },
                    shape_);
}

bool Region::contains(Point q) const {
  return std::visit(Overloaded{
                        [&](const RectShape& r) {
                          return q.x >= r.box.x0 && q.x <= r.box.x1 && q.y >= r.box.y0 && q.y <= r.box.y1;
                        },
                        [&](const DiscShape& d) {
                          double dx = q.x - d.center.x, dy = q.y - d.center.y;
                          return dx * dx + dy * dy <= d.radius * d.radius;
                        },
                        [&](const PolygonShape& p) { return polygon_contains(p.vertices, q); },
                    },
                    shape_);
}

bool Region::is_convex() const {
  const auto* p = std::get_if<PolygonShape>(&shape_);
  if (p == nullptr) return true;
  const auto& v = p->vertices;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    if (orientation(v[i], v[(i + 1) % n], v[(i + 2) % n]) < 0) return false;
  }
  return true;
}

Region Region::scaled(double lambda) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::kInvalidParameter, "scale ratio must be positive");
  }
  const Point b = barycenter();
  auto map = [&](Point p) { return b + lambda * (p - b); };
  return std::visit(Overloaded{
                        [&](const RectShape& r) {
                          Point lo = map({r.box.x0, r.box.y0}), hi = map({r.box.x1, r.box.y1});
                          return Region(RectShape{Box{lo.x, lo.y, hi.x, hi.y}});
                        },
                        [&](const DiscShape& d) { return Region(DiscShape{d.center, lambda * d.radius}); },
                        [&](const PolygonShape& p) {
                          std::vector<Point> v;
                          v.reserve(p.vertices.size());
                          for (const Point& q : p.vertices) v.push_back(map(q));
                          return Region(PolygonShape{std::move(v)});
                        },
                    },
                    shape_);
}

Region Region::translated(Point t) const {
  return std::visit(Overloaded{
                        [&](const RectShape& r) {
                          return Region(RectShape{Box{r.box.x0 + t.x, r.box.y0 + t.y, r.box.x1 + t.x, r.box.y1 + t.y}});
                        },
                        [&](const DiscShape& d) { return Region(DiscShape{d.center + t, d.radius}); },
                        [&](const PolygonShape& p) {
                          std::vector<Point> v;
                          v.reserve(p.vertices.size());
                          for (const Point& q : p.vertices) v.push_back(q + t);
                          return Region(PolygonShape{std::move(v)});
                        },
                    },
                    shape_);
}

double Region::intersection_area(const Box& box) const {
  return std::visit(Overloaded{
                        [&](const RectShape& r) {
                          double w = std::min(r.box.x1, box.x1) - std::max(r.box.x0, box.x0);
                          double h = std::min(r.box.y1, box.y1) - std::max(r.box.y0, box.y0);
                          return (w > 0.0 && h > 0.0) ? w * h : 0.0;
                        },
                        [&](const DiscShape& d) { return disc_box_area(d, box); },
                        [&](const PolygonShape& p) { return polygon_box_area(p.vertices, box); },
                    },
                    shape_);
}

double measure(const Region& a) { return a.measure(); }
Point barycenter(const Region& a) { return a.barycenter(); }
Region scale(const Region& a, double lambda) { return a.scaled(lambda); }
Region translate(const Region& a, Point v) { return a.translated(v); }

bool disjoint(const Region& a, const Region& b) {
  Box ba = a.bounds(), bb = b.bounds();
  Box overlap{std::max(ba.x0, bb.x0), std::max(ba.y0, bb.y0), std::min(ba.x1, bb.x1), std::min(ba.y1, bb.y1)};
  if (overlap.width() <= 0.0 || overlap.height() <= 0.0) return true;
  // Midpoint sampling of the bounding-box overlap; shared edges carry no
  // sample mass because samples sit strictly inside the overlap box.
  const int n = 256;
  const double dx = overlap.width() / n, dy = overlap.height() / n;
  std::size_t both = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      Point p{overlap.x0 + (i + 0.5) * dx, overlap.y0 + (j + 0.5) * dy};
      if (a.contains(p) && b.contains(p)) ++both;
    }
  }
  double est = static_cast<double>(both) * dx * dy;
  return est <= 1e-9 * std::min(a.measure(), b.measure());
}

RegionUnion::RegionUnion(std::vector<Region> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw Error(ErrorKind::kInvalidRegion, "region union needs at least one part");
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    for (std::size_t j = i + 1; j < parts_.size(); ++j) {
      if (!disjoint(parts_[i], parts_[j])) {
        throw Error(ErrorKind::kDisjointness, "union parts " + std::to_string(i) + " and " + std::to_string(j) +
                                                  " overlap");
      }
    }
  }
}

RegionUnion::RegionUnion(const Region& single) : parts_{single} {}

double RegionUnion::measure() const {
  double s = 0.0;
  for (const auto& p : parts_) s += p.measure();
  return s;
}

Point RegionUnion::barycenter() const {
  double w = 0.0, x = 0.0, y = 0.0;
  for (const auto& p : parts_) {
    double m = p.measure();
    Point b = p.barycenter();
    w += m;
    x += m * b.x;
    y += m * b.y;
  }
  return {x / w, y / w};
}

Box RegionUnion::bounds() const {
  Box b = parts_[0].bounds();
  for (const auto& p : parts_) {
    Box q = p.bounds();
    b.x0 = std::min(b.x0, q.x0);
    b.y0 = std::min(b.y0, q.y0);
    b.x1 = std::max(b.x1, q.x1);
    b.y1 = std::max(b.y1, q.y1);
  }
  return b;
}

bool RegionUnion::contains(Point p) const {
  return std::any_of(parts_.begin(), parts_.end(), [&](const Region& r) { return r.contains(p); });
}

RegionUnion RegionUnion::scaled(double lambda) const {
  if (parts_.size() == 1) return RegionUnion(parts_[0].scaled(lambda));
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::kInvalidParameter, "scale ratio must be positive");
  }
  const Point b = barycenter();
  std::vector<Region> out;
  out.reserve(parts_.size());
  for (const auto& p : parts_) {
    // Homothety about b = part homothety about its own barycenter, then shift.
    Point pb = p.barycenter();
    Point target = b + lambda * (pb - b);
    out.push_back(p.scaled(lambda).translated(target - pb));
  }
  return RegionUnion(std::move(out), Unchecked{});
}

RegionUnion RegionUnion::translated(Point v) const {
  std::vector<Region> out;
  out.reserve(parts_.size());
  for (const auto& p : parts_) out.push_back(p.translated(v));
  return RegionUnion(std::move(out), Unchecked{});
}

GridSpec::GridSpec(Box bbox, double h) : bbox_(bbox), h_(h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::kInvalidParameter, "grid cell size must be positive");
  if (!(bbox.width() > 0.0 && bbox.height() > 0.0)) {
    throw Error(ErrorKind::kInvalidParameter, "grid bounding box must have positive area");
  }
  nx_ = static_cast<std::size_t>(std::ceil(bbox.width() / h - 1e-9));
  ny_ = static_cast<std::size_t>(std::ceil(bbox.height() / h - 1e-9));
  nx_ = std::max<std::size_t>(nx_, 1);
  ny_ = std::max<std::size_t>(ny_, 1);
  bbox_.x1 = bbox_.x0 + static_cast<double>(nx_) * h;
  bbox_.y1 = bbox_.y0 + static_cast<double>(ny_) * h;
}

Point GridSpec::cell_center(std::size_t index) const {
  std::size_t ix = index % nx_, iy = index / nx_;
  return {bbox_.x0 + (static_cast<double>(ix) + 0.5) * h_, bbox_.y0 + (static_cast<double>(iy) + 0.5) * h_};
}

Box GridSpec::cell_box(std::size_t index) const {
  std::size_t ix = index % nx_, iy = index / nx_;
  double x0 = bbox_.x0 + static_cast<double>(ix) * h_;
  double y0 = bbox_.y0 + static_cast<double>(iy) * h_;
  return {x0, y0, x0 + h_, y0 + h_};
}

std::optional<std::size_t> GridSpec::locate(Point p) const {
  double fx = (p.x - bbox_.x0) / h_, fy = (p.y - bbox_.y0) / h_;
  if (!(fx >= 0.0 && fy >= 0.0)) return std::nullopt;
  auto ix = static_cast<std::size_t>(std::floor(fx));
  auto iy = static_cast<std::size_t>(std::floor(fy));
  if (ix >= nx_ || iy >= ny_) return std::nullopt;
  return index(ix, iy);
}

double CellWeights::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

CellWeights rasterize(const Region& a, const GridSpec& grid, const RasterOptions& options) {
  const Box b = a.bounds();
  if (!grid.bbox().contains(b, 1e-9)) {
    throw Error(ErrorKind::kOutOfBounds, describe(a) + " exceeds the grid bounding box");
  }
  if (options.subsamples < 1) throw Error(ErrorKind::kInvalidParameter, "subsamples must be >= 1");
  const double h = grid.h();
  const Box& g = grid.bbox();
  auto clamp_index = [](double f, std::size_t n) {
    if (f <= 0.0) return std::size_t{0};
    auto i = static_cast<std::size_t>(f);
    return std::min(i, n - 1);
  };
  std::size_t ix0 = clamp_index(std::floor((b.x0 - g.x0) / h), grid.nx());
  std::size_t ix1 = clamp_index(std::floor((b.x1 - g.x0) / h), grid.nx());
  std::size_t iy0 = clamp_index(std::floor((b.y0 - g.y0) / h), grid.ny());
  std::size_t iy1 = clamp_index(std::floor((b.y1 - g.y0) / h), grid.ny());

  CellWeights out;
  const int s = options.subsamples;
  for (std::size_t iy = iy0; iy <= iy1; ++iy) {
    for (std::size_t ix = ix0; ix <= ix1; ++ix) {
      std::size_t idx = grid.index(ix, iy);
      Box cell = grid.cell_box(idx);
      double w = 0.0;
      if (options.mode == BoundaryMode::kExact) {
        w = a.intersection_area(cell);
      } else {
        int corners = a.contains({cell.x0, cell.y0}) + a.contains({cell.x1, cell.y0}) +
                      a.contains({cell.x0, cell.y1}) + a.contains({cell.x1, cell.y1});
        if (corners == 4 && a.is_convex()) {
          w = cell.area();
        } else {
          int hit = 0;
          for (int j = 0; j < s; ++j) {
            for (int i = 0; i < s; ++i) {
              Point p{cell.x0 + (i + 0.5) * h / s, cell.y0 + (j + 0.5) * h / s};
              hit += a.contains(p);
            }
          }
          w = cell.area() * hit / static_cast<double>(s * s);
        }
      }
      if (w > 0.0) {
        out.cells.push_back(idx);
        out.weights.push_back(w);
      }
    }
  }
  return out;
}

CellWeights rasterize(const RegionUnion& a, const GridSpec& grid, const RasterOptions& options) {
  if (a.parts().size() == 1) return rasterize(a.parts()[0], grid, options);
  std::vector<std::pair<std::size_t, double>> all;
  for (const auto& part : a.parts()) {
    CellWeights w = rasterize(part, grid, options);
    for (std::size_t i = 0; i < w.cells.size(); ++i) all.emplace_back(w.cells[i], w.weights[i]);
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  CellWeights out;
  for (const auto& [cell, w] : all) {
    if (!out.cells.empty() && out.cells.back() == cell) {
      out.weights.back() += w;
    } else {
      out.cells.push_back(cell);
      out.weights.push_back(w);
    }
  }
  return out;
}

std::string describe(const Region& a) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const RectShape& r) {
                   os << "rect(" << r.box.x0 << "," << r.box.y0 << "," << r.box.x1 << "," << r.box.y1 << ")";
                 },
                 [&](const DiscShape& d) { os << "disc(" << d.center.x << "," << d.center.y << "," << d.radius << ")"; },
                 [&](const PolygonShape& p) { os << "poly(" << p.vertices.size() << " vertices)"; },
             },
             a.shape());
  return os.str();
}

}  // namespace spatialrisk
