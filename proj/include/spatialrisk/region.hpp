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

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace spatialrisk {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point a, Point b) = default;
};

/// Closed axis-aligned box [x0, x1] x [y0, y1].
struct Box {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(const Box& other, double tol = 1e-12) const;
  friend bool operator==(const Box&, const Box&) = default;
};

struct RectShape {
  Box box;
};

struct DiscShape {
  Point center;
  double radius = 0.0;
};

/// Simple polygon, counterclockwise, without repeated closing vertex.
struct PolygonShape {
  std::vector<Point> vertices;
};

using Shape = std::variant<RectShape, DiscShape, PolygonShape>;

/// Compact planar region of positive Lebesgue measure. Immutable.
class Region {
 public:
  static Region rect(double x0, double y0, double x1, double y1);
  static Region disc(Point center, double radius);
  static Region polygon(std::vector<Point> vertices);

  const Shape& shape() const { return shape_; }

  double measure() const;
  Point barycenter() const;
  Box bounds() const;
  /// Closed-set membership.
  bool contains(Point p) const;
  bool is_convex() const;

  /// Homothety with centre barycenter() and ratio lambda > 0.
  Region scaled(double lambda) const;
  Region translated(Point v) const;

  /// Exact area of the intersection with an axis-aligned box.
  double intersection_area(const Box& box) const;

 private:
  explicit Region(Shape shape) : shape_(std::move(shape)) {}
  Shape shape_;
};

double measure(const Region& a);
Point barycenter(const Region& a);
Region scale(const Region& a, double lambda);
Region translate(const Region& a, Point v);

/// Union of pairwise-disjoint regions. Construction rejects overlapping parts
/// (intersection area above tolerance) with a disjointness error.
class RegionUnion {
 public:
  RegionUnion(std::vector<Region> parts);  // NOLINT: implicit from a list is convenient
  RegionUnion(const Region& single);       // NOLINT

  const std::vector<Region>& parts() const { return parts_; }
  double measure() const;
  /// Area-weighted barycenter of the parts.
  Point barycenter() const;
  Box bounds() const;
  bool contains(Point p) const;
  /// Homothety of every part about the union's barycenter.
  RegionUnion scaled(double lambda) const;
  RegionUnion translated(Point v) const;

 private:
  struct Unchecked {};
  RegionUnion(std::vector<Region> parts, Unchecked) : parts_(std::move(parts)) {}
  std::vector<Region> parts_;
};

/// True when the two regions overlap on a set of (approximately) zero area.
bool disjoint(const Region& a, const Region& b);

/// Regular grid of square cells of side h covering a bounding box. The box is
/// extended on the high side so that it is an exact multiple of h.
class GridSpec {
 public:
  GridSpec(Box bbox, double h);

  const Box& bbox() const { return bbox_; }
  double h() const { return h_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t cell_count() const { return nx_ * ny_; }
  double cell_area() const { return h_ * h_; }

  /// Row-major index: iy * nx + ix.
  std::size_t index(std::size_t ix, std::size_t iy) const { return iy * nx_ + ix; }
  Point cell_center(std::size_t index) const;
  Box cell_box(std::size_t index) const;
  /// Cell whose half-open box [x0, x1) x [y0, y1) contains p.
  std::optional<std::size_t> locate(Point p) const;

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.bbox_ == b.bbox_ && a.h_ == b.h_;
  }

 private:
  Box bbox_;
  double h_;
  std::size_t nx_;
  std::size_t ny_;
};

/// Sparse per-cell weights: area of cell inside the region.
struct CellWeights {
  std::vector<std::size_t> cells;  // sorted, unique
  std::vector<double> weights;

  double total() const;
};

enum class BoundaryMode {
  kExact,      // exact cell/region intersection area
  kSubsample,  // corner test, then s x s midpoint sampling of boundary cells
};

struct RasterOptions {
  BoundaryMode mode = BoundaryMode::kExact;
  int subsamples = 4;
};

CellWeights rasterize(const Region& a, const GridSpec& grid, const RasterOptions& options = {});
/// Parts' weights summed cellwise.
CellWeights rasterize(const RegionUnion& a, const GridSpec& grid, const RasterOptions& options = {});

std::string describe(const Region& a);

}  // namespace spatialrisk
