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

#include "doctest.h"
#include "spatialrisk/error.hpp"
#include "spatialrisk/gaussian.hpp"
#include "spatialrisk/region.hpp"

using namespace spatialrisk;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::kIo;
}

std::vector<Region> samples() {
  return {Region::rect(0, 0, 1, 1), Region::rect(-2, 1, 3, 1.5), Region::disc({3, -1}, 2),
          Region::polygon({{0, 0}, {1, 0}, {0, 1}}), Region::polygon({{0, 0}, {4, 0}, {4, 3}, {2, 1}, {0, 3}})};
}

}  // namespace

TEST_SUITE("region") {
TEST_CASE("measures") {
  CHECK(measure(Region::rect(0, 0, 1, 1)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(measure(Region::disc({0, 0}, 2)) == doctest::Approx(4 * kPi).epsilon(1e-15));
  CHECK(measure(scale(Region::rect(0, 0, 1, 1), 3)) == doctest::Approx(9.0).epsilon(1e-15));
  // Non-convex pentagon: 4x3 box minus the notch triangle (0,3),(2,1),(4,3).
  CHECK(measure(Region::polygon({{0, 0}, {4, 0}, {4, 3}, {2, 1}, {0, 3}})) == doctest::Approx(12.0 - 4.0));
}

TEST_CASE("barycenters") {
  Point b = barycenter(Region::rect(0, 0, 1, 1));
  CHECK(b.x == doctest::Approx(0.5));
  CHECK(b.y == doctest::Approx(0.5));
  b = barycenter(Region::disc({3, -1}, 1));
  CHECK(b.x == 3.0);
  CHECK(b.y == -1.0);
  b = barycenter(Region::polygon({{0, 0}, {1, 0}, {0, 1}}));
  CHECK(b.x == doctest::Approx(1.0 / 3.0));
  CHECK(b.y == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("homothety and translation") {
  Region sq = Region::rect(0, 0, 1, 1);
  Box b = scale(sq, 2).bounds();
  CHECK(b.x0 == doctest::Approx(-0.5));
  CHECK(b.x1 == doctest::Approx(1.5));
  CHECK(b.y0 == doctest::Approx(-0.5));
  CHECK(b.y1 == doctest::Approx(1.5));
  CHECK(scale(sq, 1).bounds() == sq.bounds());
  CHECK(translate(sq, {0, 0}).bounds() == sq.bounds());
  Region d = translate(Region::disc({0, 0}, 1), {2, 3});
  auto s = std::get<DiscShape>(d.shape());
  CHECK(s.center == Point{2, 3});
  CHECK(s.radius == 1.0);

  for (const Region& a : samples()) {
    for (double lambda : {0.5, 1.0, 2.0, 3.0, 7.5}) {
      CHECK(measure(scale(a, lambda)) == doctest::Approx(lambda * lambda * measure(a)).epsilon(1e-14));
      Point b0 = barycenter(a), b1 = barycenter(scale(a, lambda));
      CHECK(std::abs(b1.x - b0.x) <= 1e-12 * (1 + std::abs(b0.x)));
      CHECK(std::abs(b1.y - b0.y) <= 1e-12 * (1 + std::abs(b0.y)));
    }
    CHECK(measure(translate(a, {1.25, -7.5})) == doctest::Approx(measure(a)).epsilon(1e-14));
  }
}

TEST_CASE("validation errors") {
  CHECK(kind_of([] { Region::rect(0, 0, 0, 1); }) == ErrorKind::kInvalidRegion);
  CHECK(kind_of([] { Region::disc({0, 0}, 0); }) == ErrorKind::kInvalidRegion);
  CHECK(kind_of([] { Region::polygon({{0, 0}, {1, 0}, {2, 0}}); }) == ErrorKind::kInvalidRegion);
  // Clockwise and self-intersecting polygons.
  CHECK(kind_of([] { Region::polygon({{0, 0}, {0, 1}, {1, 0}}); }) == ErrorKind::kInvalidRegion);
  CHECK(kind_of([] { Region::polygon({{0, 0}, {1, 1}, {1, 0}, {0, 1}}); }) == ErrorKind::kInvalidRegion);
  CHECK(kind_of([] { scale(Region::rect(0, 0, 1, 1), 0.0); }) == ErrorKind::kInvalidParameter);
  CHECK(kind_of([] { scale(Region::rect(0, 0, 1, 1), -1.0); }) == ErrorKind::kInvalidParameter);
}

TEST_CASE("containment and convexity") {
  Region p = Region::polygon({{0, 0}, {4, 0}, {4, 3}, {2, 1}, {0, 3}});
  CHECK(p.contains({1, 0.5}));
  CHECK_FALSE(p.contains({2, 2}));
  CHECK(p.contains({0, 0}));
  CHECK_FALSE(p.is_convex());
  CHECK(Region::rect(0, 0, 1, 1).is_convex());
  CHECK(Region::disc({0, 0}, 1).contains({1, 0}));
}

TEST_CASE("unions") {
  Region a = Region::rect(0, 0, 1, 1), b = Region::rect(1, 0, 2, 1);
  CHECK(disjoint(a, b));
  CHECK_FALSE(disjoint(a, Region::rect(0.5, 0, 1.5, 1)));
  RegionUnion u({a, b});
  CHECK(u.measure() == doctest::Approx(2.0));
  CHECK(u.barycenter().x == doctest::Approx(1.0));
  CHECK(kind_of([&] { RegionUnion({a, Region::rect(0.5, 0.5, 1.5, 1.5)}); }) == ErrorKind::kDisjointness);
  RegionUnion s = u.scaled(2.0);
  CHECK(s.measure() == doctest::Approx(8.0));
  CHECK(s.bounds().x0 == doctest::Approx(-1.0));
  CHECK(s.bounds().x1 == doctest::Approx(3.0));
}

TEST_CASE("grid geometry") {
  GridSpec g(Box{0, 0, 1, 0.55}, 0.1);
  CHECK(g.nx() == 10);
  CHECK(g.ny() == 6);
  CHECK(g.bbox().y1 == doctest::Approx(0.6));
  Point c = g.cell_center(g.index(2, 3));
  CHECK(c.x == doctest::Approx(0.25));
  CHECK(c.y == doctest::Approx(0.35));
  CHECK(g.locate({0.25, 0.35}).value() == g.index(2, 3));
  CHECK_FALSE(g.locate({1.5, 0.1}).has_value());
}

TEST_CASE("rasterize examples") {
  GridSpec g(Box{0, 0, 1, 1}, 0.5);
  CellWeights w = rasterize(Region::rect(0, 0, 1, 1), g);
  REQUIRE(w.cells.size() == 4);
  for (double v : w.weights) CHECK(v == doctest::Approx(0.25));

  GridSpec fine(Box{-1.5, -1.5, 1.5, 1.5}, 0.01);
  CHECK(std::abs(rasterize(Region::disc({0, 0}, 1), fine).total() - kPi) < 1e-3);
  CHECK(std::abs(rasterize(Region::disc({0, 0}, 1), fine, {BoundaryMode::kSubsample, 4}).total() - kPi) < 1e-3);

  CHECK(kind_of([&] { rasterize(Region::rect(0, 0, 2, 1), g); }) == ErrorKind::kOutOfBounds);
}

TEST_CASE("union weights are the cellwise sum of the parts") {
  GridSpec g(Box{0, 0, 3, 2}, 0.1);
  Region a = Region::disc({0.9, 1.0}, 0.6), b = Region::polygon({{1.6, 0.2}, {2.8, 0.4}, {2.2, 1.7}});
  CellWeights wa = rasterize(a, g), wb = rasterize(b, g), wu = rasterize(RegionUnion({a, b}), g);
  std::vector<double> sum(g.cell_count(), 0.0), got(g.cell_count(), 0.0);
  for (std::size_t k = 0; k < wa.cells.size(); ++k) sum[wa.cells[k]] += wa.weights[k];
  for (std::size_t k = 0; k < wb.cells.size(); ++k) sum[wb.cells[k]] += wb.weights[k];
  for (std::size_t k = 0; k < wu.cells.size(); ++k) got[wu.cells[k]] += wu.weights[k];
  for (std::size_t i = 0; i < sum.size(); ++i) CHECK(got[i] == doctest::Approx(sum[i]).epsilon(1e-14));
}

TEST_CASE("exact weights reproduce analytic areas") {
  for (const Region& a : samples()) {
    Box b = a.bounds();
    GridSpec g(Box{b.x0 - 0.3, b.y0 - 0.2, b.x1 + 0.3, b.y1 + 0.2}, 0.07);
    CHECK(rasterize(a, g).total() == doctest::Approx(measure(a)).epsilon(1e-12));
    for (double v : rasterize(a, g).weights) {
      CHECK(v >= 0.0);
      CHECK(v <= g.cell_area() * (1 + 1e-12));
    }
  }
}

TEST_CASE("weight sum converges on the disc as h halves") {
  Region d = Region::disc({0.1, -0.2}, 1.0);
  double prev = -1;
  for (double h : {0.2, 0.1, 0.05, 0.025}) {
    GridSpec g(Box{-1.5, -1.5, 1.5, 1.5}, h);
    const double err = std::abs(rasterize(d, g).total() - kPi);
    if (prev >= 0) CHECK(err <= prev / 4.0 + 1e-12);
    prev = err;
  }
  // Sub-sampled boundary cells converge at O(h^2) overall.
  for (double h : {0.2, 0.1, 0.05, 0.025}) {
    GridSpec g(Box{-1.5, -1.5, 1.5, 1.5}, h);
    CHECK(std::abs(rasterize(d, g, {BoundaryMode::kSubsample, 4}).total() - kPi) < 2.0 * h * h);
  }
}
}
