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

namespace spatialrisk {

inline constexpr double kPi = 3.14159265358979323846;

double normal_pdf(double x);
double normal_cdf(double x);

/// Standard Gaussian quantile q_alpha for alpha in (0, 1). Rational initial
/// guess refined by Newton steps on erfc, accurate to ~1e-15.
double normal_quantile(double alpha);

/// Standard Frechet CDF exp(-1/z) for z > 0 (0 for z <= 0).
double frechet_cdf(double z);

}  // namespace spatialrisk
