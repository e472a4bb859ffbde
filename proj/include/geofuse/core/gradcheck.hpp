// Copyright 2026 The GeoFuse Authors. All Rights Reserved.
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

#include <algorithm>
#include <cmath>
#include <functional>

#include "geofuse/core/autodiff.hpp"
#include "geofuse/core/rng.hpp"

namespace geofuse::gradcheck {

using MatD = ad::Mat<double>;

// Central differences of `f` with respect to every entry of `x` (restored
// afterwards).
inline MatD numeric_gradient(const std::function<double()>& f, MatD& x, double h = 1e-5) {
  MatD g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double fp = f();
    x.data()[i] = orig - h;
    const double fm = f();
    x.data()[i] = orig;
    g.data()[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// max |a-b| / max(1e-3 floor, max|b|): relative error that does not blow up
// on entries whose true gradient is near zero.
inline double relative_error(const MatD& analytic, const MatD& numeric) {
  const double scale = std::max(1e-3, numeric.cwiseAbs().maxCoeff());
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

inline MatD random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double s = 1.0) {
  MatD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

}  // namespace geofuse::gradcheck
