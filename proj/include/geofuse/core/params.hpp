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

#include <string>
#include <vector>

#include "geofuse/core/autodiff.hpp"
#include "geofuse/core/rng.hpp"

namespace geofuse {

template <typename T>
struct NamedParam {
  std::string name;
  ad::Var<T> var;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
ad::Var<T> make_param(ad::Mat<T> value) {
  return ad::Var<T>(std::move(value), true);
}

template <typename T>
ad::Mat<T> normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  ad::Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(stddev * rng.normal());
  return m;
}

// Deep copy: a fresh leaf holding the same values.
template <typename T>
ad::Var<T> clone_param(const ad::Var<T>& p) {
  return ad::Var<T>(p.value(), p.requires_grad());
}

template <typename T>
void set_trainable(const ParamList<T>& params, bool on) {
  for (const auto& p : params) const_cast<ad::Var<T>&>(p.var).set_requires_grad(on);
}

template <typename T>
std::size_t count_parameters(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

}  // namespace geofuse
