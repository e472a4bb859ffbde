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

#include "geofuse/refine/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace geofuse::refine {

template <typename T>
double AdamW<T>::learning_rate() const {
  if (config_.horizon <= 0) return config_.lr;
  const double k = std::min<double>(static_cast<double>(updates_), static_cast<double>(config_.horizon));
  return config_.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * k / static_cast<double>(config_.horizon)));
}

template <typename T>
bool AdamW<T>::step(const ParamList<T>& params) {
  bool any = false;
  for (const auto& p : params) any = any || (p.var.requires_grad() && p.var.has_grad());
  if (!any) {
    for (const auto& p : params) const_cast<ad::Var<T>&>(p.var).zero_grad();
    return false;
  }
  const double lr = learning_rate();
  ++updates_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(updates_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(updates_));
  const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
  for (const auto& p : params) {
    auto& var = const_cast<ad::Var<T>&>(p.var);
    if (!var.requires_grad() || !var.has_grad()) continue;
    ad::Mat<T>& w = var.mutable_value();
    auto [it, fresh] = state_.try_emplace(p.name);
    Moments& mom = it->second;
    if (fresh || mom.m.rows() != w.rows() || mom.m.cols() != w.cols()) {
      mom.m = ad::Mat<T>::Zero(w.rows(), w.cols());
      mom.v = ad::Mat<T>::Zero(w.rows(), w.cols());
    }
    const ad::Mat<T>& g = var.grad();
    mom.m = b1 * mom.m + (T(1) - b1) * g;
    mom.v = b2 * mom.v + (T(1) - b2) * g.cwiseAbs2();
    const T step = static_cast<T>(lr / bc1);
    const T denom_scale = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(config_.eps);
    w.array() -= static_cast<T>(lr * config_.weight_decay) * w.array();
    w.array() -= step * mom.m.array() / (mom.v.array().sqrt() * denom_scale + eps);
    var.zero_grad();
  }
  for (const auto& p : params) const_cast<ad::Var<T>&>(p.var).zero_grad();
  return true;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace geofuse::refine
