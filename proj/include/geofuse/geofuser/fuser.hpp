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

#include "geofuse/core/params.hpp"
#include "geofuse/encoders/encoder.hpp"

namespace geofuse::geofuser {

enum class FusionMode { kResidual, kTokenConcat, kDisabled };

std::string to_string(FusionMode mode);
// Throws ValidationError on an unknown name.
FusionMode fusion_mode_from_string(const std::string& name);

// Per-token two-layer residual network on (F_sem || F_geo):
//   fused = sem + W2 * silu(W1 * [sem, geo] + b1) + b2
// W2 and b2 start at exactly zero, so a fresh network is an identity on sem.
template <typename T>
class FusionNetwork {
 public:
  FusionNetwork() = default;
  FusionNetwork(int dim, int hidden, FusionMode mode, Rng& rng);

  FusionMode mode() const { return mode_; }
  int dim() const { return dim_; }
  int hidden() const { return hidden_; }

  ParamList<T> parameters(const std::string& prefix) const;

  ad::Var<T> w1, b1, w2, b2;

 private:
  int dim_ = 0;
  int hidden_ = 0;
  FusionMode mode_ = FusionMode::kResidual;
};

template <typename T>
encoders::TokenGrid<T> fuse(const encoders::TokenGrid<T>& sem, const encoders::TokenGrid<T>& geo,
                            const FusionNetwork<T>& net);

// Geometric tokens appended after the semantic tokens (2N rows).
template <typename T>
encoders::TokenGrid<T> concat_variant(const encoders::TokenGrid<T>& sem, const encoders::TokenGrid<T>& geo);

}  // namespace geofuse::geofuser
