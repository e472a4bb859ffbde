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

#include "geofuse/geofuser/fuser.hpp"

#include <cmath>

#include "geofuse/core/error.hpp"
#include "geofuse/core/ops.hpp"

namespace geofuse::geofuser {

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kResidual: return "residual";
    case FusionMode::kTokenConcat: return "token-concat";
    case FusionMode::kDisabled: return "disabled";
  }
  return "unknown";
}

FusionMode fusion_mode_from_string(const std::string& name) {
  for (FusionMode m : {FusionMode::kResidual, FusionMode::kTokenConcat, FusionMode::kDisabled}) {
    if (to_string(m) == name) return m;
  }
  throw ValidationError("unknown fusion mode '" + name + "' (residual, token-concat, disabled)");
}

template <typename T>
FusionNetwork<T>::FusionNetwork(int dim, int hidden, FusionMode mode, Rng& rng)
    : dim_(dim), hidden_(hidden > 0 ? hidden : dim), mode_(mode) {
  w1 = make_param(normal_init<T>(rng, 2 * dim_, hidden_, 1.0 / std::sqrt(2.0 * dim_)));
  b1 = make_param(ad::Mat<T>(ad::Mat<T>::Zero(1, hidden_)));
  w2 = make_param(ad::Mat<T>(ad::Mat<T>::Zero(hidden_, dim_)));
  b2 = make_param(ad::Mat<T>(ad::Mat<T>::Zero(1, dim_)));
}

template <typename T>
ParamList<T> FusionNetwork<T>::parameters(const std::string& prefix) const {
  return {{prefix + ".l1.w", w1}, {prefix + ".l1.b", b1}, {prefix + ".l2.w", w2}, {prefix + ".l2.b", b2}};
}

namespace {

template <typename T>
void check_pair(const encoders::TokenGrid<T>& sem, const encoders::TokenGrid<T>& geo) {
  if (sem.tokens.rows() != geo.tokens.rows() || sem.tokens.cols() != geo.tokens.cols()) {
    throw ValidationError("fuse: semantic and geometric token grids differ in shape");
  }
  if (sem.view != geo.view) throw ValidationError("fuse: token grids come from different views");
}

}  // namespace

template <typename T>
encoders::TokenGrid<T> fuse(const encoders::TokenGrid<T>& sem, const encoders::TokenGrid<T>& geo,
                            const FusionNetwork<T>& net) {
  check_pair(sem, geo);
  if (net.mode() == FusionMode::kTokenConcat) return concat_variant(sem, geo);
  encoders::TokenGrid<T> out{sem.tokens, sem.view, encoders::TokenKind::kFused};
  if (net.mode() == FusionMode::kDisabled) return out;
  if (sem.tokens.cols() != net.dim()) throw ValidationError("fuse: token width does not match the network");
  using namespace ad;
  const Var<T> hidden = silu(linear(concat_cols(sem.tokens, geo.tokens), net.w1, net.b1));
  out.tokens = add(sem.tokens, linear(hidden, net.w2, net.b2));
  return out;
}

template <typename T>
encoders::TokenGrid<T> concat_variant(const encoders::TokenGrid<T>& sem, const encoders::TokenGrid<T>& geo) {
  check_pair(sem, geo);
  return {ad::concat_rows<T>({sem.tokens, geo.tokens}), sem.view, encoders::TokenKind::kFused};
}

#define GEOFUSE_INSTANTIATE_FUSER(T)                                                                             \
  template class FusionNetwork<T>;                                                                               \
  template encoders::TokenGrid<T> fuse(const encoders::TokenGrid<T>&, const encoders::TokenGrid<T>&,             \
                                       const FusionNetwork<T>&);                                                 \
  template encoders::TokenGrid<T> concat_variant(const encoders::TokenGrid<T>&, const encoders::TokenGrid<T>&);

GEOFUSE_INSTANTIATE_FUSER(float)
GEOFUSE_INSTANTIATE_FUSER(double)

}  // namespace geofuse::geofuser
