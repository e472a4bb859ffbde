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

#include "geofuse/encoders/encoder.hpp"
#include "geofuse/triplane/field.hpp"

namespace geofuse::triplane {

struct DecoderConfig {
  int resolution = 8;    // R
  int dim = 64;          // token width d
  int layers = 2;        // L_dec
  int heads = 4;
  int channels = 0;      // plane feature width; 0 = dim
  int field_hidden = 0;  // 0 = plane width

  int plane_channels() const { return channels > 0 ? channels : dim; }
  int mlp_hidden() const { return field_hidden > 0 ? field_hidden : plane_channels(); }
  void validate() const;
};

template <typename T>
struct DecoderBlock {
  Var<T> cq_w, cq_b, ck_w, ck_b, cv_w, cv_b, co_w, co_b;  // cross-attention
  Var<T> sq_w, sq_b, sk_w, sk_b, sv_w, sv_b, so_w, so_b;  // self-attention
  Var<T> ff1_w, ff1_b, ff2_w, ff2_b;
};

// 3R^2 learnable query tokens; each block does pre-norm cross-attention to
// the concatenated view tokens, self-attention, then a GELU feed-forward.
// A final norm and linear map give the plane features, written in row order
// XY, XZ, YZ, then plane row, then plane column.
template <typename T>
class TriplaneDecoder {
 public:
  void init(const DecoderConfig& config, Rng& rng);
  const DecoderConfig& config() const { return config_; }

  Triplane<T> decode(const std::vector<encoders::TokenGrid<T>>& views) const;
  ParamList<T> parameters(const std::string& prefix) const;
  TriplaneDecoder clone() const;

  Var<T> queries;
  std::vector<DecoderBlock<T>> blocks;
  Var<T> out_w, out_b;
  FieldMlp<T> field;

 private:
  DecoderConfig config_;
};

}  // namespace geofuse::triplane
