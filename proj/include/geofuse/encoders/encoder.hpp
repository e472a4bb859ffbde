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
#include "geofuse/core/image.hpp"
#include "geofuse/core/params.hpp"
#include "geofuse/scenekit/camera.hpp"

namespace geofuse::encoders {

template <typename T>
using Var = ad::Var<T>;
template <typename T>
using Mat = ad::Mat<T>;

struct EncoderConfig {
  int image_size = 32;
  int patch = 8;
  int channels = 3;
  int dim = 64;
  int layers = 4;
  int heads = 4;
  int cond_dim = scenekit::kConditioningSize;

  int grid() const { return image_size / patch; }
  int tokens() const { return grid() * grid(); }
  int patch_inputs() const { return patch * patch * channels; }
  void validate() const;
};

enum class TokenKind { kSemantic, kGeometric, kFused };

template <typename T>
struct TokenGrid {
  Var<T> tokens;  // N x d
  int view = 0;
  TokenKind kind = TokenKind::kSemantic;
};

// Rows are patches in row-major patch order; within a row, pixels row-major
// with channels fastest. `image` is H*W x C.
template <typename T>
Mat<T> patchify(const Mat<T>& image, int height, int width, int patch);
template <typename T>
Mat<T> unpatchify(const Mat<T>& patches, int height, int width, int patch, int channels);

// Patch embedding with a fixed accumulation order (bias, then pixels
// row-major, channels fastest). Exact-zero weight rows therefore leave the
// result bit-identical to an embedding without those channels.
template <typename T>
Var<T> patch_embed(const Var<T>& image, const Var<T>& weight, const Var<T>& bias, int size, int patch);

template <typename T>
struct EncoderBlock {
  Var<T> mod_w, mod_b;  // cond_dim x 6d, 1 x 6d: shift1 scale1 gate1 shift2 scale2 gate2
  Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Var<T> ff1_w, ff1_b, ff2_w, ff2_b;
};

// Micro vision transformer with camera-conditioned AdaLN blocks. The
// modulation maps start at zero so that conditioning is an identity at
// initialisation (gates carry a +1 offset).
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  static Encoder init(const EncoderConfig& config, Rng& rng);

  // image: (size*size) x channels; cond: 1 x cond_dim. Returns N x d tokens.
  Var<T> forward(const Var<T>& image, const Var<T>& cond) const;

  ParamList<T> parameters(const std::string& prefix) const;
  Encoder clone() const;
  const EncoderConfig& config() const { return config_; }
  void set_config(const EncoderConfig& c) { config_ = c; }

  Var<T> patch_w, patch_b, pos;
  std::vector<EncoderBlock<T>> blocks;
  Var<T> final_g, final_b;

 private:
  EncoderConfig config_;
};

template <typename T>
Mat<T> image_matrix(const Image& img);
template <typename T>
Mat<T> conditioning_row(const scenekit::CameraPose& camera);

// Semantic tokens for an RGB view (values in [0,1]).
template <typename T>
TokenGrid<T> encode_semantic(const Image& rgb, const scenekit::CameraPose& camera, const Encoder<T>& encoder,
                             int view = 0);

// Channel switches for the geometry input (ablations zero a group).
struct GeometryChannels {
  bool normal = true;
  bool depth = true;
};

// Stacks (n_x, n_y, n_z, depth / depth_scale) into an H*W x 4 matrix.
template <typename T>
Mat<T> geometry_matrix(const Mat<T>& depth, const Mat<T>& normal, double depth_scale, GeometryChannels channels = {});

template <typename T>
TokenGrid<T> encode_geometry(const Var<T>& geometry, const scenekit::CameraPose& camera, const Encoder<T>& encoder,
                             int view = 0);

// Copies every weight of a 3-channel encoder into a 4-channel one. Patch
// embedding rows for channels 0-2 are copied, channel 3 (depth) rows are zero.
template <typename T>
Encoder<T> init_geoformer_from_semantic(const Encoder<T>& semantic);

// Depth normalisation divisor: radius_hi + sqrt(3).
inline double depth_scale_for(double radius_hi) { return radius_hi + 1.7320508075688772; }

}  // namespace geofuse::encoders
