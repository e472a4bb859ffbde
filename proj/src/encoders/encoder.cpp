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

#include "geofuse/encoders/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "geofuse/core/error.hpp"
#include "geofuse/core/flops.hpp"
#include "geofuse/core/ops.hpp"

namespace geofuse::encoders {

void EncoderConfig::validate() const {
  if (patch <= 0 || image_size <= 0 || image_size % patch != 0) {
    throw ValidationError("encoder: image size must be divisible by the patch size");
  }
  if (dim <= 0 || heads <= 0 || dim % heads != 0) throw ValidationError("encoder: heads must divide dim");
  if (channels != 3 && channels != 4) throw ValidationError("encoder: channels must be 3 or 4");
  if (layers < 0) throw ValidationError("encoder: negative layer count");
}

template <typename T>
Mat<T> patchify(const Mat<T>& image, int height, int width, int patch) {
  if (height != width) throw ValidationError("patchify: image must be square");
  if (patch <= 0 || height % patch != 0) throw ValidationError("patchify: size not divisible by patch");
  if (image.rows() != static_cast<Eigen::Index>(height) * width) throw ValidationError("patchify: pixel count");
  const int c = static_cast<int>(image.cols());
  const int g = height / patch;
  Mat<T> out(g * g, patch * patch * c);
  for (int gy = 0; gy < g; ++gy)
    for (int gx = 0; gx < g; ++gx)
      for (int py = 0; py < patch; ++py)
        for (int px = 0; px < patch; ++px)
          for (int ch = 0; ch < c; ++ch)
            out(gy * g + gx, (py * patch + px) * c + ch) = image((gy * patch + py) * width + gx * patch + px, ch);
  return out;
}

template <typename T>
Mat<T> unpatchify(const Mat<T>& patches, int height, int width, int patch, int channels) {
  const int g = height / patch;
  Mat<T> image(static_cast<Eigen::Index>(height) * width, channels);
  for (int gy = 0; gy < g; ++gy)
    for (int gx = 0; gx < g; ++gx)
      for (int py = 0; py < patch; ++py)
        for (int px = 0; px < patch; ++px)
          for (int ch = 0; ch < channels; ++ch)
            image((gy * patch + py) * width + gx * patch + px, ch) =
                patches(gy * g + gx, (py * patch + px) * channels + ch);
  return image;
}

template <typename T>
Var<T> patch_embed(const Var<T>& image, const Var<T>& weight, const Var<T>& bias, int size, int patch) {
  const int c = static_cast<int>(image.cols());
  const int g = size / patch;
  const auto d = weight.cols();
  if (image.rows() != static_cast<Eigen::Index>(size) * size || weight.rows() != patch * patch * c ||
      bias.cols() != d) {
    throw ValidationError("patch_embed: shape mismatch vs encoder parameters");
  }
  flops::add(2ULL * g * g * patch * patch * c * d);
  const Mat<T>& x = image.value();
  const Mat<T>& w = weight.value();
  Mat<T> out(g * g, d);
  for (int gy = 0; gy < g; ++gy) {
    for (int gx = 0; gx < g; ++gx) {
      auto row = out.row(gy * g + gx);
      row = bias.value().row(0);
      for (int py = 0; py < patch; ++py)
        for (int px = 0; px < patch; ++px)
          for (int ch = 0; ch < c; ++ch)
            row += x((gy * patch + py) * size + gx * patch + px, ch) * w.row((py * patch + px) * c + ch);
    }
  }
  return ad::make_node<T>(std::move(out), {image, weight, bias}, [size, patch, g, c](ad::Node<T>& n) {
    auto& pi = *n.parents[0];
    auto& pw = *n.parents[1];
    auto& pb = *n.parents[2];
    if (pb.requires_grad) pb.grad_buffer() += n.grad.colwise().sum();
    for (int gy = 0; gy < g; ++gy) {
      for (int gx = 0; gx < g; ++gx) {
        const auto grow = n.grad.row(gy * g + gx);
        for (int py = 0; py < patch; ++py)
          for (int px = 0; px < patch; ++px)
            for (int ch = 0; ch < c; ++ch) {
              const auto pix = (gy * patch + py) * size + gx * patch + px;
              const auto k = (py * patch + px) * c + ch;
              if (pw.requires_grad) pw.grad_buffer().row(k) += pi.value(pix, ch) * grow;
              if (pi.requires_grad) pi.grad_buffer()(pix, ch) += grow.dot(pw.value.row(k));
            }
      }
    }
  });
}

template <typename T>
Encoder<T> Encoder<T>::init(const EncoderConfig& config, Rng& rng) {
  config.validate();
  Encoder<T> e;
  e.config_ = config;
  const int d = config.dim;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(config.patch_inputs()));
  const double s_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double s_ff = 1.0 / std::sqrt(static_cast<double>(4 * d));
  e.patch_w = make_param(normal_init<T>(rng, config.patch_inputs(), d, s_in));
  e.patch_b = make_param(Mat<T>(Mat<T>::Zero(1, d)));
  e.pos = make_param(normal_init<T>(rng, config.tokens(), d, 0.02));
  for (int l = 0; l < config.layers; ++l) {
    EncoderBlock<T> b;
    b.mod_w = make_param(Mat<T>(Mat<T>::Zero(config.cond_dim, 6 * d)));
    b.mod_b = make_param(Mat<T>(Mat<T>::Zero(1, 6 * d)));
    b.wq = make_param(normal_init<T>(rng, d, d, s_d));
    b.wk = make_param(normal_init<T>(rng, d, d, s_d));
    b.wv = make_param(normal_init<T>(rng, d, d, s_d));
    b.wo = make_param(normal_init<T>(rng, d, d, s_d));
    b.bq = make_param(Mat<T>(Mat<T>::Zero(1, d)));
    b.bk = make_param(Mat<T>(Mat<T>::Zero(1, d)));
    b.bv = make_param(Mat<T>(Mat<T>::Zero(1, d)));
    b.bo = make_param(Mat<T>(Mat<T>::Zero(1, d)));
    b.ff1_w = make_param(normal_init<T>(rng, d, 4 * d, s_d));
    b.ff1_b = make_param(Mat<T>(Mat<T>::Zero(1, 4 * d)));
    b.ff2_w = make_param(normal_init<T>(rng, 4 * d, d, s_ff));
    b.ff2_b = make_param(Mat<T>(Mat<T>::Zero(1, d)));
    e.blocks.push_back(std::move(b));
  }
  e.final_g = make_param(Mat<T>(Mat<T>::Ones(1, d)));
  e.final_b = make_param(Mat<T>(Mat<T>::Zero(1, d)));
  return e;
}

template <typename T>
Var<T> Encoder<T>::forward(const Var<T>& image, const Var<T>& cond) const {
  using namespace ad;
  if (cond.rows() != 1 || cond.cols() != config_.cond_dim) {
    throw ValidationError("encoder: conditioning vector must be 1x" + std::to_string(config_.cond_dim));
  }
  if (image.cols() != config_.channels) {
    throw ValidationError("encoder: expected " + std::to_string(config_.channels) + " input channels, got " +
                          std::to_string(image.cols()));
  }
  const int d = config_.dim;
  Var<T> x = add(patch_embed(image, patch_w, patch_b, config_.image_size, config_.patch), pos);
  for (const auto& b : blocks) {
    const Var<T> mod = linear(cond, b.mod_w, b.mod_b);
    const Var<T> shift1 = slice_cols(mod, 0, d);
    const Var<T> scale1 = slice_cols(mod, d, d);
    const Var<T> gate1 = slice_cols(mod, 2 * d, d);
    const Var<T> shift2 = slice_cols(mod, 3 * d, d);
    const Var<T> scale2 = slice_cols(mod, 4 * d, d);
    const Var<T> gate2 = slice_cols(mod, 5 * d, d);

    Var<T> h = modulate(layer_norm(x), shift1, scale1);
    Var<T> a = attention(linear(h, b.wq, b.bq), linear(h, b.wk, b.bk), linear(h, b.wv, b.bv), config_.heads);
    x = gated_residual(x, linear(a, b.wo, b.bo), gate1);

    h = modulate(layer_norm(x), shift2, scale2);
    Var<T> f = linear(gelu(linear(h, b.ff1_w, b.ff1_b)), b.ff2_w, b.ff2_b);
    x = gated_residual(x, f, gate2);
  }
  return affine_rows(layer_norm(x), final_g, final_b);
}

template <typename T>
ParamList<T> Encoder<T>::parameters(const std::string& prefix) const {
  ParamList<T> out{{prefix + ".patch.w", patch_w}, {prefix + ".patch.b", patch_b}, {prefix + ".pos", pos}};
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    const std::string p = prefix + ".block" + std::to_string(l);
    out.push_back({p + ".mod.w", b.mod_w});
    out.push_back({p + ".mod.b", b.mod_b});
    out.push_back({p + ".attn.q.w", b.wq});
    out.push_back({p + ".attn.q.b", b.bq});
    out.push_back({p + ".attn.k.w", b.wk});
    out.push_back({p + ".attn.k.b", b.bk});
    out.push_back({p + ".attn.v.w", b.wv});
    out.push_back({p + ".attn.v.b", b.bv});
    out.push_back({p + ".attn.o.w", b.wo});
    out.push_back({p + ".attn.o.b", b.bo});
    out.push_back({p + ".ff1.w", b.ff1_w});
    out.push_back({p + ".ff1.b", b.ff1_b});
    out.push_back({p + ".ff2.w", b.ff2_w});
    out.push_back({p + ".ff2.b", b.ff2_b});
  }
  out.push_back({prefix + ".final.g", final_g});
  out.push_back({prefix + ".final.b", final_b});
  return out;
}

template <typename T>
Encoder<T> Encoder<T>::clone() const {
  Encoder<T> e;
  e.config_ = config_;
  e.patch_w = clone_param(patch_w);
  e.patch_b = clone_param(patch_b);
  e.pos = clone_param(pos);
  for (const auto& b : blocks) {
    EncoderBlock<T> c;
    c.mod_w = clone_param(b.mod_w);
    c.mod_b = clone_param(b.mod_b);
    c.wq = clone_param(b.wq);
    c.bq = clone_param(b.bq);
    c.wk = clone_param(b.wk);
    c.bk = clone_param(b.bk);
    c.wv = clone_param(b.wv);
    c.bv = clone_param(b.bv);
    c.wo = clone_param(b.wo);
    c.bo = clone_param(b.bo);
    c.ff1_w = clone_param(b.ff1_w);
    c.ff1_b = clone_param(b.ff1_b);
    c.ff2_w = clone_param(b.ff2_w);
    c.ff2_b = clone_param(b.ff2_b);
    e.blocks.push_back(std::move(c));
  }
  e.final_g = clone_param(final_g);
  e.final_b = clone_param(final_b);
  return e;
}

template <typename T>
Mat<T> image_matrix(const Image& img) {
  Mat<T> m(static_cast<Eigen::Index>(img.pixel_count()), img.channels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(img.data[i]);
  return m;
}

template <typename T>
Mat<T> conditioning_row(const scenekit::CameraPose& camera) {
  const auto c = camera.conditioning();
  Mat<T> m(1, scenekit::kConditioningSize);
  for (int i = 0; i < scenekit::kConditioningSize; ++i) m(0, i) = static_cast<T>(c[i]);
  return m;
}

template <typename T>
TokenGrid<T> encode_semantic(const Image& rgb, const scenekit::CameraPose& camera, const Encoder<T>& encoder,
                             int view) {
  if (encoder.config().channels != 3) throw ValidationError("encode_semantic: needs a 3-channel encoder");
  if (rgb.channels != 3 || rgb.height != encoder.config().image_size || rgb.width != encoder.config().image_size) {
    throw ValidationError("encode_semantic: image shape does not match the encoder");
  }
  TokenGrid<T> out;
  out.tokens = encoder.forward(ad::constant(image_matrix<T>(rgb)), ad::constant(conditioning_row<T>(camera)));
  out.view = view;
  out.kind = TokenKind::kSemantic;
  return out;
}

template <typename T>
Mat<T> geometry_matrix(const Mat<T>& depth, const Mat<T>& normal, double depth_scale, GeometryChannels channels) {
  if (depth.cols() != 1 || normal.cols() != 3 || depth.rows() != normal.rows()) {
    throw ValidationError("geometry_matrix: expected H*W x 1 depth and H*W x 3 normal");
  }
  if (!depth.allFinite() || !normal.allFinite()) throw ValidationError("geometry_matrix: non-finite geometry input");
  Mat<T> g(depth.rows(), 4);
  g.leftCols(3) = channels.normal ? normal : Mat<T>(Mat<T>::Zero(normal.rows(), 3));
  g.col(3) = channels.depth ? Mat<T>(depth / static_cast<T>(depth_scale)) : Mat<T>(Mat<T>::Zero(depth.rows(), 1));
  return g;
}

template <typename T>
TokenGrid<T> encode_geometry(const Var<T>& geometry, const scenekit::CameraPose& camera, const Encoder<T>& encoder,
                             int view) {
  if (encoder.config().channels != 4) throw ValidationError("encode_geometry: needs a 4-channel encoder");
  if (!geometry.value().allFinite()) throw ValidationError("encode_geometry: non-finite input");
  TokenGrid<T> out;
  out.tokens = encoder.forward(geometry, ad::constant(conditioning_row<T>(camera)));
  out.view = view;
  out.kind = TokenKind::kGeometric;
  return out;
}

template <typename T>
Encoder<T> init_geoformer_from_semantic(const Encoder<T>& semantic) {
  if (semantic.config().channels != 3) throw ValidationError("init_geoformer_from_semantic: source must be RGB");
  Encoder<T> geo = semantic.clone();
  EncoderConfig cfg = semantic.config();
  cfg.channels = 4;
  const int pixels = cfg.patch * cfg.patch;
  const Mat<T>& src = semantic.patch_w.value();
  Mat<T> w = Mat<T>::Zero(pixels * 4, cfg.dim);
  for (int p = 0; p < pixels; ++p)
    for (int c = 0; c < 3; ++c) w.row(p * 4 + c) = src.row(p * 3 + c);
  geo.patch_w = make_param(std::move(w));
  geo.set_config(cfg);
  return geo;
}

#define GEOFUSE_INSTANTIATE_ENCODER(T)                                                                      \
  template class Encoder<T>;                                                                               \
  template Mat<T> patchify(const Mat<T>&, int, int, int);                                                  \
  template Mat<T> unpatchify(const Mat<T>&, int, int, int, int);                                           \
  template Var<T> patch_embed(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                      \
  template Mat<T> image_matrix(const Image&);                                                              \
  template Mat<T> conditioning_row(const scenekit::CameraPose&);                                           \
  template TokenGrid<T> encode_semantic(const Image&, const scenekit::CameraPose&, const Encoder<T>&, int); \
  template Mat<T> geometry_matrix(const Mat<T>&, const Mat<T>&, double, GeometryChannels);                 \
  template TokenGrid<T> encode_geometry(const Var<T>&, const scenekit::CameraPose&, const Encoder<T>&, int); \
  template Encoder<T> init_geoformer_from_semantic(const Encoder<T>&);

GEOFUSE_INSTANTIATE_ENCODER(float)
GEOFUSE_INSTANTIATE_ENCODER(double)

}  // namespace geofuse::encoders
