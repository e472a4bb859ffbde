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

#include "geofuse/triplane/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "geofuse/core/error.hpp"
#include "geofuse/core/ops.hpp"

namespace geofuse::triplane {

void DecoderConfig::validate() const {
  if (resolution < 2) throw ValidationError("decoder resolution must be >= 2");
  if (dim <= 0 || layers < 0 || heads <= 0 || dim % heads != 0)
    throw ValidationError("decoder width must be positive and divisible by heads");
  if (channels < 0 || field_hidden < 0) throw ValidationError("decoder channel widths must be non-negative");
}

namespace {

template <typename T>
Var<T> dense(Rng& rng, int in, int out) {
  return make_param<T>(normal_init<T>(rng, in, out, 1.0 / std::sqrt(double(in))));
}

template <typename T>
Var<T> zeros(int cols) {
  return make_param<T>(Mat<T>::Zero(1, cols));
}

template <typename T>
Var<T> attend(const Var<T>& x, const Var<T>& kv, const Var<T>& qw, const Var<T>& qb, const Var<T>& kw,
              const Var<T>& kb, const Var<T>& vw, const Var<T>& vb, const Var<T>& ow, const Var<T>& ob, int heads) {
  const Var<T> q = ad::linear(x, qw, qb);
  const Var<T> k = ad::linear(kv, kw, kb);
  const Var<T> v = ad::linear(kv, vw, vb);
  return ad::linear(ad::attention(q, k, v, heads), ow, ob);
}

}  // namespace

template <typename T>
void TriplaneDecoder<T>::init(const DecoderConfig& config, Rng& rng) {
  config.validate();
  config_ = config;
  const int d = config.dim;
  const int n = 3 * config.resolution * config.resolution;
  queries = make_param<T>(normal_init<T>(rng, n, d, 0.5));
  blocks.clear();
  for (int l = 0; l < config.layers; ++l) {
    DecoderBlock<T> b;
    b.cq_w = dense<T>(rng, d, d), b.cq_b = zeros<T>(d);
    b.ck_w = dense<T>(rng, d, d), b.ck_b = zeros<T>(d);
    b.cv_w = dense<T>(rng, d, d), b.cv_b = zeros<T>(d);
    b.co_w = dense<T>(rng, d, d), b.co_b = zeros<T>(d);
    b.sq_w = dense<T>(rng, d, d), b.sq_b = zeros<T>(d);
    b.sk_w = dense<T>(rng, d, d), b.sk_b = zeros<T>(d);
    b.sv_w = dense<T>(rng, d, d), b.sv_b = zeros<T>(d);
    b.so_w = dense<T>(rng, d, d), b.so_b = zeros<T>(d);
    b.ff1_w = dense<T>(rng, d, 4 * d), b.ff1_b = zeros<T>(4 * d);
    b.ff2_w = dense<T>(rng, 4 * d, d), b.ff2_b = zeros<T>(d);
    blocks.push_back(std::move(b));
  }
  out_w = dense<T>(rng, d, config.plane_channels());
  out_b = zeros<T>(config.plane_channels());
  field = FieldMlp<T>::init(config.plane_channels(), config.mlp_hidden(), rng);
}

template <typename T>
Triplane<T> TriplaneDecoder<T>::decode(const std::vector<encoders::TokenGrid<T>>& views) const {
  if (views.empty()) throw ValidationError("decode_triplane needs at least one view");
  std::vector<Var<T>> parts;
  for (const auto& v : views) {
    if (v.tokens.cols() != config_.dim)
      throw ValidationError("decode_triplane: token width " + std::to_string(v.tokens.cols()) + " != " +
                            std::to_string(config_.dim));
    parts.push_back(v.tokens);
  }
  const Var<T> kv = ad::layer_norm(parts.size() == 1 ? parts[0] : ad::concat_rows(parts));
  Var<T> x = queries;
  for (const auto& b : blocks) {
    x = ad::add(x, attend(ad::layer_norm(x), kv, b.cq_w, b.cq_b, b.ck_w, b.ck_b, b.cv_w, b.cv_b, b.co_w, b.co_b,
                          config_.heads));
    const Var<T> xn = ad::layer_norm(x);
    x = ad::add(x, attend(xn, xn, b.sq_w, b.sq_b, b.sk_w, b.sk_b, b.sv_w, b.sv_b, b.so_w, b.so_b, config_.heads));
    const Var<T> f = ad::linear(ad::gelu(ad::linear(ad::layer_norm(x), b.ff1_w, b.ff1_b)), b.ff2_w, b.ff2_b);
    x = ad::add(x, f);
  }
  Triplane<T> tp;
  tp.planes = ad::linear(ad::layer_norm(x), out_w, out_b);
  tp.resolution = config_.resolution;
  tp.channels = config_.plane_channels();
  return tp;
}

template <typename T>
ParamList<T> TriplaneDecoder<T>::parameters(const std::string& prefix) const {
  ParamList<T> ps{{prefix + ".queries", queries}};
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    const std::string p = prefix + ".block" + std::to_string(l);
    ps.insert(ps.end(), {{p + ".cross.q.w", b.cq_w}, {p + ".cross.q.b", b.cq_b}, {p + ".cross.k.w", b.ck_w},
                         {p + ".cross.k.b", b.ck_b}, {p + ".cross.v.w", b.cv_w}, {p + ".cross.v.b", b.cv_b},
                         {p + ".cross.o.w", b.co_w}, {p + ".cross.o.b", b.co_b}, {p + ".self.q.w", b.sq_w},
                         {p + ".self.q.b", b.sq_b}, {p + ".self.k.w", b.sk_w}, {p + ".self.k.b", b.sk_b},
                         {p + ".self.v.w", b.sv_w}, {p + ".self.v.b", b.sv_b}, {p + ".self.o.w", b.so_w},
                         {p + ".self.o.b", b.so_b}, {p + ".ff1.w", b.ff1_w}, {p + ".ff1.b", b.ff1_b},
                         {p + ".ff2.w", b.ff2_w}, {p + ".ff2.b", b.ff2_b}});
  }
  ps.push_back({prefix + ".out.w", out_w});
  ps.push_back({prefix + ".out.b", out_b});
  const auto f = field.parameters(prefix + ".field");
  ps.insert(ps.end(), f.begin(), f.end());
  return ps;
}

template <typename T>
TriplaneDecoder<T> TriplaneDecoder<T>::clone() const {
  TriplaneDecoder c;
  c.config_ = config_;
  c.queries = clone_param(queries);
  for (const auto& b : blocks) {
    c.blocks.push_back({clone_param(b.cq_w), clone_param(b.cq_b), clone_param(b.ck_w), clone_param(b.ck_b),
                        clone_param(b.cv_w), clone_param(b.cv_b), clone_param(b.co_w), clone_param(b.co_b),
                        clone_param(b.sq_w), clone_param(b.sq_b), clone_param(b.sk_w), clone_param(b.sk_b),
                        clone_param(b.sv_w), clone_param(b.sv_b), clone_param(b.so_w), clone_param(b.so_b),
                        clone_param(b.ff1_w), clone_param(b.ff1_b), clone_param(b.ff2_w), clone_param(b.ff2_b)});
  }
  c.out_w = clone_param(out_w);
  c.out_b = clone_param(out_b);
  c.field = field.clone();
  return c;
}

template class TriplaneDecoder<float>;
template class TriplaneDecoder<double>;

}  // namespace geofuse::triplane
