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

#include <vector>

#include "geofuse/core/autodiff.hpp"

// Differentiable matrix ops over row-major matrices. Rows are tokens,
// samples or pixels; columns are features. Explicitly instantiated for
// float (training) and double (gradient checks).
namespace geofuse::ad {

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// x*w + b, with b a 1 x n row (may be undefined).
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> add_rowvec(const Var<T>& x, const Var<T>& b);

template <typename T> Var<T> silu(const Var<T>& x);
template <typename T> Var<T> gelu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> softplus(const Var<T>& x);
// Subgradient 0 at 0.
template <typename T> Var<T> abs(const Var<T>& x);
template <typename T> Var<T> square(const Var<T>& x);

// Per-row normalisation without affine parameters.
template <typename T> Var<T> layer_norm(const Var<T>& x, T eps = T(1e-6));
// x * gamma + beta with 1 x n gamma/beta.
template <typename T> Var<T> affine_rows(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta);
// x * (1 + scale) + shift with 1 x n shift/scale.
template <typename T> Var<T> modulate(const Var<T>& x, const Var<T>& shift, const Var<T>& scale);
// x + h * (1 + gate) with 1 x n gate.
template <typename T> Var<T> gated_residual(const Var<T>& x, const Var<T>& h, const Var<T>& gate);

// Multi-head scaled dot-product attention; q is n x d, k and v are m x d.
template <typename T> Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads);

template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_cols(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> slice_rows(const Var<T>& a, Eigen::Index start, Eigen::Index count);
template <typename T> Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index count);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
// sum_i w_i * s_i over 1x1 scalars.
template <typename T> Var<T> weighted_sum(const std::vector<Var<T>>& scalars, const std::vector<T>& weights);

}  // namespace geofuse::ad
