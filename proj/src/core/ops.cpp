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

#include "geofuse/core/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "geofuse/core/flops.hpp"

namespace geofuse::ad {

namespace {

template <typename T>
void check_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

template <typename T>
void check_rowvec(const Var<T>& x, const Var<T>& v, const char* op) {
  if (v.rows() != 1 || v.cols() != x.cols()) {
    throw std::invalid_argument(std::string(op) + ": expected 1x" + std::to_string(x.cols()) + " row vector");
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
T softplus_scalar(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  flops::add(2ULL * a.rows() * a.cols() * b.cols());
  Mat<T> out = a.value() * b.value();
  return make_node<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) pa.grad_buffer().noalias() += n.grad * pb.value.transpose();
    if (pb.requires_grad) pb.grad_buffer().noalias() += pa.value.transpose() * n.grad;
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.cols() != w.rows()) {
    throw std::invalid_argument("linear: input width " + std::to_string(x.cols()) + " vs weight rows " +
                                std::to_string(w.rows()));
  }
  flops::add(2ULL * x.rows() * x.cols() * w.cols());
  Mat<T> out(x.rows(), w.cols());
  out.noalias() = x.value() * w.value();
  if (b.defined()) {
    check_rowvec(Var<T>(out), b, "linear");
    out.rowwise() += b.value().row(0);
  }
  return make_node<T>(std::move(out), {x, w, b}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    auto& pw = *n.parents[1];
    auto& pb = *n.parents[2];
    if (px.requires_grad) px.grad_buffer().noalias() += n.grad * pw.value.transpose();
    if (pw.requires_grad) pw.grad_buffer().noalias() += px.value.transpose() * n.grad;
    if (pb.requires_grad) pb.grad_buffer() += n.grad.colwise().sum();
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check_same(a, b, "add");
  return make_node<T>(a.value() + b.value(), {a, b}, [](Node<T>& n) {
    for (auto& p : n.parents)
      if (p->requires_grad) p->grad_buffer() += n.grad;
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check_same(a, b, "sub");
  return make_node<T>(a.value() - b.value(), {a, b}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad_buffer() += n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->grad_buffer() -= n.grad;
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check_same(a, b, "mul");
  return make_node<T>(a.value().cwiseProduct(b.value()), {a, b}, [](Node<T>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) pa.grad_buffer() += n.grad.cwiseProduct(pb.value);
    if (pb.requires_grad) pb.grad_buffer() += n.grad.cwiseProduct(pa.value);
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return make_node<T>(a.value() * s, {a}, [s](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad_buffer() += n.grad * s;
  });
}

template <typename T>
Var<T> add_rowvec(const Var<T>& x, const Var<T>& b) {
  check_rowvec(x, b, "add_rowvec");
  Mat<T> out = x.value();
  out.rowwise() += b.value().row(0);
  return make_node<T>(std::move(out), {x, b}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad_buffer() += n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->grad_buffer() += n.grad.colwise().sum();
  });
}

template <typename T>
Var<T> silu(const Var<T>& x) {
  Mat<T> out = x.value().unaryExpr([](T v) { return v * sigmoid_scalar(v); });
  return make_node<T>(std::move(out), {x}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    px.grad_buffer() += n.grad.binaryExpr(px.value, [](T g, T v) {
      const T s = sigmoid_scalar(v);
      return g * (s * (T(1) + v * (T(1) - s)));
    });
  });
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  // tanh approximation
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  Mat<T> out = x.value().unaryExpr([](T v) {
    const T u = T(kC) * (v + T(kA) * v * v * v);
    return T(0.5) * v * (T(1) + std::tanh(u));
  });
  return make_node<T>(std::move(out), {x}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    px.grad_buffer() += n.grad.binaryExpr(px.value, [](T g, T v) {
      const T u = T(kC) * (v + T(kA) * v * v * v);
      const T th = std::tanh(u);
      const T du = T(kC) * (T(1) + T(3 * kA) * v * v);
      return g * (T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du);
    });
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Mat<T> out = x.value().unaryExpr([](T v) { return sigmoid_scalar(v); });
  Mat<T> saved = out;
  return make_node<T>(std::move(out), {x}, [saved = std::move(saved)](Node<T>& n) {
    n.parents[0]->grad_buffer() +=
        n.grad.binaryExpr(saved, [](T g, T s) { return g * s * (T(1) - s); });
  });
}

template <typename T>
Var<T> softplus(const Var<T>& x) {
  Mat<T> out = x.value().unaryExpr([](T v) { return softplus_scalar(v); });
  return make_node<T>(std::move(out), {x}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    px.grad_buffer() += n.grad.binaryExpr(px.value, [](T g, T v) { return g * sigmoid_scalar(v); });
  });
}

template <typename T>
Var<T> abs(const Var<T>& x) {
  return make_node<T>(x.value().cwiseAbs(), {x}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    px.grad_buffer() += n.grad.binaryExpr(px.value, [](T g, T v) { return v > T(0) ? g : (v < T(0) ? -g : T(0)); });
  });
}

template <typename T>
Var<T> square(const Var<T>& x) {
  return make_node<T>(x.value().cwiseAbs2(), {x}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    px.grad_buffer() += T(2) * n.grad.cwiseProduct(px.value);
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, T eps) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  Mat<T> xhat(rows, cols);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = x.value().row(r);
    const T mu = row.mean();
    const T var = (row.array() - mu).square().mean();
    inv_std(r) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (row.array() - mu) * inv_std(r);
  }
  Mat<T> saved = xhat;
  return make_node<T>(std::move(xhat), {x},
                      [xhat = std::move(saved), inv_std = std::move(inv_std)](Node<T>& n) {
                        auto& g = n.parents[0]->grad_buffer();
                        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                          const auto gr = n.grad.row(r).array();
                          const auto xr = xhat.row(r).array();
                          const T mg = gr.mean();
                          const T mgx = (gr * xr).mean();
                          g.row(r).array() += inv_std(r) * (gr - mg - xr * mgx);
                        }
                      });
}

template <typename T>
Var<T> affine_rows(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta) {
  check_rowvec(x, gamma, "affine_rows");
  check_rowvec(x, beta, "affine_rows");
  Mat<T> out = x.value().array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return make_node<T>(std::move(out), {x, gamma, beta}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    auto& pg = *n.parents[1];
    auto& pb = *n.parents[2];
    if (px.requires_grad) px.grad_buffer().array() += n.grad.array().rowwise() * pg.value.row(0).array();
    if (pg.requires_grad) pg.grad_buffer() += n.grad.cwiseProduct(px.value).colwise().sum();
    if (pb.requires_grad) pb.grad_buffer() += n.grad.colwise().sum();
  });
}

template <typename T>
Var<T> modulate(const Var<T>& x, const Var<T>& shift, const Var<T>& scale_v) {
  check_rowvec(x, shift, "modulate");
  check_rowvec(x, scale_v, "modulate");
  Mat<T> out(x.rows(), x.cols());
  const auto one_plus = (scale_v.value().row(0).array() + T(1)).eval();
  out.array() = x.value().array().rowwise() * one_plus;
  out.rowwise() += shift.value().row(0);
  return make_node<T>(std::move(out), {x, shift, scale_v}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    auto& ps = *n.parents[1];
    auto& pc = *n.parents[2];
    if (px.requires_grad)
      px.grad_buffer().array() += n.grad.array().rowwise() * (pc.value.row(0).array() + T(1));
    if (ps.requires_grad) ps.grad_buffer() += n.grad.colwise().sum();
    if (pc.requires_grad) pc.grad_buffer() += n.grad.cwiseProduct(px.value).colwise().sum();
  });
}

template <typename T>
Var<T> gated_residual(const Var<T>& x, const Var<T>& h, const Var<T>& gate) {
  check_same(x, h, "gated_residual");
  check_rowvec(x, gate, "gated_residual");
  Mat<T> out = x.value();
  out.array() += h.value().array().rowwise() * (gate.value().row(0).array() + T(1));
  return make_node<T>(std::move(out), {x, h, gate}, [](Node<T>& n) {
    auto& px = *n.parents[0];
    auto& ph = *n.parents[1];
    auto& pg = *n.parents[2];
    if (px.requires_grad) px.grad_buffer() += n.grad;
    if (ph.requires_grad)
      ph.grad_buffer().array() += n.grad.array().rowwise() * (pg.value.row(0).array() + T(1));
    if (pg.requires_grad) pg.grad_buffer() += n.grad.cwiseProduct(ph.value).colwise().sum();
  });
}

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads) {
  const auto n = q.rows();
  const auto m = k.rows();
  const auto d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != m) throw std::invalid_argument("attention: shape mismatch");
  if (heads <= 0 || d % heads != 0) throw std::invalid_argument("attention: heads must divide width");
  const auto dh = d / heads;
  const T inv = T(1) / std::sqrt(static_cast<T>(dh));
  flops::add(4ULL * n * m * d);
  Mat<T> out(n, d);
  std::vector<Mat<T>> probs(heads);
  for (int h = 0; h < heads; ++h) {
    Mat<T> s = (q.value().middleCols(h * dh, dh) * k.value().middleCols(h * dh, dh).transpose()) * inv;
    for (Eigen::Index r = 0; r < n; ++r) {
      const T mx = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - mx).exp();
      s.row(r) /= s.row(r).sum();
    }
    out.middleCols(h * dh, dh).noalias() = s * v.value().middleCols(h * dh, dh);
    probs[h] = std::move(s);
  }
  return make_node<T>(std::move(out), {q, k, v}, [probs = std::move(probs), heads, dh, inv](Node<T>& nd) {
    auto& pq = *nd.parents[0];
    auto& pk = *nd.parents[1];
    auto& pv = *nd.parents[2];
    for (int h = 0; h < heads; ++h) {
      const auto g = nd.grad.middleCols(h * dh, dh);
      const Mat<T>& p = probs[h];
      if (pv.requires_grad) pv.grad_buffer().middleCols(h * dh, dh).noalias() += p.transpose() * g;
      if (!pq.requires_grad && !pk.requires_grad) continue;
      Mat<T> dp = g * pv.value.middleCols(h * dh, dh).transpose();
      for (Eigen::Index r = 0; r < dp.rows(); ++r) {
        const T dot = dp.row(r).dot(p.row(r));
        dp.row(r) = p.row(r).cwiseProduct((dp.row(r).array() - dot).matrix());
      }
      if (pq.requires_grad)
        pq.grad_buffer().middleCols(h * dh, dh).noalias() += (dp * pk.value.middleCols(h * dh, dh)) * inv;
      if (pk.requires_grad)
        pk.grad_buffer().middleCols(h * dh, dh).noalias() +=
            (dp.transpose() * pq.value.middleCols(h * dh, dh)) * inv;
    }
  });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  Eigen::Index rows = 0;
  const auto cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: width mismatch");
    rows += p.rows();
  }
  Mat<T> out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    offsets.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_node<T>(std::move(out), parts, [offsets = std::move(offsets)](Node<T>& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = *n.parents[i];
      if (p.requires_grad) p.grad_buffer() += n.grad.middleRows(offsets[i], p.value.rows());
    }
  });
}

template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Mat<T> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  const auto ca = a.cols();
  return make_node<T>(std::move(out), {a, b}, [ca](Node<T>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) pa.grad_buffer() += n.grad.leftCols(ca);
    if (pb.requires_grad) pb.grad_buffer() += n.grad.rightCols(n.grad.cols() - ca);
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::invalid_argument("slice_rows: out of range");
  return make_node<T>(a.value().middleRows(start, count), {a}, [start, count](Node<T>& n) {
    n.parents[0]->grad_buffer().middleRows(start, count) += n.grad;
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  return make_node<T>(a.value().middleCols(start, count), {a}, [start, count](Node<T>& n) {
    n.parents[0]->grad_buffer().middleCols(start, count) += n.grad;
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Mat<T> out(1, 1);
  out(0, 0) = a.value().sum();
  return make_node<T>(std::move(out), {a}, [](Node<T>& n) {
    n.parents[0]->grad_buffer().array() += n.grad(0, 0);
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const T inv = T(1) / static_cast<T>(a.value().size());
  Mat<T> out(1, 1);
  out(0, 0) = a.value().sum() * inv;
  return make_node<T>(std::move(out), {a}, [inv](Node<T>& n) {
    n.parents[0]->grad_buffer().array() += n.grad(0, 0) * inv;
  });
}

template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& scalars, const std::vector<T>& weights) {
  if (scalars.size() != weights.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  Mat<T> out(1, 1);
  out(0, 0) = T(0);
  for (std::size_t i = 0; i < scalars.size(); ++i) out(0, 0) += weights[i] * scalars[i].item();
  return make_node<T>(std::move(out), scalars, [weights](Node<T>& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      if (n.parents[i]->requires_grad) n.parents[i]->grad_buffer()(0, 0) += weights[i] * n.grad(0, 0);
    }
  });
}

#define GEOFUSE_INSTANTIATE_OPS(T)                                                              \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                          \
  template Var<T> add(const Var<T>&, const Var<T>&);                                            \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                            \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                            \
  template Var<T> scale(const Var<T>&, T);                                                      \
  template Var<T> add_rowvec(const Var<T>&, const Var<T>&);                                     \
  template Var<T> silu(const Var<T>&);                                                          \
  template Var<T> gelu(const Var<T>&);                                                          \
  template Var<T> sigmoid(const Var<T>&);                                                       \
  template Var<T> softplus(const Var<T>&);                                                      \
  template Var<T> abs(const Var<T>&);                                                           \
  template Var<T> square(const Var<T>&);                                                        \
  template Var<T> layer_norm(const Var<T>&, T);                                                 \
  template Var<T> affine_rows(const Var<T>&, const Var<T>&, const Var<T>&);                     \
  template Var<T> modulate(const Var<T>&, const Var<T>&, const Var<T>&);                        \
  template Var<T> gated_residual(const Var<T>&, const Var<T>&, const Var<T>&);                  \
  template Var<T> attention(const Var<T>&, const Var<T>&, const Var<T>&, int);                  \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                                      \
  template Var<T> concat_cols(const Var<T>&, const Var<T>&);                                    \
  template Var<T> slice_rows(const Var<T>&, Eigen::Index, Eigen::Index);                        \
  template Var<T> slice_cols(const Var<T>&, Eigen::Index, Eigen::Index);                        \
  template Var<T> sum(const Var<T>&);                                                           \
  template Var<T> mean(const Var<T>&);                                                          \
  template Var<T> weighted_sum(const std::vector<Var<T>>&, const std::vector<T>&);

GEOFUSE_INSTANTIATE_OPS(float)
GEOFUSE_INSTANTIATE_OPS(double)

}  // namespace geofuse::ad
