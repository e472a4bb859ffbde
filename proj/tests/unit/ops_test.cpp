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

#include <gtest/gtest.h>

#include "geofuse/core/ops.hpp"
#include "testing/gradcheck.hpp"

namespace geofuse::ad {
namespace {

using testing::MatD;
using testing::numeric_gradient;
using testing::random_matrix;
using testing::relative_error;

// Checks d(sum(out * probe))/d(input) for every input against central
// differences.
void check_op(const std::function<Var<double>(const std::vector<Var<double>>&)>& op, std::vector<MatD> inputs,
              double tol = 1e-6) {
  Rng rng(7);
  std::vector<Var<double>> vars;
  for (auto& m : inputs) vars.emplace_back(m, true);
  Var<double> out = op(vars);
  const MatD probe = random_matrix(rng, out.rows(), out.cols());
  backward(sum(mul(out, Var<double>(probe))));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&]() {
      std::vector<Var<double>> vs;
      for (auto& m : inputs) vs.emplace_back(m, false);
      return (op(vs).value().cwiseProduct(probe)).sum();
    };
    const MatD num = numeric_gradient(f, inputs[i]);
    ASSERT_TRUE(vars[i].has_grad()) << "input " << i;
    EXPECT_LT(relative_error(vars[i].grad(), num), tol) << "input " << i;
  }
}

TEST(Ops, LinearGradient) {
  Rng rng(1);
  check_op([](const auto& v) { return linear(v[0], v[1], v[2]); },
           {random_matrix(rng, 5, 4), random_matrix(rng, 4, 3), random_matrix(rng, 1, 3)});
}

TEST(Ops, ElementwiseGradients) {
  Rng rng(2);
  check_op([](const auto& v) { return silu(v[0]); }, {random_matrix(rng, 3, 4, 2.0)});
  check_op([](const auto& v) { return gelu(v[0]); }, {random_matrix(rng, 3, 4, 2.0)});
  check_op([](const auto& v) { return sigmoid(v[0]); }, {random_matrix(rng, 3, 4, 2.0)});
  check_op([](const auto& v) { return softplus(v[0]); }, {random_matrix(rng, 3, 4, 2.0)});
  check_op([](const auto& v) { return ad::abs(v[0]); }, {random_matrix(rng, 3, 4, 2.0)});
  check_op([](const auto& v) { return square(v[0]); }, {random_matrix(rng, 3, 4, 2.0)});
  check_op([](const auto& v) { return mul(v[0], v[1]); }, {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)});
  check_op([](const auto& v) { return sub(v[0], scale(v[1], 0.5)); },
           {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)});
}

TEST(Ops, NormalisationAndModulationGradients) {
  Rng rng(3);
  check_op([](const auto& v) { return layer_norm(v[0]); }, {random_matrix(rng, 4, 6)});
  check_op([](const auto& v) { return affine_rows(v[0], v[1], v[2]); },
           {random_matrix(rng, 4, 6), random_matrix(rng, 1, 6), random_matrix(rng, 1, 6)});
  check_op([](const auto& v) { return modulate(v[0], v[1], v[2]); },
           {random_matrix(rng, 4, 6), random_matrix(rng, 1, 6), random_matrix(rng, 1, 6)});
  check_op([](const auto& v) { return gated_residual(v[0], v[1], v[2]); },
           {random_matrix(rng, 4, 6), random_matrix(rng, 4, 6), random_matrix(rng, 1, 6)});
}

TEST(Ops, AttentionGradient) {
  Rng rng(4);
  check_op([](const auto& v) { return attention(v[0], v[1], v[2], 2); },
           {random_matrix(rng, 3, 4), random_matrix(rng, 5, 4), random_matrix(rng, 5, 4)});
}

TEST(Ops, StructuralGradients) {
  Rng rng(5);
  check_op([](const auto& v) { return concat_rows<double>({v[0], v[1]}); },
           {random_matrix(rng, 2, 3), random_matrix(rng, 4, 3)});
  check_op([](const auto& v) { return concat_cols(v[0], v[1]); },
           {random_matrix(rng, 2, 3), random_matrix(rng, 2, 5)});
  check_op([](const auto& v) { return slice_cols(slice_rows(v[0], 1, 2), 1, 3); }, {random_matrix(rng, 4, 5)});
  check_op([](const auto& v) { return weighted_sum<double>({mean(v[0]), sum(v[1])}, {2.0, 0.5}); },
           {random_matrix(rng, 2, 3), random_matrix(rng, 3, 3)});
}

TEST(Ops, AttentionRowsAreConvexCombinations) {
  // With identical value rows the output must equal that row.
  MatD q = MatD::Random(3, 4);
  MatD k = MatD::Random(6, 4);
  MatD v(6, 4);
  for (int r = 0; r < 6; ++r) v.row(r) << 1, 2, 3, 4;
  auto out = attention(Var<double>(q), Var<double>(k), Var<double>(v), 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(out.value()(r, c), c + 1.0, 1e-12);
}

TEST(Ops, FrozenInputsRecordNoGraph) {
  Var<float> w(Mat<float>::Ones(2, 2), false);
  Var<float> x(Mat<float>::Ones(3, 2), false);
  auto y = linear(x, w, Var<float>());
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->parents.empty());
}

TEST(Ops, ShapeMismatchThrows) {
  Var<double> a(MatD::Zero(2, 3));
  Var<double> b(MatD::Zero(3, 2));
  EXPECT_THROW(add(a, b), std::invalid_argument);
  EXPECT_THROW(linear(a, a, Var<double>()), std::invalid_argument);
  EXPECT_THROW(attention(a, a, a, 2), std::invalid_argument);
}

}  // namespace
}  // namespace geofuse::ad
