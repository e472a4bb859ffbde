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

#include <cmath>

#include "geofuse/core/error.hpp"
#include "geofuse/core/ops.hpp"
#include "geofuse/geofuser/fuser.hpp"
#include "testing/gradcheck.hpp"

namespace geofuse {
namespace {

using geofuser::FusionMode;
using geofuser::FusionNetwork;
using MatD = ad::Mat<double>;
using VarD = ad::Var<double>;

encoders::TokenGrid<double> grid(const MatD& m, int view, encoders::TokenKind kind, bool grad = false) {
  return {VarD(m, grad), view, kind};
}

TEST(Fuser, FreshNetworkIsIdentity) {
  Rng rng(1);
  FusionNetwork<float> net(64, 0, FusionMode::kResidual, rng);
  EXPECT_EQ(net.hidden(), 64);
  EXPECT_TRUE((net.w2.value().array() == 0.0f).all());
  EXPECT_TRUE((net.b2.value().array() == 0.0f).all());
  for (int i = 0; i < 20; ++i) {
    const ad::Mat<float> s = ad::Mat<float>::Random(16, 64) * 10.0f;
    const ad::Mat<float> g = ad::Mat<float>::Random(16, 64) * 10.0f;
    const auto out = geofuser::fuse<float>({ad::Var<float>(s), 0, encoders::TokenKind::kSemantic},
                                           {ad::Var<float>(g), 0, encoders::TokenKind::kGeometric}, net);
    ASSERT_EQ(out.tokens.value(), s);
    EXPECT_EQ(out.kind, encoders::TokenKind::kFused);
  }
}

TEST(Fuser, ScalarOracle) {
  Rng rng(2);
  FusionNetwork<double> net(1, 1, FusionMode::kResidual, rng);
  net.w1.mutable_value() << 1.0, 1.0;
  net.b1.mutable_value() << 0.0;
  net.w2.mutable_value() << 0.5;
  net.b2.mutable_value() << 0.0;
  MatD s(1, 1), g(1, 1);
  s << 1.0;
  g << 2.0;
  const auto out = geofuser::fuse<double>(grid(s, 0, encoders::TokenKind::kSemantic),
                                          grid(g, 0, encoders::TokenKind::kGeometric), net);
  const double sig3 = 1.0 / (1.0 + std::exp(-3.0));
  EXPECT_NEAR(out.tokens.item(), 1.0 + 0.5 * 3.0 * sig3, 1e-12);
}

TEST(Fuser, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  FusionNetwork<double> net(4, 5, FusionMode::kResidual, rng);
  net.w2.mutable_value() = testing::random_matrix(rng, 5, 4, 0.5);
  net.b2.mutable_value() = testing::random_matrix(rng, 1, 4, 0.5);
  MatD s = testing::random_matrix(rng, 3, 4);
  MatD g = testing::random_matrix(rng, 3, 4);
  const MatD w = testing::random_matrix(rng, 3, 4);
  auto f = [&] {
    return geofuser::fuse<double>(grid(s, 0, encoders::TokenKind::kSemantic),
                                  grid(g, 0, encoders::TokenKind::kGeometric), net)
        .tokens.value()
        .cwiseProduct(w)
        .sum();
  };
  const auto sv = grid(s, 0, encoders::TokenKind::kSemantic, true);
  const auto gv = grid(g, 0, encoders::TokenKind::kGeometric, true);
  ad::backward(ad::sum(ad::mul(geofuser::fuse<double>(sv, gv, net).tokens, ad::constant(w))));
  EXPECT_LT(testing::relative_error(sv.tokens.grad(), testing::numeric_gradient(f, s)), 1e-4);
  EXPECT_LT(testing::relative_error(gv.tokens.grad(), testing::numeric_gradient(f, g)), 1e-4);
  EXPECT_GT(gv.tokens.grad().norm(), 0.0);
  for (const auto& p : net.parameters("fuser")) {
    auto& value = const_cast<VarD&>(p.var).mutable_value();
    EXPECT_LT(testing::relative_error(p.var.grad(), testing::numeric_gradient(f, value)), 1e-4) << p.name;
  }
}

TEST(Fuser, ZeroInitStillPassesGradientToSecondLayer) {
  Rng rng(4);
  FusionNetwork<double> net(4, 4, FusionMode::kResidual, rng);
  const auto sv = grid(testing::random_matrix(rng, 3, 4), 0, encoders::TokenKind::kSemantic);
  const auto gv = grid(testing::random_matrix(rng, 3, 4), 0, encoders::TokenKind::kGeometric);
  ad::backward(ad::sum(geofuser::fuse<double>(sv, gv, net).tokens));
  EXPECT_GT(net.w2.grad().norm(), 0.0);
  EXPECT_GT(net.b2.grad().norm(), 0.0);
}

TEST(Fuser, DisabledModePassesSemanticThrough) {
  Rng rng(5);
  FusionNetwork<double> net(4, 4, FusionMode::kDisabled, rng);
  net.w2.mutable_value() = testing::random_matrix(rng, 4, 4);
  const MatD s = testing::random_matrix(rng, 2, 4);
  const auto out = geofuser::fuse<double>(grid(s, 1, encoders::TokenKind::kSemantic),
                                          grid(testing::random_matrix(rng, 2, 4), 1, encoders::TokenKind::kGeometric),
                                          net);
  EXPECT_EQ(out.tokens.value(), s);
  EXPECT_EQ(out.view, 1);
}

TEST(Fuser, RejectsMismatches) {
  Rng rng(6);
  FusionNetwork<double> net(4, 4, FusionMode::kResidual, rng);
  const auto a = grid(MatD::Zero(16, 4), 0, encoders::TokenKind::kSemantic);
  EXPECT_THROW(geofuser::fuse<double>(a, grid(MatD::Zero(15, 4), 0, encoders::TokenKind::kGeometric), net),
               ValidationError);
  EXPECT_THROW(geofuser::fuse<double>(a, grid(MatD::Zero(16, 4), 1, encoders::TokenKind::kGeometric), net),
               ValidationError);
  EXPECT_THROW(geofuser::fuse<double>(a, grid(MatD::Zero(16, 5), 0, encoders::TokenKind::kGeometric), net),
               ValidationError);
}

TEST(TokenConcat, DoublesTokensAndKeepsSemanticFirst) {
  Rng rng(7);
  const MatD s = testing::random_matrix(rng, 16, 8);
  const MatD g = testing::random_matrix(rng, 16, 8);
  const auto out = geofuser::concat_variant<double>(grid(s, 0, encoders::TokenKind::kSemantic),
                                                    grid(g, 0, encoders::TokenKind::kGeometric));
  ASSERT_EQ(out.tokens.rows(), 32);
  EXPECT_EQ(MatD(out.tokens.value().topRows(16)), s);
  EXPECT_EQ(MatD(out.tokens.value().bottomRows(16)), g);

  FusionNetwork<double> net(8, 8, FusionMode::kTokenConcat, rng);
  const auto via_fuse = geofuser::fuse<double>(grid(s, 0, encoders::TokenKind::kSemantic),
                                               grid(g, 0, encoders::TokenKind::kGeometric), net);
  EXPECT_EQ(via_fuse.tokens.value(), out.tokens.value());
}

// Brute-force single-head attention with explicit loops.
MatD loop_attention(const MatD& q, const MatD& k, const MatD& v) {
  MatD out = MatD::Zero(q.rows(), v.cols());
  for (int i = 0; i < q.rows(); ++i) {
    std::vector<double> w(k.rows());
    double z = 0;
    for (int j = 0; j < k.rows(); ++j) {
      double s = 0;
      for (int t = 0; t < q.cols(); ++t) s += q(i, t) * k(j, t);
      z += (w[j] = std::exp(s / std::sqrt(double(q.cols()))));
    }
    for (int j = 0; j < k.rows(); ++j)
      for (int t = 0; t < v.cols(); ++t) out(i, t) += w[j] / z * v(j, t);
  }
  return out;
}

TEST(TokenConcat, DuplicatedTokensLeaveAttentionUnchanged) {
  Rng rng(8);
  const MatD s = testing::random_matrix(rng, 4, 4);
  const MatD q = testing::random_matrix(rng, 3, 4);
  const auto cat = geofuser::concat_variant<double>(grid(s, 0, encoders::TokenKind::kSemantic),
                                                    grid(s, 0, encoders::TokenKind::kGeometric));
  const MatD kv = cat.tokens.value();
  const MatD over_cat = loop_attention(q, kv, kv);
  const MatD over_sem = loop_attention(q, s, s);
  EXPECT_LT((over_cat - over_sem).cwiseAbs().maxCoeff(), 1e-12);
  const MatD op = ad::attention(ad::constant(q), ad::constant(kv), ad::constant(kv), 1).value();
  EXPECT_LT((op - over_sem).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace geofuse
