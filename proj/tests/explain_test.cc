//
// Copyright 2026 The DistillEdge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "distilledge/explain.hpp"

#include <cmath>

#include "distilledge/errors.hpp"
#include "gtest/gtest.h"

namespace distilledge {
namespace {

ForwardTrace trace_with_weights(const Matrix& weights) {
  ForwardTrace t;
  t.tokens.assign(static_cast<std::size_t>(weights.cols()), 2);
  AspectAttention att;
  att.weights = weights;
  att.sentence_weights = weights.rowwise().mean();
  t.attention = att;
  return t;
}

TEST(AspectScoresTest, HandMatrix) {
  Matrix w(3, 2);
  w << 0.5, 0.1, 0.3, 0.6, 0.2, 0.3;
  const Vector s = aspect_scores(trace_with_weights(w));
  EXPECT_NEAR(s(0), 0.6, 1e-12);
  EXPECT_NEAR(s(1), 0.9, 1e-12);
  EXPECT_NEAR(s(2), 0.5, 1e-12);
}

TEST(AspectScoresTest, UniformAndConcentrated) {
  const Vector u = aspect_scores(trace_with_weights(Matrix::Constant(4, 8, 0.25)));
  EXPECT_TRUE(u.isApproxToConstant(2.0, 1e-12));
  Matrix w = Matrix::Zero(4, 5);
  w.row(2).setOnes();
  const Vector c = aspect_scores(trace_with_weights(w));
  EXPECT_EQ(c(2), 5.0);
  EXPECT_EQ(c.sum(), 5.0);
}

TEST(AspectScoresTest, NeedsAttention) {
  EXPECT_THROW(aspect_scores(ForwardTrace{}), CapabilityError);
}

// Token 2 drives the hidden state toward aspect 0, token 3 toward aspect 1.
LstmClassifier aligned_model() {
  ModelConfig c;
  c.embed_dim = c.hidden_dim = 2;
  c.vocab_size = 4;
  c.num_classes = 3;
  c.num_aspects = 2;
  c.max_len = 4;
  auto m = LstmClassifier::zeros(c);
  m.embedding.col(2) << 1, 0;
  m.embedding.col(3) << 0, 1;
  m.bias.segment(0, 2).setConstant(10);   // input gate open
  m.bias.segment(2, 2).setConstant(-10);  // forget everything
  m.bias.segment(6, 2).setConstant(10);   // output gate open
  m.input_weights.block(4, 0, 2, 2) = 5 * Matrix::Identity(2, 2);
  m.aspects << 10, 0, 0, 10;
  return m;
}

TEST(HitRatioTest, TwoOfThree) {
  const auto model = aligned_model();
  std::vector<EncodedExample> data = {
      {{2, 2, 0, 0}, 2, 0, 0}, {{3, 0, 0, 0}, 1, 0, 1}, {{3, 3, 0, 0}, 2, 0, 0}};
  const auto r = hit_ratio(model, data);
  EXPECT_NEAR(r.ratio, 2.0 / 3.0, 1e-12);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_TRUE(r.records[0].hit);
  EXPECT_FALSE(r.records[2].hit);
  EXPECT_FALSE(r.degenerate_ties);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_NEAR(r.records[i].scores.sum(), data[i].length, 1e-6);
  }
}

TEST(HitRatioTest, ScoresSumToTokenCount) {
  const auto model = aligned_model();
  std::vector<EncodedExample> data = {{{2, 3, 3, 0}, 3, 0, 1}, {{3, 0, 0, 0}, 1, 0, 1}};
  const auto r = hit_ratio(model, data);
  EXPECT_NEAR(r.records[0].scores.sum(), 3.0, 1e-6);
  EXPECT_NEAR(r.records[1].scores.sum(), 1.0, 1e-6);
}

TEST(HitRatioTest, SymmetricAspectsAreTies) {
  auto model = aligned_model();
  model.aspects.setConstant(0.5);
  std::vector<EncodedExample> data = {{{2, 3, 0, 0}, 2, 0, 1}};
  const auto r = hit_ratio(model, data);
  EXPECT_TRUE(r.degenerate_ties);
  EXPECT_EQ(r.records[0].predicted, 0);
  EXPECT_EQ(r.ratio, 0.0);
}

TEST(HitRatioTest, RequiresAspectLabels) {
  const auto model = aligned_model();
  std::vector<EncodedExample> data = {{{2, 0, 0, 0}, 1, 0, std::nullopt}};
  EXPECT_THROW(hit_ratio(model, data), FormatError);
  ModelConfig plain = model.config;
  plain.num_aspects = 0;
  data[0].aspect = 0;
  EXPECT_THROW(hit_ratio(LstmClassifier::zeros(plain), data), CapabilityError);
}

}  // namespace
}  // namespace distilledge
