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

#include "distilledge/netcore.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "distilledge/compressor.hpp"
#include "distilledge/errors.hpp"
#include "gtest/gtest.h"

namespace distilledge {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ModelConfig small_config(int dim, int vocab, int classes, int aspects = 0) {
  ModelConfig c;
  c.embed_dim = c.hidden_dim = dim;
  c.vocab_size = vocab;
  c.num_classes = classes;
  c.num_aspects = aspects;
  c.max_len = 8;
  c.seed = 42;
  return c;
}

TEST(ParamCountTest, LstmFormula) {
  const std::vector<std::pair<int, long long>> cases = {
      {1, 12}, {5, 220}, {10, 840}, {20, 3280}, {100, 80400}};
  for (const auto& [dim, expected] : cases) {
    ModelConfig c = small_config(dim, 10, 2);
    EXPECT_EQ(param_count(c).lstm, expected) << "dim " << dim;
  }
}

TEST(ParamCountTest, MatchesAllocatedTensors) {
  ModelConfig c = small_config(4, 30, 3, 2);
  c.hidden_dim = 4;
  const auto model = LstmClassifier::init(c);
  EXPECT_EQ(param_count(c).total, param_size(model));
}

TEST(ParamCountTest, CompressedPresetsOnTwentyThousandWords) {
  const std::vector<std::pair<int, double>> brackets = {{5, 100e3}, {10, 200e3}, {20, 400e3}};
  for (const auto& [dim, target] : brackets) {
    const auto n = static_cast<double>(param_count(ModelConfig::compressed(dim, 20000, 4)).total);
    EXPECT_NEAR(n, target, 0.15 * target) << "dim " << dim;
  }
}

TEST(ParamCountTest, MonotoneInDims) {
  for (int d = 1; d < 30; ++d) {
    ModelConfig a = small_config(d, 10, 2);
    ModelConfig b = small_config(d + 1, 10, 2);
    EXPECT_LT(param_count(a).lstm, param_count(b).lstm);
  }
}

TEST(ModelConfigTest, SingleAspectRejected) {
  EXPECT_THROW(small_config(3, 10, 2, 1).validate(), ConfigError);
  ModelConfig c = small_config(3, 10, 2, 2);
  c.hidden_dim = 4;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ForwardTest, ZeroModelIsUniform) {
  const auto model = LstmClassifier::zeros(small_config(3, 10, 4));
  const int ids[] = {2, 5, 7, 0};
  const Vector p = predict_proba(model, ids);
  for (Index k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(p(k), 0.25);
}

TEST(ForwardTest, SingleTokenHandComputed) {
  auto model = LstmClassifier::zeros(small_config(1, 4, 2));
  model.embedding(0, 2) = 0.5;
  model.input_weights << 1.0, -2.0, 0.3, 2.0;  // i, f, g, o
  model.bias << 0.1, 0.0, 0.2, -0.4;
  model.classifier_weights << 1.5, -1.0;
  model.classifier_bias << 0.0, 0.25;
  const int ids[] = {2, 0, 0};
  const auto tr = forward(model, ids, false);
  const double i = sigmoid(0.5 + 0.1);
  const double g = std::tanh(0.15 + 0.2);
  const double o = sigmoid(1.0 - 0.4);
  const double c = i * g;
  const double h = o * std::tanh(c);
  ASSERT_EQ(tr.length(), 1);
  EXPECT_NEAR(tr.cells(0, 0), c, 1e-12);
  EXPECT_NEAR(tr.final_hidden(0), h, 1e-12);
  EXPECT_NEAR(tr.logits(0), 1.5 * h, 1e-12);
  EXPECT_NEAR(tr.logits(1), -h + 0.25, 1e-12);
}

TEST(ForwardTest, PadTailDoesNotMatter) {
  const auto model = LstmClassifier::init(small_config(3, 10, 3));
  const int a[] = {4, 2, 9, 0, 0, 0};
  const int b[] = {4, 2, 9};
  const int c[] = {4, 0, 2, 0, 9, 0};
  const Vector la = forward(model, a, false).logits;
  EXPECT_EQ(la, forward(model, b, false).logits);
  EXPECT_EQ(la, forward(model, c, false).logits);
}

TEST(ForwardTest, BadIdAndMissingHead) {
  const auto model = LstmClassifier::init(small_config(3, 10, 3));
  const int bad[] = {12};
  EXPECT_THROW(forward(model, bad, false), ShapeError);
  const int ok[] = {3};
  EXPECT_THROW(forward(model, ok, true), CapabilityError);
}

TEST(AttentionTest, LogThreeVersusZero) {
  Matrix h(2, 1);
  h << 1, 0;
  Matrix a(2, 2);
  a << std::log(3.0), 0, 5, -2;
  const auto att = aspect_attention(h, a);
  EXPECT_NEAR(att.weights(0, 0), 0.75, 1e-12);
  EXPECT_NEAR(att.weights(1, 0), 0.25, 1e-12);
  const Vector expected = 0.75 * a.col(0) + 0.25 * a.col(1);
  EXPECT_TRUE(att.feature.isApprox(expected, 1e-12));
}

TEST(AttentionTest, IdenticalAspectsGiveUniformWeights) {
  Matrix h = Matrix::Random(3, 5);
  Matrix a(3, 4);
  for (Index j = 0; j < 4; ++j) a.col(j) << 0.2, -0.1, 0.7;
  const auto att = aspect_attention(h, a);
  EXPECT_TRUE(att.weights.isApproxToConstant(0.25, 1e-12));
  EXPECT_TRUE(att.feature.isApprox(a.col(0), 1e-12));
}

TEST(AttentionTest, ShiftInvariance) {
  std::mt19937_64 rng(1);
  Matrix h = Matrix::Random(3, 4);
  Matrix a = Matrix::Random(3, 3);
  const auto base = aspect_attention(h, a);
  // Adding the same vector v to every aspect shifts each token's scores by h.v.
  Matrix shifted = a;
  for (Index j = 0; j < 3; ++j) shifted.col(j) += Vector::Constant(3, 0.8);
  const auto moved = aspect_attention(h, shifted);
  EXPECT_TRUE(base.weights.isApprox(moved.weights, 1e-10));
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(base.weights.col(i).sum(), 1.0, 1e-12);
}

TEST(AutoencoderTest, HandWeights) {
  Autoencoder ae;
  ae.encoder_weights = Matrix::Ones(1, 2);
  ae.encoder_bias = Vector::Zero(1);
  ae.decoder_weights.resize(2, 1);
  ae.decoder_weights << 1, 2;
  ae.decoder_bias.resize(2);
  ae.decoder_bias << 0.5, 0;
  Matrix x(2, 1);
  x << 0.3, -0.1;
  const Matrix z = ae_encode(ae, x);
  const double zz = std::tanh(0.2);
  EXPECT_NEAR(z(0, 0), zz, 1e-12);
  const Matrix rec = ae_decode(ae, z);
  EXPECT_NEAR(rec(0, 0), zz + 0.5, 1e-12);
  EXPECT_NEAR(rec(1, 0), 2 * zz, 1e-12);
}

TEST(AutoencoderTest, ZeroInputZeroOutput) {
  Autoencoder ae = Autoencoder::init(5, 2, 3);
  ae.encoder_bias.setZero();
  EXPECT_TRUE(ae_encode(ae, Matrix::Zero(5, 3)).isZero(0));
}

TEST(GradCheckTest, Quadratic) {
  const Vector p = Vector::LinSpaced(6, -1, 2);
  const std::vector<Index> idx = {0, 1, 2, 3, 4, 5};
  const auto r = grad_check([](const Vector& x) { return 0.5 * x.squaredNorm(); }, p, p, idx);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheckTest, RejectsBadEpsilon) {
  const Vector p = Vector::Ones(1);
  const std::vector<Index> idx = {0};
  auto f = [](const Vector& x) { return x(0); };
  EXPECT_THROW(grad_check(f, p, p, idx, 0.0), ConfigError);
  EXPECT_THROW(grad_check(f, p, p, idx, 0.1), ConfigError);
}

TEST(GradCheckTest, CeAtUniformSoftmax) {
  auto model = LstmClassifier::zeros(small_config(2, 6, 4));
  const int ids[] = {3, 4};
  const auto tr = forward(model, ids, false);
  const int y[] = {1};
  const auto ce = ce_loss<Scalar>(Matrix(tr.logits), y);
  for (Index k = 0; k < 4; ++k) EXPECT_NEAR(ce.grad(k, 0), 0.25 - (k == 1), 1e-12);
}

// Full-model gradient through the LSTM, classifier and aspect head.
TEST(BackwardTest, CompositeMatchesFiniteDifferences) {
  const ModelConfig sc = small_config(3, 50, 4, 2);
  ModelConfig tc = small_config(5, 50, 4);
  tc.seed = 9;
  const auto teacher = LstmClassifier::init(tc);
  StudentBundle bundle = StudentBundle::init(teacher, sc);
  // Larger weights so gradients are not uniformly tiny.
  bundle.for_each_param([](const char*, auto& p) { p *= 8.0; });

  std::vector<EncodedExample> data(3);
  data[0] = {{5, 17, 33, 2, 0, 0, 0, 0}, 4, 1, 0};
  data[1] = {{44, 3, 9, 0, 0, 0, 0, 0}, 3, 3, 1};
  data[2] = {{7, 7, 0, 0, 0, 0, 0, 0}, 2, 0, std::nullopt};
  std::vector<const EncodedExample*> batch;
  for (const auto& e : data) batch.push_back(&e);

  TrainPlan plan;
  plan.weights.temperature = 2.0;
  for (TaskLoss loss : {TaskLoss::kCe, TaskLoss::kGce}) {
    plan.task_loss = loss;
    StudentBundle grads = StudentBundle::zeros_like(bundle);
    composite_batch(bundle, teacher, batch, {}, plan, &grads);
    const Vector p0 = flatten(bundle);
    const Vector g = flatten(grads);
    auto f = [&](const Vector& p) {
      StudentBundle b = bundle;
      unflatten(p, b);
      return composite_batch(b, teacher, batch, {}, plan, nullptr).total;
    };
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<Index> pick(0, p0.size() - 1);
    std::vector<Index> idx;
    // Touch the rows actually used by the batch plus random coordinates.
    for (int i = 0; i < 60; ++i) idx.push_back(pick(rng));
    for (Index r = 0; r < 3; ++r) idx.push_back(5 * 3 + r);
    const auto report = grad_check(f, g, p0, idx, 1e-4, 1e-4);
    EXPECT_TRUE(report.passed) << "max rel " << report.max_rel_error;
  }
}

TEST(CheckpointTest, ByteIdenticalRoundTrip) {
  const auto model = LstmClassifier::init(small_config(4, 20, 3, 2));
  const std::string bytes = to_checkpoint(model).serialize();
  const auto back = Checkpoint::deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  const auto restored = from_checkpoint(back);
  EXPECT_EQ(to_checkpoint(restored).serialize(), bytes);
  EXPECT_EQ(model_fingerprint(restored), model_fingerprint(model));
}

TEST(CheckpointTest, ShapeMismatchAndCorruption) {
  const auto model = LstmClassifier::init(small_config(4, 20, 3));
  auto ckpt = to_checkpoint(model);
  ckpt.meta["config"]["H"] = 5;
  EXPECT_THROW(from_checkpoint(ckpt), ShapeError);
  std::string bytes = to_checkpoint(model).serialize();
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 4)), FormatError);
  bytes[0] = 'X';
  EXPECT_THROW(Checkpoint::deserialize(bytes), FormatError);
}

TEST(CheckpointTest, SaveLoadFile) {
  const auto dir = std::filesystem::temp_directory_path() / "distilledge_ckpt_test";
  const auto model = LstmClassifier::init(small_config(3, 12, 2));
  save_model(dir / "m.ckpt", model);
  auto loaded = load_model(dir / "m.ckpt");
  LstmClassifier rounded = model;
  round_to_float(rounded);
  EXPECT_EQ(flatten(loaded), flatten(rounded));
  EXPECT_THROW(load_model(dir / "missing.ckpt"), DependencyError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace distilledge
