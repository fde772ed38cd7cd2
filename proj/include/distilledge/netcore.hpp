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

#ifndef DISTILLEDGE_NETCORE_HPP_
#define DISTILLEDGE_NETCORE_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "distilledge/corpus.hpp"
#include "json.hpp"

namespace distilledge {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

struct ModelConfig {
  int embed_dim = 10;
  int hidden_dim = 10;
  int vocab_size = 2;
  int num_classes = 2;
  int num_aspects = 0;  // 0 disables the aspect head
  int max_len = kDefaultMaxLen;
  std::uint64_t seed = 0;

  bool has_aspects() const { return num_aspects > 0; }
  void validate() const;

  static ModelConfig full(int vocab_size, int num_classes, int dim = 100);
  static ModelConfig compressed(int dim, int vocab_size, int num_classes);

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamCount {
  long long embedding = 0;
  long long lstm = 0;
  long long heads = 0;
  long long total = 0;
};

// lstm = 4H((d+1)+H); embedding = V*d; heads = (H+1)K + m*d.
ParamCount param_count(const ModelConfig& config);

// Embedding + single-layer LSTM + affine classifier + optional aspect
// table. Gate blocks in the stacked LSTM matrices are ordered i, f, g, o.
struct LstmClassifier {
  ModelConfig config;
  Matrix embedding;          // d x V, one column per token
  Matrix input_weights;      // 4H x d
  Matrix recurrent_weights;  // 4H x H
  Vector bias;               // 4H
  Matrix classifier_weights; // K x H
  Vector classifier_bias;    // K
  Matrix aspects;            // d x m (0 columns when disabled)

  // Uniform(-0.1, 0.1) from config.seed.
  static LstmClassifier init(const ModelConfig& config);
  static LstmClassifier zeros(const ModelConfig& config);

  template <typename F>
  void for_each_param(F&& f) {
    f("embedding", embedding);
    f("lstm.input_weights", input_weights);
    f("lstm.recurrent_weights", recurrent_weights);
    f("lstm.bias", bias);
    f("classifier.weights", classifier_weights);
    f("classifier.bias", classifier_bias);
    f("aspects", aspects);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<LstmClassifier*>(this)->for_each_param(
        [&](const char* name, const auto& p) { f(name, p); });
  }
};

// encoder: tanh(W_e x + b_e), high -> low; decoder: W_d z + b_d, low -> high.
struct Autoencoder {
  Matrix encoder_weights;  // low x high
  Vector encoder_bias;
  Matrix decoder_weights;  // high x low
  Vector decoder_bias;

  static Autoencoder init(int high_dim, int low_dim, std::uint64_t seed);
  static Autoencoder zeros_like(const Autoencoder& other);
  Index high_dim() const { return encoder_weights.cols(); }
  Index low_dim() const { return encoder_weights.rows(); }

  template <typename F>
  void for_each_param(F&& f) {
    f("encoder.weights", encoder_weights);
    f("encoder.bias", encoder_bias);
    f("decoder.weights", decoder_weights);
    f("decoder.bias", decoder_bias);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<Autoencoder*>(this)->for_each_param(
        [&](const char* name, const auto& p) { f(name, p); });
  }
};

// Columns of x are independent inputs.
Matrix ae_encode(const Autoencoder& ae, const Matrix& x_high);
Matrix ae_decode(const Autoencoder& ae, const Matrix& x_low);
// Accumulates parameter gradients into 'grads'; returns d/d x_high.
Matrix ae_encode_backward(const Autoencoder& ae, const Matrix& x_high,
                          const Matrix& x_low, const Matrix& d_low,
                          Autoencoder& grads);
// Accumulates parameter gradients into 'grads'; returns d/d x_low.
Matrix ae_decode_backward(const Autoencoder& ae, const Matrix& x_low,
                          const Matrix& d_rec, Autoencoder& grads);

struct AspectAttention {
  Matrix weights;          // m x n, each column sums to 1
  Vector sentence_weights; // m, row means of 'weights'
  Vector feature;          // d, aspects * sentence_weights
};

// score(j, i) = h_i . a_j; softmax over aspects per token; the sentence
// weight of an aspect is its mean over tokens.
AspectAttention aspect_attention(const Matrix& hidden_seq,
                                 const Matrix& aspect_embeddings);

struct AttentionGradients {
  Matrix d_hidden;   // H x n
  Matrix d_aspects;  // d x m
};
AttentionGradients aspect_attention_backward(const Matrix& hidden_seq,
                                             const Matrix& aspect_embeddings,
                                             const AspectAttention& attention,
                                             const Vector& d_feature,
                                             const Vector& d_sentence_weights);

struct ForwardTrace {
  std::vector<int> tokens;  // non-PAD ids, in order
  Matrix embeddings;        // d x n
  Matrix hidden;            // H x n
  Matrix cells;             // H x n
  Matrix gates;             // 4H x n, post-activation (i, f, g, o)
  Vector final_hidden;      // H; zero when n == 0
  std::optional<AspectAttention> attention;
  Vector logits;            // K

  int length() const { return static_cast<int>(tokens.size()); }
};

// PAD ids are skipped; the recurrent state is carried across them.
ForwardTrace forward(const LstmClassifier& model, std::span<const int> token_ids,
                     bool with_aspects);
inline ForwardTrace forward(const LstmClassifier& model,
                            const EncodedExample& example, bool with_aspects) {
  return forward(model, example.token_ids, with_aspects);
}
Vector predict_proba(const LstmClassifier& model, std::span<const int> token_ids);

// Upstream gradients flowing into a trace. Empty members mean zero.
struct TraceGradients {
  Vector logits;
  Vector final_hidden;
  Matrix hidden;      // H x n
  Matrix embeddings;  // d x n
  Vector aspect_feature;
  Vector aspect_weights;
};

// Accumulates parameter gradients into 'grads' (same shapes as 'model';
// may be null when only input gradients are wanted) and returns the total
// gradient w.r.t. the per-token embeddings (d x n).
Matrix backward(const LstmClassifier& model, const ForwardTrace& trace,
                const TraceGradients& upstream, LstmClassifier* grads);

// Rounds every parameter to float32 precision (what a checkpoint stores).
template <typename Params>
void round_to_float(Params& params) {
  params.for_each_param([](const char*, auto& p) {
    p = p.template cast<float>().template cast<Scalar>();
  });
}

template <typename Params>
Index param_size(const Params& params) {
  Index n = 0;
  params.for_each_param([&](const char*, const auto& p) { n += p.size(); });
  return n;
}

template <typename Params>
void set_zero(Params& params) {
  params.for_each_param([](const char*, auto& p) { p.setZero(); });
}

template <typename... Params>
Vector flatten(const Params&... params) {
  std::vector<Scalar> buf;
  auto push = [&](const char*, const auto& p) {
    for (Index i = 0; i < p.size(); ++i) buf.push_back(p.data()[i]);
  };
  (params.for_each_param(push), ...);
  return Eigen::Map<Vector>(buf.data(), static_cast<Index>(buf.size()));
}

template <typename... Params>
void unflatten(const Vector& flat, Params&... params) {
  Index off = 0;
  auto pull = [&](const char*, auto& p) {
    for (Index i = 0; i < p.size(); ++i) p.data()[i] = flat(off++);
  };
  (params.for_each_param(pull), ...);
}

struct GradCheckEntry {
  Index index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0;
  double max_abs_error = 0;
  bool passed = false;
};

// Central differences at the given coordinates. Relative error is
// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from
// being judged on pure round-off.
GradCheckReport grad_check(const std::function<double(const Vector&)>& loss,
                           const Vector& analytic_grad, const Vector& params,
                           std::span<const Index> indices, double eps = 1e-4,
                           double tol = 1e-4, double floor = 1e-6);

// Binary checkpoint: 8-byte magic "DEDGCKPT", uint64 little-endian header
// length, JSON header, then little-endian float32 tensors (column-major) in
// header order.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  struct Tensor {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    std::vector<float> values;
  };
  std::vector<Tensor> tensors;

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
  const Tensor& tensor(std::string_view name) const;
};

Checkpoint to_checkpoint(const LstmClassifier& model,
                         const nlohmann::json& extra = nlohmann::json::object());
// Throws ShapeError if a tensor is missing or disagrees with the config.
LstmClassifier from_checkpoint(const Checkpoint& ckpt);
void save_model(const std::filesystem::path& path, const LstmClassifier& model,
                const nlohmann::json& extra = nlohmann::json::object());
LstmClassifier load_model(const std::filesystem::path& path);

// SHA-256 of the model's canonical checkpoint bytes (no extra metadata).
std::string model_fingerprint(const LstmClassifier& model);

}  // namespace distilledge

#endif  // DISTILLEDGE_NETCORE_HPP_
