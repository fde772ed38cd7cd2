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

#include <bit>
#include <cmath>
#include <cstring>

#include "distilledge/errors.hpp"
#include "distilledge/hash.hpp"
#include "distilledge/losses.hpp"

namespace distilledge {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'E', 'D', 'G', 'C', 'K', 'P', 'T'};
constexpr double kInitRange = 0.1;

void fill_uniform(Matrix& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<Scalar> dist(-kInitRange, kInitRange);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}
void fill_uniform(Vector& v, std::mt19937_64& rng) {
  std::uniform_real_distribution<Scalar> dist(-kInitRange, kInitRange);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = dist(rng);
}

inline Scalar sigmoid(Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); }

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_u64(std::string_view in, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  }
  return v;
}

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("model.d and model.H must be >= 1");
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  if (vocab_size < 2) throw ConfigError("model.vocab_size must be >= 2");
  if (max_len < 1) throw ConfigError("model.max_len must be >= 1");
  if (num_aspects < 0) throw ConfigError("model.num_aspects must be >= 0");
  if (num_aspects == 1) throw ConfigError("aspect head requires m >= 2");
  if (num_aspects > 0 && embed_dim != hidden_dim) {
    throw ConfigError("aspect head requires d == H");
  }
}

ModelConfig ModelConfig::full(int vocab_size, int num_classes, int dim) {
  ModelConfig c;
  c.embed_dim = c.hidden_dim = dim;
  c.vocab_size = vocab_size;
  c.num_classes = num_classes;
  return c;
}

ModelConfig ModelConfig::compressed(int dim, int vocab_size, int num_classes) {
  return full(vocab_size, num_classes, dim);
}

json ModelConfig::to_json() const {
  return json{{"d", embed_dim},         {"H", hidden_dim},   {"V", vocab_size},
              {"K", num_classes},       {"m", num_aspects},  {"max_len", max_len},
              {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.embed_dim = j.at("d").get<int>();
    c.hidden_dim = j.at("H").get<int>();
    c.vocab_size = j.at("V").get<int>();
    c.num_classes = j.at("K").get<int>();
    c.num_aspects = j.value("m", 0);
    c.max_len = j.value("max_len", kDefaultMaxLen);
    c.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ParamCount param_count(const ModelConfig& c) {
  ParamCount pc;
  const long long d = c.embed_dim, h = c.hidden_dim, v = c.vocab_size,
                  k = c.num_classes, m = c.num_aspects;
  pc.lstm = 4 * h * ((d + 1) + h);
  pc.embedding = v * d;
  pc.heads = (h + 1) * k + m * d;
  pc.total = pc.lstm + pc.embedding + pc.heads;
  return pc;
}

LstmClassifier LstmClassifier::zeros(const ModelConfig& config) {
  config.validate();
  const Index d = config.embed_dim, h = config.hidden_dim;
  LstmClassifier m;
  m.config = config;
  m.embedding = Matrix::Zero(d, config.vocab_size);
  m.input_weights = Matrix::Zero(4 * h, d);
  m.recurrent_weights = Matrix::Zero(4 * h, h);
  m.bias = Vector::Zero(4 * h);
  m.classifier_weights = Matrix::Zero(config.num_classes, h);
  m.classifier_bias = Vector::Zero(config.num_classes);
  m.aspects = Matrix::Zero(d, config.num_aspects);
  return m;
}

LstmClassifier LstmClassifier::init(const ModelConfig& config) {
  LstmClassifier m = zeros(config);
  std::mt19937_64 rng(config.seed);
  m.for_each_param([&](const char*, auto& p) { fill_uniform(p, rng); });
  return m;
}

Autoencoder Autoencoder::init(int high_dim, int low_dim, std::uint64_t seed) {
  Autoencoder ae;
  ae.encoder_weights = Matrix::Zero(low_dim, high_dim);
  ae.encoder_bias = Vector::Zero(low_dim);
  ae.decoder_weights = Matrix::Zero(high_dim, low_dim);
  ae.decoder_bias = Vector::Zero(high_dim);
  std::mt19937_64 rng(seed);
  ae.for_each_param([&](const char*, auto& p) { fill_uniform(p, rng); });
  return ae;
}

Autoencoder Autoencoder::zeros_like(const Autoencoder& other) {
  Autoencoder ae = other;
  set_zero(ae);
  return ae;
}

Matrix ae_encode(const Autoencoder& ae, const Matrix& x_high) {
  if (x_high.rows() != ae.high_dim()) {
    throw ShapeError("ae_encode: input dim " + std::to_string(x_high.rows()) +
                     " != " + std::to_string(ae.high_dim()));
  }
  return ((ae.encoder_weights * x_high).colwise() + ae.encoder_bias)
      .array()
      .tanh()
      .matrix();
}

Matrix ae_decode(const Autoencoder& ae, const Matrix& x_low) {
  if (x_low.rows() != ae.low_dim()) {
    throw ShapeError("ae_decode: input dim " + std::to_string(x_low.rows()) +
                     " != " + std::to_string(ae.low_dim()));
  }
  return (ae.decoder_weights * x_low).colwise() + ae.decoder_bias;
}

Matrix ae_encode_backward(const Autoencoder& ae, const Matrix& x_high,
                          const Matrix& x_low, const Matrix& d_low,
                          Autoencoder& grads) {
  const Matrix dz = (d_low.array() * (1.0 - x_low.array().square())).matrix();
  grads.encoder_weights.noalias() += dz * x_high.transpose();
  grads.encoder_bias += dz.rowwise().sum();
  return ae.encoder_weights.transpose() * dz;
}

Matrix ae_decode_backward(const Autoencoder& ae, const Matrix& x_low,
                          const Matrix& d_rec, Autoencoder& grads) {
  grads.decoder_weights.noalias() += d_rec * x_low.transpose();
  grads.decoder_bias += d_rec.rowwise().sum();
  return ae.decoder_weights.transpose() * d_rec;
}

AspectAttention aspect_attention(const Matrix& hidden_seq,
                                 const Matrix& aspect_embeddings) {
  if (aspect_embeddings.cols() < 2) throw ConfigError("aspect attention requires m >= 2");
  if (hidden_seq.rows() != aspect_embeddings.rows()) {
    throw ConfigError("aspect attention requires d == H");
  }
  AspectAttention out;
  const Index m = aspect_embeddings.cols();
  const Index n = hidden_seq.cols();
  out.weights = softmax(aspect_embeddings.transpose() * hidden_seq);
  if (n > 0) {
    out.sentence_weights = out.weights.rowwise().mean();
  } else {
    out.sentence_weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
  }
  out.feature = aspect_embeddings * out.sentence_weights;
  return out;
}

AttentionGradients aspect_attention_backward(const Matrix& hidden_seq,
                                             const Matrix& aspect_embeddings,
                                             const AspectAttention& attention,
                                             const Vector& d_feature,
                                             const Vector& d_sentence_weights) {
  const Index m = aspect_embeddings.cols();
  const Index n = hidden_seq.cols();
  AttentionGradients g;
  g.d_aspects = Matrix::Zero(aspect_embeddings.rows(), m);
  g.d_hidden = Matrix::Zero(hidden_seq.rows(), n);
  Vector d_bar = Vector::Zero(m);
  if (d_feature.size() > 0) {
    g.d_aspects.noalias() += d_feature * attention.sentence_weights.transpose();
    d_bar.noalias() += aspect_embeddings.transpose() * d_feature;
  }
  if (d_sentence_weights.size() > 0) d_bar += d_sentence_weights;
  if (n == 0) return g;
  const Vector d_col = d_bar / static_cast<double>(n);
  Matrix d_scores(m, n);
  for (Index i = 0; i < n; ++i) {
    const auto a = attention.weights.col(i);
    const double inner = a.dot(d_col);
    d_scores.col(i) = (a.array() * (d_col.array() - inner)).matrix();
  }
  g.d_hidden.noalias() += aspect_embeddings * d_scores;
  g.d_aspects.noalias() += hidden_seq * d_scores.transpose();
  return g;
}

ForwardTrace forward(const LstmClassifier& model, std::span<const int> token_ids,
                     bool with_aspects) {
  const auto& cfg = model.config;
  const Index h = cfg.hidden_dim;
  ForwardTrace tr;
  for (int id : token_ids) {
    if (id == kPadId) continue;
    if (id < 0 || id >= cfg.vocab_size) {
      throw ShapeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(cfg.vocab_size));
    }
    tr.tokens.push_back(id);
  }
  const Index n = static_cast<Index>(tr.tokens.size());
  tr.embeddings.resize(cfg.embed_dim, n);
  for (Index t = 0; t < n; ++t) tr.embeddings.col(t) = model.embedding.col(tr.tokens[t]);

  tr.hidden.resize(h, n);
  tr.cells.resize(h, n);
  tr.gates.resize(4 * h, n);
  Matrix pre = model.input_weights * tr.embeddings;
  pre.colwise() += model.bias;
  Vector h_prev = Vector::Zero(h);
  Vector c_prev = Vector::Zero(h);
  Vector z(4 * h);
  for (Index t = 0; t < n; ++t) {
    z.noalias() = pre.col(t);
    z.noalias() += model.recurrent_weights * h_prev;
    auto gates = tr.gates.col(t);
    for (Index k = 0; k < h; ++k) {
      gates(k) = sigmoid(z(k));
      gates(h + k) = sigmoid(z(h + k));
      gates(2 * h + k) = std::tanh(z(2 * h + k));
      gates(3 * h + k) = sigmoid(z(3 * h + k));
    }
    for (Index k = 0; k < h; ++k) {
      const Scalar c = gates(h + k) * c_prev(k) + gates(k) * gates(2 * h + k);
      tr.cells(k, t) = c;
      tr.hidden(k, t) = gates(3 * h + k) * std::tanh(c);
    }
    h_prev = tr.hidden.col(t);
    c_prev = tr.cells.col(t);
  }
  tr.final_hidden = h_prev;
  if (with_aspects) {
    if (!cfg.has_aspects()) throw CapabilityError("model has no aspect head");
    tr.attention = aspect_attention(tr.hidden, model.aspects);
  }
  tr.logits = model.classifier_weights * tr.final_hidden + model.classifier_bias;
  return tr;
}

Vector predict_proba(const LstmClassifier& model, std::span<const int> token_ids) {
  return softmax(forward(model, token_ids, false).logits);
}

Matrix backward(const LstmClassifier& model, const ForwardTrace& tr,
                const TraceGradients& up, LstmClassifier* grads) {
  const Index h = model.config.hidden_dim;
  const Index n = tr.length();

  Vector d_final = Vector::Zero(h);
  if (up.logits.size() > 0) {
    if (grads) {
      grads->classifier_weights.noalias() += up.logits * tr.final_hidden.transpose();
      grads->classifier_bias += up.logits;
    }
    d_final.noalias() += model.classifier_weights.transpose() * up.logits;
  }
  if (up.final_hidden.size() > 0) d_final += up.final_hidden;

  Matrix d_hidden = up.hidden.size() > 0 ? up.hidden : Matrix::Zero(h, n);
  if (tr.attention && (up.aspect_feature.size() > 0 || up.aspect_weights.size() > 0)) {
    auto ag = aspect_attention_backward(tr.hidden, model.aspects, *tr.attention,
                                        up.aspect_feature, up.aspect_weights);
    d_hidden += ag.d_hidden;
    if (grads) grads->aspects += ag.d_aspects;
  }

  Matrix d_embed = up.embeddings.size() > 0 ? up.embeddings
                                            : Matrix::Zero(model.config.embed_dim, n);
  if (n == 0) return d_embed;
  d_hidden.col(n - 1) += d_final;

  Matrix dz_all(4 * h, n);
  Vector dh_next = Vector::Zero(h);
  Vector dc_next = Vector::Zero(h);
  Vector dz(4 * h);
  for (Index t = n - 1; t >= 0; --t) {
    const auto g = tr.gates.col(t);
    const Vector dh = d_hidden.col(t) + dh_next;
    for (Index k = 0; k < h; ++k) {
      const Scalar i = g(k), f = g(h + k), gg = g(2 * h + k), o = g(3 * h + k);
      const Scalar tc = std::tanh(tr.cells(k, t));
      const Scalar c_prev = t > 0 ? tr.cells(k, t - 1) : Scalar(0);
      const Scalar dc = dc_next(k) + dh(k) * o * (Scalar(1) - tc * tc);
      dz(k) = dc * gg * i * (Scalar(1) - i);
      dz(h + k) = dc * c_prev * f * (Scalar(1) - f);
      dz(2 * h + k) = dc * i * (Scalar(1) - gg * gg);
      dz(3 * h + k) = dh(k) * tc * o * (Scalar(1) - o);
      dc_next(k) = dc * f;
    }
    dz_all.col(t) = dz;
    dh_next.noalias() = model.recurrent_weights.transpose() * dz;
  }
  d_embed.noalias() += model.input_weights.transpose() * dz_all;
  if (grads) {
    grads->input_weights.noalias() += dz_all * tr.embeddings.transpose();
    if (n > 1) {
      grads->recurrent_weights.noalias() +=
          dz_all.rightCols(n - 1) * tr.hidden.leftCols(n - 1).transpose();
    }
    grads->bias += dz_all.rowwise().sum();
    for (Index t = 0; t < n; ++t) grads->embedding.col(tr.tokens[t]) += d_embed.col(t);
  }
  return d_embed;
}

GradCheckReport grad_check(const std::function<double(const Vector&)>& loss,
                           const Vector& analytic_grad, const Vector& params,
                           std::span<const Index> indices, double eps, double tol,
                           double floor) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw ConfigError("grad_check eps must be in (0, 1e-2]");
  if (analytic_grad.size() != params.size()) throw ShapeError("grad_check: gradient size mismatch");
  GradCheckReport report;
  Vector p = params;
  const double base = loss(p);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");
  for (Index idx : indices) {
    const double orig = p(idx);
    p(idx) = orig + eps;
    const double up = loss(p);
    p(idx) = orig - eps;
    const double down = loss(p);
    p(idx) = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite loss at index " + std::to_string(idx));
    }
    GradCheckEntry e;
    e.index = idx;
    e.analytic = analytic_grad(idx);
    e.numeric = (up - down) / (2 * eps);
    const double abs_err = std::abs(e.analytic - e.numeric);
    e.rel_error = abs_err / std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    report.entries.push_back(e);
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

std::string Checkpoint::serialize() const {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  json header = meta;
  header["format"] = "distilledge-checkpoint";
  header["version"] = 1;
  json list = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    if (static_cast<Index>(t.values.size()) != t.rows * t.cols) {
      throw ShapeError("tensor '" + t.name + "' size does not match its shape");
    }
    list.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", offset}});
    offset += t.values.size() * sizeof(float);
  }
  header["tensors"] = list;
  header["payload_bytes"] = offset;
  const std::string head = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, head.size());
  out += head;
  for (const auto& t : tensors) {
    out.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(float));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a distilledge checkpoint");
  }
  const std::uint64_t head_len = get_u64(bytes, 8);
  if (16 + head_len > bytes.size()) throw FormatError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.substr(16, head_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const std::string_view payload = bytes.substr(16 + head_len);
  Checkpoint ck;
  std::uint64_t expected = 0;
  try {
    for (const auto& t : header.at("tensors")) {
      Tensor tensor;
      tensor.name = t.at("name").get<std::string>();
      tensor.rows = t.at("shape").at(0).get<Index>();
      tensor.cols = t.at("shape").at(1).get<Index>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const std::uint64_t count = static_cast<std::uint64_t>(tensor.rows * tensor.cols);
      if (offset != expected || offset + count * sizeof(float) > payload.size()) {
        throw FormatError("checkpoint tensor '" + tensor.name + "' has a bad offset");
      }
      tensor.values.resize(count);
      std::memcpy(tensor.values.data(), payload.data() + offset, count * sizeof(float));
      expected += count * sizeof(float);
      ck.tensors.push_back(std::move(tensor));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (expected != payload.size()) {
    throw FormatError("checkpoint payload length " + std::to_string(payload.size()) +
                      " != declared " + std::to_string(expected));
  }
  header.erase("tensors");
  header.erase("format");
  header.erase("version");
  header.erase("payload_bytes");
  ck.meta = std::move(header);
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DependencyError("missing checkpoint " + path.string());
  return deserialize(read_file(path));
}

const Checkpoint::Tensor& Checkpoint::tensor(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw ShapeError("checkpoint has no tensor '" + std::string(name) + "'");
}

Checkpoint to_checkpoint(const LstmClassifier& model, const json& extra) {
  Checkpoint ck;
  ck.meta = extra;
  ck.meta["config"] = model.config.to_json();
  ck.meta["seed"] = model.config.seed;
  model.for_each_param([&](const char* name, const auto& p) {
    Checkpoint::Tensor t;
    t.name = name;
    t.rows = p.rows();
    t.cols = p.cols();
    t.values.resize(static_cast<std::size_t>(p.size()));
    for (Index i = 0; i < p.size(); ++i) t.values[i] = static_cast<float>(p.data()[i]);
    ck.tensors.push_back(std::move(t));
  });
  return ck;
}

LstmClassifier from_checkpoint(const Checkpoint& ck) {
  if (!ck.meta.contains("config")) throw FormatError("checkpoint has no config");
  LstmClassifier model = LstmClassifier::zeros(ModelConfig::from_json(ck.meta["config"]));
  model.for_each_param([&](const char* name, auto& p) {
    const auto& t = ck.tensor(name);
    if (t.rows != p.rows() || t.cols != p.cols()) {
      throw ShapeError(std::string("checkpoint tensor '") + name + "' is " +
                       std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                       ", config expects " + std::to_string(p.rows()) + "x" +
                       std::to_string(p.cols()));
    }
    for (Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<Scalar>(t.values[i]);
  });
  return model;
}

void save_model(const std::filesystem::path& path, const LstmClassifier& model,
                const json& extra) {
  to_checkpoint(model, extra).save(path);
}

LstmClassifier load_model(const std::filesystem::path& path) {
  return from_checkpoint(Checkpoint::load(path));
}

std::string model_fingerprint(const LstmClassifier& model) {
  return sha256_hex(to_checkpoint(model).serialize());
}

}  // namespace distilledge
