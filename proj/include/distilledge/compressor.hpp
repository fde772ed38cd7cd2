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

#ifndef DISTILLEDGE_COMPRESSOR_HPP_
#define DISTILLEDGE_COMPRESSOR_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "distilledge/attacks.hpp"
#include "distilledge/corpus.hpp"
#include "distilledge/losses.hpp"
#include "distilledge/netcore.hpp"

namespace distilledge {

enum class TaskLoss { kCe, kGce };
TaskLoss parse_task_loss(std::string_view name);
std::string task_loss_name(TaskLoss loss);

// Which optional objective terms take part in compressed training.
struct AblationFlags {
  bool embed_map = true;
  bool latent_map = true;
  bool distill = true;
  bool autoencoder = true;
  bool interpretable = true;

  static AblationFlags none() { return {false, false, false, false, false}; }
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainPlan {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;  // shuffling order
  int patience = 5;        // epochs without val-accuracy gain; 0 disables
  TaskLoss task_loss = TaskLoss::kGce;
  AblationFlags flags;
  LossWeights weights;
  AdamOptions adam;
  bool cache_teacher = false;
  bool head_only = false;  // update only the classifier layer

  void validate() const;
  std::string optimizer_description() const;
};

// Adam over any type exposing for_each_param.
template <typename Params>
class Adam {
 public:
  Adam(const Params& like, AdamOptions options) : m_(like), v_(like), options_(options) {
    set_zero(m_);
    set_zero(v_);
  }

  void step(Params& params, const Params& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, t_);
    const double c2 = 1.0 - std::pow(options_.beta2, t_);
    auto p = views(params);
    auto g = views(const_cast<Params&>(grads));
    auto m = views(m_);
    auto v = views(v_);
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto gk = g[k].array();
      m[k].array() = options_.beta1 * m[k].array() + (1 - options_.beta1) * gk;
      v[k].array() = options_.beta2 * v[k].array() + (1 - options_.beta2) * gk.square();
      p[k].array() -= lr * (m[k].array() / c1) / ((v[k].array() / c2).sqrt() + options_.epsilon);
    }
  }

 private:
  using View = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
  static std::vector<View> views(Params& params) {
    std::vector<View> out;
    params.for_each_param([&](const char*, auto& x) { out.emplace_back(x.data(), x.size()); });
    return out;
  }

  Params m_;
  Params v_;
  AdamOptions options_;
  int t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;  // batch-mean values averaged over the epoch
  double val_acc = 0;
  double val_f1 = 0;
};

struct TrainResult {
  LstmClassifier model;  // best-validation epoch, float32-rounded
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0: the initialization
  bool diverged = false;
  bool early_stopped = false;
  // Per-step training totals, in order (for trajectory comparisons).
  std::vector<double> step_losses;
};

// Ordinary supervised training with the task loss only.
TrainResult train_conventional(const ModelConfig& config, const TrainPlan& plan,
                               std::span<const EncodedExample> train,
                               std::span<const EncodedExample> val);

// Cloud-side teacher: conventional training of the full configuration.
TrainResult pretrain_full(const ModelConfig& config, const TrainPlan& plan,
                          std::span<const EncodedExample> train,
                          std::span<const EncodedExample> val);

// Frozen teacher outputs for one example.
struct TeacherTrace {
  Matrix embeddings;    // d_f x n
  Vector final_hidden;  // H_f
  Vector logits;        // K
};
TeacherTrace teacher_trace(const LstmClassifier& teacher, const EncodedExample& example);

// Student model plus the two feature-mapping autoencoders.
struct StudentBundle {
  LstmClassifier student;
  Autoencoder embed_ae;   // d_f -> d_c
  Autoencoder hidden_ae;  // H_f -> H_c

  static StudentBundle init(const LstmClassifier& teacher, const ModelConfig& student_config);
  static StudentBundle zeros_like(const StudentBundle& other);

  template <typename F>
  void for_each_param(F&& f) {
    student.for_each_param(f);
    embed_ae.for_each_param(f);
    hidden_ae.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<StudentBundle*>(this)->for_each_param(
        [&](const char* name, const auto& p) { f(name, p); });
  }
};

// Composite objective over a batch: returns the (batch-mean) breakdown and
// accumulates gradients of the weighted total into 'grads' (may be null).
// 'teacher_traces' holds one trace per example or is empty (computed on
// the fly).
LossBreakdown composite_batch(const StudentBundle& bundle, const LstmClassifier& teacher,
                              std::span<const EncodedExample* const> batch,
                              std::span<const TeacherTrace* const> teacher_traces,
                              const TrainPlan& plan, StudentBundle* grads);

struct CompressedResult : TrainResult {
  Autoencoder embed_ae;
  Autoencoder hidden_ae;
};

// Student training under the composite objective against a frozen teacher.
// Throws ShapeError if teacher and student disagree on V or K.
CompressedResult train_compressed(const LstmClassifier& teacher,
                                  const ModelConfig& student_config, const TrainPlan& plan,
                                  std::span<const EncodedExample> train,
                                  std::span<const EncodedExample> val);

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

struct AblationVariant {
  std::string name;
  AblationFlags flags;
};
// Rows of the layer-contribution table: w/o Embedding, w/o Latent,
// w/o Label, All.
std::vector<AblationVariant> default_ablation_grid();

struct AblationSpec {
  std::vector<AblationVariant> grid;
  std::vector<std::uint64_t> seeds;     // >= 2
  std::vector<LstmClassifier> teachers; // one per seed, or a single shared one
  ModelConfig student_config;
  TrainPlan plan;
  std::size_t attack_samples = 500;
  int jobs = 1;
};

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double acc = 0;
  double f1 = 0;
  double adv_acc = 0;
  double adv_f1 = 0;
};

// Trains every (variant, seed) cell and scores it on the clean test split
// and under Replaceone.
std::vector<AblationRow> run_ablation(const AblationSpec& spec, const Vocabulary& vocab,
                                      std::span<const RawExample> train,
                                      std::span<const RawExample> val,
                                      std::span<const RawExample> test);

}  // namespace distilledge

#endif  // DISTILLEDGE_COMPRESSOR_HPP_
