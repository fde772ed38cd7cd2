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

#include "distilledge/compressor.hpp"

#include <algorithm>
#include <future>
#include <numeric>
#include <random>
#include <sstream>

#include "distilledge/errors.hpp"
#include "distilledge/evalreport.hpp"
#include "distilledge/hash.hpp"

namespace distilledge {
namespace {

constexpr std::uint64_t kEmbedAeSalt = 0x656d6265645f6165ULL;
constexpr std::uint64_t kHiddenAeSalt = 0x6869646465615f65ULL;

LossValue<Scalar> task_loss(TaskLoss kind, const Vector& logits, int label, double alpha) {
  const int labels[] = {label};
  const Matrix z = logits;
  return kind == TaskLoss::kCe ? ce_loss<Scalar>(z, labels) : gce_loss<Scalar>(z, labels, alpha);
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.task += w * b.task;
  acc.embed_map += w * b.embed_map;
  acc.latent_map += w * b.latent_map;
  acc.distill += w * b.distill;
  acc.autoencoder += w * b.autoencoder;
  acc.interpretable += w * b.interpretable;
  acc.total += w * b.total;
}

void add_to(Vector& dst, const Vector& v) {
  if (dst.size() == 0) dst = v;
  else dst += v;
}
void add_to(Matrix& dst, const Matrix& v) {
  if (dst.size() == 0) dst = v;
  else dst += v;
}

bool is_classifier_param(const char* name) {
  return std::string_view(name).rfind("classifier.", 0) == 0;
}

template <typename Params>
void mask_head_only(Params& grads) {
  grads.for_each_param([](const char* name, auto& g) {
    if (!is_classifier_param(name)) g.setZero();
  });
}

// Shared epoch loop. 'batch_fn' fills gradients of the weighted objective
// and returns its breakdown; 'model_of' projects the trainable state onto
// the classifier used for validation.
template <typename Params, typename BatchFn, typename ModelOf>
TrainResult train_loop(Params& params, const TrainPlan& plan,
                       std::span<const EncodedExample> train,
                       std::span<const EncodedExample> val, BatchFn&& batch_fn,
                       ModelOf&& model_of) {
  plan.validate();
  TrainResult result;
  result.model = model_of(params);
  round_to_float(result.model);
  Adam<Params> adam(params, plan.adam);
  Params grads = params;
  std::mt19937_64 rng(plan.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  double best_acc = -1;
  int since_best = 0;
  for (int epoch = 1; epoch <= plan.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t steps = 0;
    bool diverged = false;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(plan.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(plan.batch_size));
      std::vector<const EncodedExample*> batch;
      std::vector<std::size_t> ids;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&train[order[k]]);
        ids.push_back(order[k]);
      }
      set_zero(grads);
      const LossBreakdown b = batch_fn(params, std::span<const EncodedExample* const>(batch),
                                       std::span<const std::size_t>(ids), &grads);
      if (!std::isfinite(b.total)) {
        diverged = true;
        break;
      }
      if (plan.head_only) mask_head_only(grads);
      adam.step(params, grads, plan.learning_rate);
      result.step_losses.push_back(b.total);
      accumulate(rec.train, b, 1.0);
      ++steps;
    }
    if (diverged) {
      result.diverged = true;
      break;
    }
    if (steps > 0) {
      const LossBreakdown sum = rec.train;
      rec.train = {};
      accumulate(rec.train, sum, 1.0 / static_cast<double>(steps));
    }
    const LstmClassifier current = model_of(params);
    if (!val.empty()) {
      const auto m = evaluate(current, val);
      rec.val_acc = m.acc;
      rec.val_f1 = m.macro_f1;
    }
    result.history.push_back(rec);
    const bool improved = val.empty() || rec.val_acc > best_acc;
    if (improved) {
      best_acc = rec.val_acc;
      result.best_epoch = epoch;
      result.model = current;
      round_to_float(result.model);
      since_best = 0;
    } else if (plan.patience > 0 && ++since_best >= plan.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace

TaskLoss parse_task_loss(std::string_view name) {
  if (name == "CE" || name == "ce") return TaskLoss::kCe;
  if (name == "GCE" || name == "gce") return TaskLoss::kGce;
  throw ConfigError("unknown task loss '" + std::string(name) + "' (expected CE or GCE)");
}

std::string task_loss_name(TaskLoss loss) { return loss == TaskLoss::kCe ? "CE" : "GCE"; }

void TrainPlan::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate must be > 0");
  }
  if (patience < 0) throw ConfigError("train.patience must be >= 0");
  weights.validate();
}

std::string TrainPlan::optimizer_description() const {
  std::ostringstream s;
  s << "adam(lr=" << learning_rate << ", beta1=" << adam.beta1 << ", beta2=" << adam.beta2
    << ", eps=" << adam.epsilon << ")";
  return s.str();
}

TrainResult train_conventional(const ModelConfig& config, const TrainPlan& plan,
                               std::span<const EncodedExample> train,
                               std::span<const EncodedExample> val) {
  LstmClassifier model = LstmClassifier::init(config);
  auto batch_fn = [&](const LstmClassifier& m, std::span<const EncodedExample* const> batch,
                      std::span<const std::size_t>, LstmClassifier* grads) {
    LossBreakdown out;
    const double w = 1.0 / static_cast<double>(batch.size());
    for (const auto* ex : batch) {
      const ForwardTrace tr = forward(m, *ex, false);
      const auto loss = task_loss(plan.task_loss, tr.logits, ex->label, plan.weights.gce_alpha);
      out.task += w * loss.value;
      if (grads) {
        TraceGradients up;
        up.logits = w * loss.grad.col(0);
        backward(m, tr, up, grads);
      }
    }
    out.total = out.task;
    return out;
  };
  return train_loop(model, plan, train, val, batch_fn, [](const LstmClassifier& m) { return m; });
}

TrainResult pretrain_full(const ModelConfig& config, const TrainPlan& plan,
                          std::span<const EncodedExample> train,
                          std::span<const EncodedExample> val) {
  return train_conventional(config, plan, train, val);
}

TeacherTrace teacher_trace(const LstmClassifier& teacher, const EncodedExample& example) {
  ForwardTrace tr = forward(teacher, example, false);
  return {std::move(tr.embeddings), std::move(tr.final_hidden), std::move(tr.logits)};
}

StudentBundle StudentBundle::init(const LstmClassifier& teacher, const ModelConfig& cfg) {
  StudentBundle b;
  b.student = LstmClassifier::init(cfg);
  b.embed_ae = Autoencoder::init(teacher.config.embed_dim, cfg.embed_dim, cfg.seed ^ kEmbedAeSalt);
  b.hidden_ae = Autoencoder::init(teacher.config.hidden_dim, cfg.hidden_dim, cfg.seed ^ kHiddenAeSalt);
  return b;
}

StudentBundle StudentBundle::zeros_like(const StudentBundle& other) {
  StudentBundle b = other;
  set_zero(b);
  return b;
}

LossBreakdown composite_batch(const StudentBundle& bundle, const LstmClassifier& teacher,
                              std::span<const EncodedExample* const> batch,
                              std::span<const TeacherTrace* const> teacher_traces,
                              const TrainPlan& plan, StudentBundle* grads) {
  const auto& f = plan.flags;
  const auto& lw = plan.weights;
  const auto& student = bundle.student;
  const bool need_teacher = f.embed_map || f.latent_map || f.distill || f.autoencoder;
  LossBreakdown out;
  if (batch.empty()) return out;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const EncodedExample& ex = *batch[k];
    const bool with_aspects = f.interpretable && student.config.has_aspects() && ex.aspect.has_value();
    const ForwardTrace st = forward(student, ex, with_aspects);
    TeacherTrace owned;
    const TeacherTrace* tt = nullptr;
    if (need_teacher) {
      if (!teacher_traces.empty()) {
        tt = teacher_traces[k];
      } else {
        owned = teacher_trace(teacher, ex);
        tt = &owned;
      }
    }
    TraceGradients up;
    LossBreakdown parts;

    const auto task = task_loss(plan.task_loss, st.logits, ex.label, lw.gce_alpha);
    parts.task = task.value;
    up.logits = (w * lw.lambda_task) * task.grad.col(0);

    if (f.distill) {
      const auto ld = distill_loss<Scalar>(Matrix(tt->logits), Matrix(st.logits), lw.temperature);
      parts.distill = ld.value;
      if (lw.lambda_map > 0) up.logits += (w * lw.lambda_map) * ld.grad.col(0);
    }

    Matrix embed_low;   // encoder output for the teacher embeddings
    Matrix hidden_low;  // encoder output for the teacher final hidden state
    Matrix d_embed_low;
    Matrix d_hidden_low;
    const bool has_tokens = st.length() > 0;
    if ((f.embed_map || f.autoencoder) && has_tokens) embed_low = ae_encode(bundle.embed_ae, tt->embeddings);
    if (f.latent_map || f.autoencoder) hidden_low = ae_encode(bundle.hidden_ae, Matrix(tt->final_hidden));

    if (f.embed_map && has_tokens) {
      const auto em = feature_map_loss<Scalar>(embed_low, st.embeddings);
      parts.embed_map = em.value;
      if (lw.lambda_map > 0) {
        up.embeddings = (w * lw.lambda_map) * em.grad_second;
        add_to(d_embed_low, (w * lw.lambda_map) * em.grad_first);
      }
    }
    if (f.latent_map) {
      const auto lm = feature_map_loss<Scalar>(hidden_low, Matrix(st.final_hidden));
      parts.latent_map = lm.value;
      if (lw.lambda_map > 0) {
        up.final_hidden = (w * lw.lambda_map) * lm.grad_second.col(0);
        add_to(d_hidden_low, (w * lw.lambda_map) * lm.grad_first);
      }
    }
    if (f.autoencoder) {
      const Matrix hidden_full = tt->final_hidden;
      const Matrix hidden_rec = ae_decode(bundle.hidden_ae, hidden_low);
      Matrix embed_rec;
      Matrix embed_full;
      if (has_tokens) {
        embed_full = tt->embeddings;
        embed_rec = ae_decode(bundle.embed_ae, embed_low);
      } else {
        embed_full = embed_rec = Matrix::Zero(teacher.config.embed_dim, 0);
      }
      const auto ae = ae_loss<Scalar>(embed_full, embed_rec, hidden_full, hidden_rec);
      parts.autoencoder = ae.value;
      if (lw.lambda_ae > 0 && grads) {
        const double s = w * lw.lambda_ae;
        if (has_tokens) {
          add_to(d_embed_low, ae_decode_backward(bundle.embed_ae, embed_low,
                                                 s * ae.grad_embed_rec, grads->embed_ae));
        }
        add_to(d_hidden_low, ae_decode_backward(bundle.hidden_ae, hidden_low,
                                                s * ae.grad_hidden_rec, grads->hidden_ae));
      }
    }
    if (with_aspects && has_tokens) {
      const auto& att = *st.attention;
      const auto il = interpretable_loss<Scalar>(Matrix(att.feature), Matrix(st.final_hidden));
      const auto al = aspect_alignment_loss<Scalar>(att.sentence_weights, *ex.aspect);
      parts.interpretable = il.value + al.value;
      if (lw.lambda_int > 0) {
        const double s = w * lw.lambda_int;
        up.aspect_feature = s * il.grad_first.col(0);
        add_to(up.final_hidden, Vector(s * il.grad_second.col(0)));
        up.aspect_weights = s * al.grad.col(0);
      }
    }

    if (grads) {
      if (d_embed_low.size() > 0) {
        ae_encode_backward(bundle.embed_ae, tt->embeddings, embed_low, d_embed_low, grads->embed_ae);
      }
      if (d_hidden_low.size() > 0) {
        ae_encode_backward(bundle.hidden_ae, Matrix(tt->final_hidden), hidden_low, d_hidden_low,
                           grads->hidden_ae);
      }
      backward(student, st, up, &grads->student);
    }
    accumulate(out, composite_loss(parts, lw), w);
  }
  return out;
}

CompressedResult train_compressed(const LstmClassifier& teacher, const ModelConfig& student_config,
                                  const TrainPlan& plan, std::span<const EncodedExample> train,
                                  std::span<const EncodedExample> val) {
  if (teacher.config.vocab_size != student_config.vocab_size) {
    throw ShapeError("teacher/student vocabulary mismatch: V=" +
                     std::to_string(teacher.config.vocab_size) + " vs " +
                     std::to_string(student_config.vocab_size));
  }
  if (teacher.config.num_classes != student_config.num_classes) {
    throw ShapeError("teacher/student class count mismatch");
  }
  StudentBundle bundle = StudentBundle::init(teacher, student_config);
  std::vector<TeacherTrace> cache;
  if (plan.cache_teacher) {
    cache.reserve(train.size());
    for (const auto& ex : train) cache.push_back(teacher_trace(teacher, ex));
  }
  auto batch_fn = [&](const StudentBundle& b, std::span<const EncodedExample* const> batch,
                      std::span<const std::size_t> ids, StudentBundle* grads) {
    std::vector<const TeacherTrace*> traces;
    if (!cache.empty()) {
      for (std::size_t id : ids) traces.push_back(&cache[id]);
    }
    return composite_batch(b, teacher, batch, traces, plan, grads);
  };
  CompressedResult result;
  static_cast<TrainResult&>(result) =
      train_loop(bundle, plan, train, val, batch_fn, [](const StudentBundle& b) { return b.student; });
  result.embed_ae = bundle.embed_ae;
  result.hidden_ae = bundle.hidden_ae;
  return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ostringstream s;
  s.precision(9);
  s << "epoch,task,embed_map,latent_map,distill,autoencoder,interpretable,total,val_acc,val_f1\n";
  for (const auto& r : history) {
    s << r.epoch << ',' << r.train.task << ',' << r.train.embed_map << ',' << r.train.latent_map
      << ',' << r.train.distill << ',' << r.train.autoencoder << ',' << r.train.interpretable << ','
      << r.train.total << ',' << r.val_acc << ',' << r.val_f1 << '\n';
  }
  write_file(path, s.str());
}

std::vector<AblationVariant> default_ablation_grid() {
  AblationFlags all;
  AblationFlags no_embed = all;
  no_embed.embed_map = false;
  AblationFlags no_latent = all;
  no_latent.latent_map = false;
  AblationFlags no_label = all;
  no_label.distill = false;
  return {{"w/o Embedding", no_embed}, {"w/o Latent", no_latent}, {"w/o Label", no_label}, {"All", all}};
}

std::vector<AblationRow> run_ablation(const AblationSpec& spec, const Vocabulary& vocab,
                                      std::span<const RawExample> train,
                                      std::span<const RawExample> val,
                                      std::span<const RawExample> test) {
  if (spec.grid.empty()) throw ConfigError("ablation grid is empty");
  if (spec.seeds.size() < 2) throw ConfigError("ablation needs at least 2 seeds");
  if (spec.teachers.size() != 1 && spec.teachers.size() != spec.seeds.size()) {
    throw ConfigError("ablation needs one teacher per seed or a single shared teacher");
  }
  const int max_len = spec.student_config.max_len;
  const auto train_enc = encode_all(train, vocab, max_len);
  const auto val_enc = encode_all(val, vocab, max_len);
  const auto test_enc = encode_all(test, vocab, max_len);

  struct Cell {
    std::size_t variant;
    std::size_t seed_index;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
    for (std::size_t v = 0; v < spec.grid.size(); ++v) cells.push_back({v, s});
  }
  auto run_cell = [&](const Cell& c) {
    const std::uint64_t seed = spec.seeds[c.seed_index];
    const auto& teacher = spec.teachers.size() == 1 ? spec.teachers[0] : spec.teachers[c.seed_index];
    ModelConfig cfg = spec.student_config;
    cfg.seed = seed;
    TrainPlan plan = spec.plan;
    plan.seed = seed;
    plan.flags = spec.grid[c.variant].flags;
    const auto trained = train_compressed(teacher, cfg, plan, train_enc, val_enc);
    const auto clean = evaluate(trained.model, test_enc);
    AttackSuiteOptions opts;
    opts.attack = AttackKind::kReplaceOne;
    opts.n_samples = std::min(spec.attack_samples, test.size());
    opts.seed = seed;
    const auto suite = run_attack_suite(trained.model, vocab, test, opts);
    AblationRow row;
    row.variant = spec.grid[c.variant].name;
    row.seed = seed;
    row.acc = clean.acc;
    row.f1 = clean.macro_f1;
    if (!suite.examples.empty()) {
      const auto adv = evaluate_adversarial(trained.model, vocab,
                                            {suite.examples, model_fingerprint(trained.model)});
      row.adv_acc = adv.acc;
      row.adv_f1 = adv.macro_f1;
    }
    return row;
  };

  std::vector<AblationRow> rows(cells.size());
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, spec.jobs));
  for (std::size_t start = 0; start < cells.size(); start += jobs) {
    std::vector<std::future<AblationRow>> running;
    const std::size_t end = std::min(cells.size(), start + jobs);
    for (std::size_t i = start; i < end; ++i) {
      running.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_cell,
                                   cells[i]));
    }
    for (std::size_t i = start; i < end; ++i) rows[i] = running[i - start].get();
  }
  return rows;
}

}  // namespace distilledge
