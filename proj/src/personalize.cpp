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

#include "distilledge/personalize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string_view>

#include "distilledge/errors.hpp"
#include "distilledge/evalreport.hpp"

namespace distilledge {
namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

LstmClassifier finetune_at(const LstmClassifier& global, std::span<const EncodedExample> train,
                           std::span<const Vector> global_logits, double temperature,
                           const TrainPlan& base) {
  TrainPlan plan = base;
  plan.weights.temperature = temperature;
  plan.patience = 0;
  const auto first = train.data();
  auto batch_fn = [&](const LstmClassifier& m, std::span<const EncodedExample* const> batch,
                      LstmClassifier* grads) {
    LossBreakdown out;
    const double w = 1.0 / static_cast<double>(batch.size());
    const auto& lw = plan.weights;
    for (const auto* ex : batch) {
      const ForwardTrace tr = forward(m, *ex, false);
      const int labels[] = {ex->label};
      const Matrix z = tr.logits;
      const auto task = plan.task_loss == TaskLoss::kCe ? ce_loss<Scalar>(z, labels)
                                                        : gce_loss<Scalar>(z, labels, lw.gce_alpha);
      const Matrix teacher = global_logits[static_cast<std::size_t>(ex - first)];
      const auto ld = distill_loss<Scalar>(teacher, z, temperature);
      LossBreakdown parts;
      parts.task = task.value;
      parts.distill = ld.value;
      const auto weighted = composite_loss(parts, lw);
      out.task += w * parts.task;
      out.distill += w * parts.distill;
      out.total += w * weighted.total;
      if (grads) {
        TraceGradients up;
        up.logits = w * (lw.lambda_task * task.grad.col(0) + lw.lambda_map * ld.grad.col(0));
        backward(m, tr, up, grads);
      }
    }
    return out;
  };
  // The final epoch's model is kept; selection happens in the caller.
  LstmClassifier model = global;
  Adam<LstmClassifier> adam(model, plan.adam);
  LstmClassifier grads = LstmClassifier::zeros(model.config);
  std::mt19937_64 rng(plan.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(plan.batch_size)) {
      const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(plan.batch_size));
      std::vector<const EncodedExample*> batch;
      for (std::size_t k = s; k < e; ++k) batch.push_back(&train[order[k]]);
      set_zero(grads);
      const auto b = batch_fn(model, batch, &grads);
      if (!std::isfinite(b.total)) return model;
      if (plan.head_only) {
        grads.for_each_param([](const char* name, auto& g) {
          if (std::string_view(name).rfind("classifier.", 0) != 0) g.setZero();
        });
      }
      adam.step(model, grads, plan.learning_rate);
    }
  }
  round_to_float(model);
  return model;
}

}  // namespace

void TemperatureGrid::validate() const {
  if (values.empty()) throw ConfigError("personalize.grid must not be empty");
  for (double t : values) {
    if (!(t > 0) || !std::isfinite(t)) throw ConfigError("personalize.grid values must be > 0");
  }
}

TrainPlan PersonalizePlan::default_train() {
  TrainPlan p;
  p.epochs = 5;
  p.learning_rate = 1e-4;
  p.patience = 0;
  return p;
}

double PersonalizationResult::chosen_val_acc() const {
  if (!personal_chosen) return global_val_acc;
  double best = global_val_acc;
  for (const auto& o : per_temperature) best = std::max(best, o.val_acc);
  return best;
}

PersonalizationResult finetune_user(const LstmClassifier& global, const Vocabulary& vocab,
                                    const UserShard& shard, const PersonalizePlan& plan) {
  plan.grid.validate();
  plan.train.validate();
  const int max_len = global.config.max_len;
  const auto train = encode_all(shard.train, vocab, max_len);
  const auto val = encode_all(shard.val, vocab, max_len);
  const auto test = encode_all(shard.test, vocab, max_len);

  PersonalizationResult r;
  r.user_id = shard.user_id;
  r.selection_eligible = shard.selection_eligible();
  r.has_test = !test.empty();
  if (!val.empty()) {
    const auto m = evaluate(global, val);
    r.global_val_acc = m.acc;
    r.global_val_f1 = m.macro_f1;
  }
  if (r.has_test) {
    const auto m = evaluate(global, test);
    r.global_test_acc = r.test_acc = m.acc;
    r.global_test_f1 = r.test_f1 = m.macro_f1;
  }
  if (train.empty()) {
    r.insufficient_data = true;
    return r;
  }

  std::vector<Vector> global_logits;
  global_logits.reserve(train.size());
  for (const auto& ex : train) global_logits.push_back(forward(global, ex, false).logits);

  std::vector<double> temps = plan.grid.values;
  std::sort(temps.begin(), temps.end());
  std::optional<LstmClassifier> best_model;
  double best_acc = -1;
  for (double t : temps) {
    LstmClassifier personal = finetune_at(global, train, global_logits, t, plan.train);
    TemperatureOutcome o;
    o.temperature = t;
    if (!val.empty()) {
      const auto m = evaluate(personal, val);
      o.val_acc = m.acc;
      o.val_f1 = m.macro_f1;
    }
    r.per_temperature.push_back(o);
    if (o.val_acc > best_acc) {
      best_acc = o.val_acc;
      r.best_temperature = t;
      best_model = std::move(personal);
    }
  }
  if (r.selection_eligible && best_acc > r.global_val_acc) {
    r.personal_chosen = true;
    if (r.has_test) {
      const auto m = evaluate(*best_model, test);
      r.test_acc = m.acc;
      r.test_f1 = m.macro_f1;
    }
    r.personal_model = std::move(best_model);
  }
  return r;
}

FleetReport run_fleet(const LstmClassifier& global, const Vocabulary& vocab,
                      std::span<const UserShard> shards, const PersonalizePlan& plan) {
  if (shards.empty()) throw ConfigError("personalization needs at least one user shard");
  FleetReport report;
  std::vector<double> deltas;
  for (const auto& shard : shards) {
    auto r = finetune_user(global, vocab, shard, plan);
    r.personal_model.reset();
    if (r.personal_chosen) ++report.personal_count;
    if (r.has_test) deltas.push_back(r.test_acc - r.global_test_acc);
    report.users.push_back(std::move(r));
  }
  if (!deltas.empty()) {
    double sum = 0;
    for (double d : deltas) sum += d;
    report.mean_test_delta = sum / static_cast<double>(deltas.size());
    std::sort(deltas.begin(), deltas.end());
    const std::size_t n = deltas.size();
    report.median_test_delta = n % 2 ? deltas[n / 2] : 0.5 * (deltas[n / 2 - 1] + deltas[n / 2]);
  }
  return report;
}

std::string fleet_csv(const FleetReport& report) {
  std::string out = "user_id,global_acc,best_T,personal_acc,chosen,test_acc,test_f1\n";
  for (const auto& u : report.users) {
    double personal_acc = 0;
    for (const auto& o : u.per_temperature) {
      if (u.best_temperature && o.temperature == *u.best_temperature) personal_acc = o.val_acc;
    }
    out += u.user_id + "," + fmt(u.global_val_acc) + "," +
           (u.best_temperature ? fmt(*u.best_temperature) : std::string()) + "," +
           (u.per_temperature.empty() ? std::string() : fmt(personal_acc)) + "," +
           (u.personal_chosen ? "personal" : "global") + "," + fmt(u.test_acc) + "," +
           fmt(u.test_f1) + "\n";
  }
  return out;
}

}  // namespace distilledge
