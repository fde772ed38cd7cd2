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

#ifndef DISTILLEDGE_PERSONALIZE_HPP_
#define DISTILLEDGE_PERSONALIZE_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distilledge/compressor.hpp"
#include "distilledge/corpus.hpp"
#include "distilledge/netcore.hpp"

namespace distilledge {

struct TemperatureGrid {
  std::vector<double> values{20, 50, 80, 100};
  void validate() const;
};

// On-device fine-tuning budget. The objective is
// lambda_task * L_T + lambda_map * KL(global || personal at T).
struct PersonalizePlan {
  TemperatureGrid grid;
  TrainPlan train = default_train();

  static TrainPlan default_train();
};

struct TemperatureOutcome {
  double temperature = 0;
  double val_acc = 0;
  double val_f1 = 0;
};

struct PersonalizationResult {
  std::string user_id;
  std::vector<TemperatureOutcome> per_temperature;
  double global_val_acc = 0;
  double global_val_f1 = 0;
  bool personal_chosen = false;
  std::optional<double> best_temperature;
  double test_acc = 0;  // of the chosen model
  double test_f1 = 0;
  double global_test_acc = 0;
  double global_test_f1 = 0;
  bool has_test = false;
  bool insufficient_data = false;  // empty train split
  bool selection_eligible = true;  // false when val is empty
  std::optional<LstmClassifier> personal_model;  // kept only when chosen

  double chosen_val_acc() const;
};

PersonalizationResult finetune_user(const LstmClassifier& global, const Vocabulary& vocab,
                                    const UserShard& shard, const PersonalizePlan& plan);

struct FleetReport {
  std::vector<PersonalizationResult> users;
  double mean_test_delta = 0;    // chosen - global test accuracy
  double median_test_delta = 0;
  std::size_t personal_count = 0;
};

FleetReport run_fleet(const LstmClassifier& global, const Vocabulary& vocab,
                      std::span<const UserShard> shards, const PersonalizePlan& plan);

// user_id, global_acc, best_T, personal_acc, chosen, test_acc, test_f1
std::string fleet_csv(const FleetReport& report);

}  // namespace distilledge

#endif  // DISTILLEDGE_PERSONALIZE_HPP_
