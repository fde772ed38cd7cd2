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

#ifndef DISTILLEDGE_EVALREPORT_HPP_
#define DISTILLEDGE_EVALREPORT_HPP_

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distilledge/attacks.hpp"
#include "distilledge/corpus.hpp"
#include "distilledge/netcore.hpp"
#include "json.hpp"

namespace distilledge {

using ConfusionMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct AdversarialMetrics {
  std::string attack;
  double adv_acc = 0;
  double adv_f1 = 0;
  double success_rate = 0;
};

struct MetricsReport {
  double acc = 0;
  double macro_f1 = 0;
  std::vector<ClassScores> per_class;
  long long n = 0;
  std::string dataset_fingerprint;
  ConfusionMatrix confusion;  // rows: truth, cols: prediction
  std::optional<AdversarialMetrics> adversarial;

  nlohmann::json to_json() const;
};

// Lowest index wins ties.
int argmax_lowest(const Vector& scores);

// Classes with a 0/0 precision or recall get f1 = 0 and still count toward
// the unweighted mean.
MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion);
MetricsReport metrics_from_predictions(std::span<const int> truth,
                                       std::span<const int> predicted,
                                       int num_classes);

std::vector<int> predict_labels(const LstmClassifier& model,
                                std::span<const EncodedExample> dataset);
std::string dataset_fingerprint(std::span<const EncodedExample> dataset);

MetricsReport evaluate(const LstmClassifier& model,
                       std::span<const EncodedExample> dataset);

// Scores the perturbed sequences with their original labels. The adversarial
// set must have been produced against this exact model.
MetricsReport evaluate_adversarial(const LstmClassifier& model,
                                   const Vocabulary& vocab,
                                   const AdvDataset& adv);

struct ResultRow {
  std::string run_id;
  std::string dataset;
  std::string model;
  std::string task_loss;
  std::string scheme;
  std::string attack;  // empty for clean-only rows
  double acc = 0;
  double f1 = 0;
  std::optional<double> adv_acc;
  std::optional<double> adv_f1;
  std::optional<double> hit_ratio;

  nlohmann::json to_json() const;
  static ResultRow from_json(const nlohmann::json& j);
};

std::string results_csv(std::span<const ResultRow> rows);
// One row per (dataset, model, task_loss, scheme) with Clean Acc/F1 and a
// column group per attack.
std::string results_markdown(std::span<const ResultRow> rows);
// Grouped bars: clean accuracy and each attack's adversarial accuracy per
// configuration.
std::string accuracy_chart_svg(std::span<const ResultRow> rows);

struct EmittedReport {
  std::vector<std::filesystem::path> files;
};
// Writes results.csv, results.md and accuracy.svg under 'dir'.
EmittedReport emit_report(std::span<const ResultRow> rows,
                          const std::filesystem::path& dir);

}  // namespace distilledge

#endif  // DISTILLEDGE_EVALREPORT_HPP_
