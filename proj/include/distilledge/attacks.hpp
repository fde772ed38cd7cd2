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

#ifndef DISTILLEDGE_ATTACKS_HPP_
#define DISTILLEDGE_ATTACKS_HPP_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distilledge/corpus.hpp"
#include "distilledge/netcore.hpp"
#include "json.hpp"

namespace distilledge {

using TokenSeq = std::vector<std::string>;

// Black-box view of a classifier: only output probabilities.
class BlackBoxModel {
 public:
  virtual ~BlackBoxModel() = default;
  virtual Vector predict_proba(std::span<const std::string> tokens) const = 0;
};

// White-box view: adds gradients w.r.t. the input embeddings and access to
// the embedding space for neighbour search.
class WhiteBoxModel : public BlackBoxModel {
 public:
  // Gradient of CE(label) w.r.t. each token's embedding, d x n.
  virtual Matrix grad_wrt_embeddings(std::span<const std::string> tokens,
                                     int label) const = 0;
  // Up to k in-vocabulary tokens nearest to 'token' by cosine similarity,
  // most similar first. Excludes the special tokens and 'token' itself.
  virtual std::vector<std::string> nearest_neighbors(const std::string& token,
                                                     int k) const = 0;
};

// Adapter exposing an LstmClassifier through both views; counts calls so
// callers can check black-box purity.
class ClassifierOracle final : public WhiteBoxModel {
 public:
  ClassifierOracle(const LstmClassifier& model, const Vocabulary& vocab);
  Vector predict_proba(std::span<const std::string> tokens) const override;
  Matrix grad_wrt_embeddings(std::span<const std::string> tokens,
                             int label) const override;
  std::vector<std::string> nearest_neighbors(const std::string& token,
                                             int k) const override;

  long long predict_calls() const { return predict_calls_; }
  long long gradient_calls() const { return gradient_calls_; }
  void reset_counters() { predict_calls_ = gradient_calls_ = 0; }

 private:
  std::vector<int> ids(std::span<const std::string> tokens) const;

  const LstmClassifier& model_;
  const Vocabulary& vocab_;
  Matrix unit_embeddings_;  // column-normalized copy of the embedding table
  mutable long long predict_calls_ = 0;
  mutable long long gradient_calls_ = 0;
};

class SynonymProvider {
 public:
  virtual ~SynonymProvider() = default;
  // Candidates never include 'token'; order is deterministic.
  virtual std::vector<std::string> lookup(const std::string& token) const = 0;
};

// JSON object token -> [candidates].
class StaticLexicon final : public SynonymProvider {
 public:
  StaticLexicon() = default;
  explicit StaticLexicon(std::map<std::string, std::vector<std::string>> entries);
  static StaticLexicon load(const std::filesystem::path& path);
  std::vector<std::string> lookup(const std::string& token) const override;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

enum class EditKind { kCharSwap, kWordSub };

struct Edit {
  int position = 0;
  std::string before;
  std::string after;
  EditKind kind = EditKind::kWordSub;
  friend bool operator==(const Edit&, const Edit&) = default;
};

struct AdversarialExample {
  std::string id;
  int label = 0;
  TokenSeq original;
  TokenSeq perturbed;
  std::vector<Edit> edits;
  std::string attack;
  bool success = false;  // predicted class changed
  long long queries = 0;
  int original_prediction = 0;
  int perturbed_prediction = 0;
  bool no_candidates = false;

  nlohmann::json to_json() const;
  static AdversarialExample from_json(const nlohmann::json& j);
};

inline constexpr int kUnlimitedBudget = std::numeric_limits<int>::max();

struct ReplaceOneOptions {
  int budget = 1;
  bool random_swap = false;  // swap a seeded random adjacent pair instead
  std::uint64_t seed = 0;
};

// Middle-pair swap used by Replaceone: positions (len/2 - 1, len/2).
std::string swap_middle_pair(const std::string& word);

AdversarialExample replaceone_attack(const BlackBoxModel& model,
                                     const TokenSeq& tokens, int label,
                                     const ReplaceOneOptions& options = {});

struct GradientOptions {
  int budget = 1;
  int pool_size = 50;
};

AdversarialExample gradient_attack(const WhiteBoxModel& model,
                                   const TokenSeq& tokens, int label,
                                   const GradientOptions& options = {});

AdversarialExample pwws_attack(const BlackBoxModel& model,
                               const TokenSeq& tokens, int label,
                               const SynonymProvider& synonyms,
                               int budget = kUnlimitedBudget);

// Replaces one uniformly chosen token with <unk>.
AdversarialExample random_attack(const BlackBoxModel& model,
                                 const TokenSeq& tokens, int label,
                                 std::uint64_t seed);

enum class AttackKind { kReplaceOne, kGradient, kPwws, kRandom };
AttackKind parse_attack_kind(std::string_view name);
std::string attack_name(AttackKind kind);

struct AttackSuiteOptions {
  AttackKind attack = AttackKind::kReplaceOne;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  bool only_correct = false;
  int budget = 0;  // 0: the attack's default
  int pool_size = 50;
  bool random_swap = false;
  const SynonymProvider* synonyms = nullptr;  // required for PWWS
};

struct AttackSummary {
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
  double success_rate = 0;
  double mean_queries = 0;
  double mean_edits = 0;
  bool degenerate = false;  // model output does not depend on the input
  long long gradient_calls = 0;
};

struct AttackSuiteResult {
  std::vector<AdversarialExample> examples;
  AttackSummary summary;
};

// Samples n_samples examples without replacement (seeded) and attacks each.
// Inputs are truncated to the model's max_len before attacking.
AttackSuiteResult run_attack_suite(const LstmClassifier& model,
                                   const Vocabulary& vocab,
                                   std::span<const RawExample> dataset,
                                   const AttackSuiteOptions& options);

// One JSON object per line; 'checkpoint' is stamped into every record.
std::string adversarial_jsonl(std::span<const AdversarialExample> examples,
                              const std::string& checkpoint_hash);
void save_adversarial(const std::filesystem::path& path,
                      std::span<const AdversarialExample> examples,
                      const std::string& checkpoint_hash);
struct AdvDataset {
  std::vector<AdversarialExample> examples;
  std::string checkpoint_hash;
};
AdvDataset load_adversarial(const std::filesystem::path& path);

}  // namespace distilledge

#endif  // DISTILLEDGE_ATTACKS_HPP_
