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

#ifndef DISTILLEDGE_CONFIG_HPP_
#define DISTILLEDGE_CONFIG_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distilledge/attacks.hpp"
#include "distilledge/compressor.hpp"
#include "distilledge/corpus.hpp"
#include "distilledge/personalize.hpp"

namespace distilledge {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSeedEnv = "DISTILLEDGE_SEED";

struct DataConfig {
  DataFormat format = DataFormat::kCsv;
  std::string train;
  std::string val;
  std::string test;
  std::string aspects;  // lexicon path, optional
  int num_classes = 4;
  int max_len = kDefaultMaxLen;
  std::size_t vocab_size = 20000;
  int min_freq = 1;
};

struct Config {
  std::uint64_t seed = 0;
  DataConfig data;
  int full_dim = 100;
  int dim = 10;
  TaskLoss full_task_loss = TaskLoss::kCe;
  TrainPlan train;  // compressed training; train-full reuses the schedule
  AttackSuiteOptions attack;
  std::string synonyms;  // lexicon path for PWWS
  PersonalizePlan personalize;
  std::vector<std::uint64_t> ablation_seeds;
  std::size_t ablation_attack_samples = 500;

  std::string resolved_json;  // every key, canonical order

  std::string hash() const;  // sha256 of resolved_json
};

// Dotted-path overrides such as {"loss.T", "50"}. A value that parses as
// JSON is taken as such, otherwise as a string.
using Overrides = std::vector<std::pair<std::string, std::string>>;

// Fills defaults, rejects unknown keys and type mismatches, and validates
// constraints. Errors are ConfigError naming the key path. 'env_seed' is
// the fallback when the file does not set "seed".
Config parse_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides,
                    std::optional<std::uint64_t> env_seed = std::nullopt);
Config parse_config_text(const std::string& text, const Overrides& overrides,
                         std::optional<std::uint64_t> env_seed = std::nullopt);

// Seed from DISTILLEDGE_SEED, if set and numeric.
std::optional<std::uint64_t> seed_from_env();

std::string default_config_json();

struct RunManifest {
  std::string command;
  const Config* config = nullptr;
  std::string dataset_fingerprint;
  std::chrono::system_clock::time_point started;
  double wall_seconds = 0;
  std::vector<std::filesystem::path> outputs;  // hashed at write time

  // Writes <dir>/run.json.
  void write(const std::filesystem::path& dir) const;
};

}  // namespace distilledge

#endif  // DISTILLEDGE_CONFIG_HPP_
