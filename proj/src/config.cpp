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

#include "distilledge/config.hpp"

#include <cstdlib>
#include <ctime>

#include "json.hpp"

#include "distilledge/errors.hpp"
#include "distilledge/hash.hpp"

namespace distilledge {
namespace {

using nlohmann::json;

json defaults() {
  return json::parse(R"({
  "seed": null,
  "data": {"format": "csv", "train": "", "val": "", "test": "", "aspects": "",
           "num_classes": 4, "max_len": 64, "vocab_size": 20000, "min_freq": 1},
  "model": {"full_dim": 100, "dim": 10, "full_task_loss": "ce"},
  "train": {"epochs": 10, "batch_size": 64, "lr": 0.001, "patience": 5,
            "task_loss": "gce", "cache_teacher": true, "head_only": false,
            "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
  "loss": {"lambda1": 0.2, "lambda2": 0.8, "lambda3": 0.5, "lambda4": 0.5,
           "T": 80.0, "alpha": 1.0},
  "scheme": {"embed_map": true, "latent_map": true, "distill": true,
             "autoencoder": true, "interpretable": true},
  "attack": {"kind": "replaceone", "n_samples": 1000, "budget": 0, "pool_size": 50,
             "only_correct": false, "random_swap": false, "synonyms": ""},
  "personalize": {"grid": [20, 50, 80, 100], "epochs": 5, "lr": 0.0001,
                  "batch_size": 64, "head_only": false},
  "ablation": {"seeds": [1, 2, 3], "attack_samples": 500}
})");
}

bool same_kind(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_number_unsigned() || v.is_number_integer();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

std::string kind_name(const json& def) {
  if (def.is_null()) return "integer or null";
  if (def.is_boolean()) return "boolean";
  if (def.is_number_integer()) return "integer";
  if (def.is_number()) return "number";
  if (def.is_string()) return "string";
  if (def.is_array()) return "array";
  return "object";
}

void merge(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& [k, v] : user.items()) {
    const std::string path = prefix.empty() ? k : prefix + "." + k;
    if (!base.contains(k)) throw ConfigError("unknown key " + path);
    json& slot = base[k];
    if (!same_kind(slot, v)) {
      throw ConfigError("type mismatch at " + path + ": expected " + kind_name(slot));
    }
    if (slot.is_object()) {
      merge(slot, v, path);
    } else {
      slot = v;
    }
  }
}

void apply_override(json& root, const std::string& key, const std::string& raw) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown key " + key);
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("cannot override section " + key);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  if (node->is_string() && !value.is_string()) value = raw;
  if (!same_kind(*node, value)) {
    throw ConfigError("type mismatch at " + key + ": expected " + kind_name(*node));
  }
  *node = value;
}

template <typename T>
T get(const json& root, const char* section, const char* key) {
  return root.at(section).at(key).get<T>();
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + " " + what);
}

template <typename Fn>
auto keyed(const std::string& key, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

Config build(json root, std::optional<std::uint64_t> env_seed) {
  Config c;
  if (root["seed"].is_null()) root["seed"] = env_seed.value_or(0);
  require(!root["seed"].is_number_integer() || root["seed"].get<long long>() >= 0, "seed",
          "must be >= 0");
  c.seed = root["seed"].get<std::uint64_t>();

  const auto& d = root["data"];
  c.data.format = keyed("data.format", [&] { return parse_data_format(d["format"].get<std::string>()); });
  c.data.train = d["train"];
  c.data.val = d["val"];
  c.data.test = d["test"];
  c.data.aspects = d["aspects"];
  c.data.num_classes = d["num_classes"];
  c.data.max_len = d["max_len"];
  require(c.data.num_classes >= 2, "data.num_classes", "must be >= 2");
  require(c.data.max_len >= 1, "data.max_len", "must be >= 1");
  require(d["vocab_size"].get<long long>() >= 3, "data.vocab_size", "must be >= 3");
  c.data.vocab_size = d["vocab_size"];
  c.data.min_freq = d["min_freq"];
  require(c.data.min_freq >= 1, "data.min_freq", "must be >= 1");

  c.full_dim = get<int>(root, "model", "full_dim");
  c.dim = get<int>(root, "model", "dim");
  require(c.full_dim >= 1, "model.full_dim", "must be >= 1");
  require(c.dim >= 1, "model.dim", "must be >= 1");
  c.full_task_loss = keyed("model.full_task_loss", [&] {
    return parse_task_loss(get<std::string>(root, "model", "full_task_loss"));
  });

  const auto& t = root["train"];
  c.train.epochs = t["epochs"];
  c.train.batch_size = t["batch_size"];
  c.train.learning_rate = t["lr"];
  c.train.patience = t["patience"];
  c.train.task_loss = keyed("train.task_loss", [&] { return parse_task_loss(t["task_loss"].get<std::string>()); });
  c.train.cache_teacher = t["cache_teacher"];
  c.train.head_only = t["head_only"];
  c.train.adam.beta1 = t["beta1"];
  c.train.adam.beta2 = t["beta2"];
  c.train.adam.epsilon = t["epsilon"];
  c.train.seed = c.seed;
  require(c.train.epochs >= 0, "train.epochs", "must be >= 0");
  require(c.train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(c.train.learning_rate > 0, "train.lr", "must be > 0");
  require(c.train.patience >= 0, "train.patience", "must be >= 0");
  require(c.train.adam.beta1 >= 0 && c.train.adam.beta1 < 1, "train.beta1", "must be in [0, 1)");
  require(c.train.adam.beta2 >= 0 && c.train.adam.beta2 < 1, "train.beta2", "must be in [0, 1)");
  require(c.train.adam.epsilon > 0, "train.epsilon", "must be > 0");

  const auto& l = root["loss"];
  c.train.weights.lambda_task = l["lambda1"];
  c.train.weights.lambda_map = l["lambda2"];
  c.train.weights.lambda_ae = l["lambda3"];
  c.train.weights.lambda_int = l["lambda4"];
  c.train.weights.temperature = l["T"];
  c.train.weights.gce_alpha = l["alpha"];
  c.train.weights.validate();

  const auto& s = root["scheme"];
  c.train.flags.embed_map = s["embed_map"];
  c.train.flags.latent_map = s["latent_map"];
  c.train.flags.distill = s["distill"];
  c.train.flags.autoencoder = s["autoencoder"];
  c.train.flags.interpretable = s["interpretable"];

  const auto& a = root["attack"];
  c.attack.attack = keyed("attack.kind", [&] { return parse_attack_kind(a["kind"].get<std::string>()); });
  require(a["n_samples"].get<long long>() >= 1, "attack.n_samples", "must be >= 1");
  require(a["budget"].get<long long>() >= 0, "attack.budget", "must be >= 0");
  require(a["pool_size"].get<long long>() >= 1, "attack.pool_size", "must be >= 1");
  c.attack.n_samples = a["n_samples"];
  c.attack.budget = a["budget"];
  c.attack.pool_size = a["pool_size"];
  c.attack.only_correct = a["only_correct"];
  c.attack.random_swap = a["random_swap"];
  c.attack.seed = c.seed;
  c.synonyms = a["synonyms"];

  const auto& p = root["personalize"];
  c.personalize.grid.values.clear();
  for (const auto& v : p["grid"]) {
    require(v.is_number(), "personalize.grid", "must hold numbers");
    c.personalize.grid.values.push_back(v.get<double>());
  }
  keyed("personalize.grid", [&] { c.personalize.grid.validate(); return 0; });
  c.personalize.train = PersonalizePlan::default_train();
  c.personalize.train.epochs = p["epochs"];
  c.personalize.train.learning_rate = p["lr"];
  c.personalize.train.batch_size = p["batch_size"];
  c.personalize.train.head_only = p["head_only"];
  c.personalize.train.task_loss = c.train.task_loss;
  c.personalize.train.weights = c.train.weights;
  c.personalize.train.adam = c.train.adam;
  c.personalize.train.seed = c.seed;
  require(c.personalize.train.epochs >= 0, "personalize.epochs", "must be >= 0");
  require(c.personalize.train.learning_rate > 0, "personalize.lr", "must be > 0");
  require(c.personalize.train.batch_size >= 1, "personalize.batch_size", "must be >= 1");

  const auto& ab = root["ablation"];
  for (const auto& v : ab["seeds"]) {
    require(v.is_number_unsigned(), "ablation.seeds", "must hold non-negative integers");
    c.ablation_seeds.push_back(v.get<std::uint64_t>());
  }
  require(c.ablation_seeds.size() >= 2, "ablation.seeds", "needs at least 2 seeds");
  require(ab["attack_samples"].get<long long>() >= 1, "ablation.attack_samples", "must be >= 1");
  c.ablation_attack_samples = ab["attack_samples"];

  c.resolved_json = root.dump(2);
  return c;
}

std::string iso_time(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string default_config_json() { return defaults().dump(2); }

std::string Config::hash() const { return sha256_hex(resolved_json); }

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv(kSeedEnv);
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (*end != '\0') throw ConfigError(std::string(kSeedEnv) + " must be a non-negative integer");
  return v;
}

Config parse_config_text(const std::string& text, const Overrides& overrides,
                         std::optional<std::uint64_t> env_seed) {
  json user = json::parse(text, nullptr, false);
  if (user.is_discarded()) throw ConfigError("config is not valid JSON");
  json root = defaults();
  merge(root, user, "");
  for (const auto& [k, v] : overrides) apply_override(root, k, v);
  return build(std::move(root), env_seed);
}

Config parse_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides,
                    std::optional<std::uint64_t> env_seed) {
  std::string text = "{}";
  if (path) {
    if (!std::filesystem::exists(*path)) {
      throw ConfigError("config file not found: " + path->string());
    }
    text = read_file(*path);
  }
  return parse_config_text(text, overrides, env_seed);
}

void RunManifest::write(const std::filesystem::path& dir) const {
  json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  if (config != nullptr) {
    j["config"] = json::parse(config->resolved_json);
    j["config_hash"] = config->hash();
    j["seed"] = config->seed;
    j["optimizer"] = config->train.optimizer_description();
  }
  j["dataset_fingerprint"] = dataset_fingerprint;
  j["started"] = iso_time(started);
  j["wall_seconds"] = wall_seconds;
  json files = json::array();
  for (const auto& p : outputs) {
    files.push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}});
  }
  j["outputs"] = files;
  write_file(dir / "run.json", j.dump(2) + "\n");
}

}  // namespace distilledge
