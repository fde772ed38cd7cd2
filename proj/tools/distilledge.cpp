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

// distilledge: command-line driver for the training, attack, evaluation and
// reporting pipeline. Every subcommand writes its artifacts plus a run.json
// manifest under --out.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "distilledge/attacks.hpp"
#include "distilledge/compressor.hpp"
#include "distilledge/config.hpp"
#include "distilledge/corpus.hpp"
#include "distilledge/errors.hpp"
#include "distilledge/evalreport.hpp"
#include "distilledge/explain.hpp"
#include "distilledge/hash.hpp"
#include "distilledge/log.hpp"
#include "distilledge/netcore.hpp"
#include "distilledge/personalize.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace distilledge {
namespace {

// Bad invocation (exit 2) that is not a configuration error.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& m) : Error("usage", m) {}
};

struct Flags {
  std::string config;
  std::string out;
  std::string vocab;
  std::string full;
  std::string model;
  std::string adv;
  std::string shards;
  std::string runs;
  std::string attack;
  int jobs = 1;
  bool only_correct = false;
  bool head_only = false;
  Overrides overrides;
};

// Turns leftover "--a.b value" / "--a.b=value" pairs into overrides.
Overrides parse_overrides(const std::vector<std::string>& extras) {
  Overrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
      throw UsageError("unexpected argument '" + arg + "'");
    }
    std::string key = arg.substr(2);
    if (const auto eq = key.find('='); eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) throw UsageError("missing value for --" + key);
    out.emplace_back(key, extras[++i]);
  }
  return out;
}

// Reads a config file; a run.json manifest is accepted and its embedded
// config is used.
std::string config_text(const fs::path& path) {
  if (!fs::exists(path)) throw DependencyError("missing config file: " + path.string());
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("tool_version") && j.contains("config")) {
    return j["config"].dump();
  }
  return text;
}

// Loads the config and rewrites relative data paths against the config
// file's directory, so the resolved config names absolute paths.
Config load_config(const Flags& flags) {
  std::string text = "{}";
  fs::path base = fs::current_path();
  if (!flags.config.empty()) {
    text = config_text(flags.config);
    base = fs::absolute(flags.config).parent_path();
  }
  const auto env_seed = seed_from_env();
  Config c = parse_config_text(text, flags.overrides, env_seed);
  Overrides fixed = flags.overrides;
  bool changed = false;
  auto absolutize = [&](const std::string& key, const std::string& value) {
    if (value.empty() || fs::path(value).is_absolute()) return;
    fixed.emplace_back(key, json((base / value).lexically_normal().string()).dump());
    changed = true;
  };
  absolutize("data.train", c.data.train);
  absolutize("data.val", c.data.val);
  absolutize("data.test", c.data.test);
  absolutize("data.aspects", c.data.aspects);
  absolutize("attack.synonyms", c.synonyms);
  if (changed) c = parse_config_text(text, fixed, env_seed);
  return c;
}

fs::path require_artifact(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
  fs::path p = fs::absolute(value);
  if (!fs::exists(p)) throw DependencyError("missing artifact " + p.string() + " (" + flag + ")");
  return p;
}

fs::path require_data(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string(key) + ": no file configured");
  if (!fs::exists(value)) throw DependencyError("missing data file " + value + " (" + key + ")");
  return value;
}

// Collects the fingerprint inputs and outputs of one invocation.
class Run {
 public:
  Run(std::string command, const Flags& flags, Config config)
      : command_(std::move(command)),
        config_(std::move(config)),
        started_(std::chrono::system_clock::now()),
        t0_(std::chrono::steady_clock::now()) {
    if (flags.out.empty()) throw UsageError("missing required flag --out");
    out_ = fs::absolute(flags.out);
    fs::create_directories(out_);
  }

  const Config& config() const { return config_; }
  const fs::path& out() const { return out_; }

  void add_input(const fs::path& path) { inputs_.push_back(sha256_file(path)); }
  fs::path output(const std::string& name) {
    outputs_.push_back(out_ / name);
    return out_ / name;
  }
  void record_arg(const std::string& flag, const std::string& value) {
    command_ += " " + flag + " " + value;
  }

  DatasetSchema schema() const {
    DatasetSchema s;
    s.num_classes = config_.data.num_classes;
    if (!config_.data.aspects.empty()) {
      s.aspects = load_aspect_lexicon(require_data(config_.data.aspects, "data.aspects"));
    }
    return s;
  }

  std::vector<RawExample> load(const std::string& path, const char* key) {
    const fs::path p = require_data(path, key);
    add_input(p);
    auto loaded = load_dataset(p, config_.data.format, schema());
    if (!loaded.malformed.empty()) {
      warn_once(p.string() + ": skipped " + std::to_string(loaded.malformed.size()) +
                " malformed rows (first: row " + std::to_string(loaded.malformed[0].row) + ", " +
                loaded.malformed[0].reason + ")");
    }
    return std::move(loaded.examples);
  }

  void finish() {
    RunManifest m;
    m.command = command_;
    m.config = &config_;
    std::string joined;
    for (const auto& h : inputs_) joined += h + "\n";
    m.dataset_fingerprint = sha256_hex(joined);
    m.started = started_;
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    m.outputs = outputs_;
    m.write(out_);
  }

 private:
  std::string command_;
  Config config_;
  fs::path out_;
  std::vector<std::string> inputs_;
  std::vector<fs::path> outputs_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point t0_;
};

Vocabulary load_vocab(Run& run, const Flags& flags) {
  const fs::path p = require_artifact(flags.vocab, "--vocab");
  run.record_arg("--vocab", p.string());
  return Vocabulary::load(p);
}

LstmClassifier load_checkpoint(Run& run, const std::string& value, const char* flag,
                               json* meta = nullptr) {
  const fs::path p = require_artifact(value, flag);
  run.record_arg(flag, p.string());
  const Checkpoint ckpt = Checkpoint::load(p);
  if (meta) *meta = ckpt.meta;
  return from_checkpoint(ckpt);
}

void check_vocab(const LstmClassifier& model, const Vocabulary& vocab) {
  if (static_cast<int>(vocab.size()) != model.config.vocab_size) {
    throw ShapeError("vocabulary has " + std::to_string(vocab.size()) +
                     " tokens but the model expects " +
                     std::to_string(model.config.vocab_size));
  }
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json history_json(const TrainResult& r) {
  return {{"best_epoch", r.best_epoch},
          {"epochs_run", r.history.size()},
          {"early_stopped", r.early_stopped},
          {"diverged", r.diverged}};
}

int cmd_build_vocab(const Flags& flags) {
  Run run("build-vocab", flags, load_config(flags));
  const auto& c = run.config();
  const auto train = run.load(c.data.train, "data.train");
  const Vocabulary vocab = Vocabulary::build(train, c.data.vocab_size, c.data.min_freq);
  vocab.save(run.output("vocab.json"));
  run.finish();
  return 0;
}

int cmd_train_full(const Flags& flags) {
  Run run("train-full", flags, load_config(flags));
  const auto& c = run.config();
  const Vocabulary vocab = load_vocab(run, flags);
  const auto train = encode_all(run.load(c.data.train, "data.train"), vocab, c.data.max_len);
  const auto val = encode_all(run.load(c.data.val, "data.val"), vocab, c.data.max_len);
  ModelConfig mc = ModelConfig::full(static_cast<int>(vocab.size()), c.data.num_classes, c.full_dim);
  mc.max_len = c.data.max_len;
  mc.seed = c.seed;
  TrainPlan plan = c.train;
  plan.task_loss = c.full_task_loss;
  const TrainResult r = pretrain_full(mc, plan, train, val);
  save_model(run.output("model.ckpt"), r.model,
             {{"role", "full"}, {"task_loss", task_loss_name(plan.task_loss)},
              {"scheme", "conventional"}, {"vocab", vocab.fingerprint()}});
  write_history_csv(run.output("history.csv"), r.history);
  write_json(run.output("train.json"), history_json(r));
  run.finish();
  return 0;
}

std::string scheme_name(const AblationFlags& f) {
  if (f == AblationFlags{}) return "ours";
  if (f == AblationFlags::none()) return "conventional";
  std::string s = "ours";
  if (!f.embed_map) s += "-embed";
  if (!f.latent_map) s += "-latent";
  if (!f.distill) s += "-label";
  if (!f.autoencoder) s += "-ae";
  if (!f.interpretable) s += "-int";
  return s;
}

ModelConfig student_config(const Config& c, const Vocabulary& vocab, const DatasetSchema& schema) {
  ModelConfig mc = ModelConfig::compressed(c.dim, static_cast<int>(vocab.size()), c.data.num_classes);
  mc.max_len = c.data.max_len;
  mc.seed = c.seed;
  mc.num_aspects = c.train.flags.interpretable ? static_cast<int>(schema.aspects.size()) : 0;
  return mc;
}

int cmd_train_compressed(const Flags& flags) {
  Run run("train-compressed", flags, load_config(flags));
  const auto& c = run.config();
  const Vocabulary vocab = load_vocab(run, flags);
  const LstmClassifier teacher = load_checkpoint(run, flags.full, "--full");
  check_vocab(teacher, vocab);
  const auto train = encode_all(run.load(c.data.train, "data.train"), vocab, c.data.max_len);
  const auto val = encode_all(run.load(c.data.val, "data.val"), vocab, c.data.max_len);
  const ModelConfig mc = student_config(c, vocab, run.schema());
  const CompressedResult r = train_compressed(teacher, mc, c.train, train, val);
  save_model(run.output("model.ckpt"), r.model,
             {{"role", "compressed"}, {"task_loss", task_loss_name(c.train.task_loss)},
              {"scheme", scheme_name(c.train.flags)}, {"vocab", vocab.fingerprint()}});
  write_history_csv(run.output("history.csv"), r.history);
  json info = history_json(r);
  const ParamCount pc = param_count(mc);
  info["params"] = {{"embedding", pc.embedding}, {"lstm", pc.lstm}, {"heads", pc.heads},
                    {"total", pc.total}};
  write_json(run.output("train.json"), info);
  run.finish();
  return 0;
}

int cmd_attack(const Flags& flags) {
  Config cfg = load_config(flags);
  if (!flags.attack.empty()) cfg.attack.attack = parse_attack_kind(flags.attack);
  if (flags.only_correct) cfg.attack.only_correct = true;
  Run run("attack", flags, std::move(cfg));
  if (!flags.attack.empty()) run.record_arg("--attack", flags.attack);
  if (flags.only_correct) run.record_arg("--only-correct", "");
  const auto& c = run.config();
  const Vocabulary vocab = load_vocab(run, flags);
  const LstmClassifier model = load_checkpoint(run, flags.model, "--model");
  check_vocab(model, vocab);
  const auto test = run.load(c.data.test, "data.test");
  AttackSuiteOptions options = c.attack;
  std::optional<StaticLexicon> lexicon;
  if (options.attack == AttackKind::kPwws) {
    if (c.synonyms.empty()) throw ConfigError("attack.synonyms: PWWS needs a synonym lexicon");
    const fs::path p = require_data(c.synonyms, "attack.synonyms");
    run.add_input(p);
    lexicon = StaticLexicon::load(p);
    options.synonyms = &*lexicon;
  }
  const AttackSuiteResult r = run_attack_suite(model, vocab, test, options);
  save_adversarial(run.output("adv.jsonl"), r.examples, model_fingerprint(model));
  const auto& s = r.summary;
  write_json(run.output("summary.json"),
             {{"attack", attack_name(options.attack)},
              {"attempted", s.attempted},
              {"succeeded", s.succeeded},
              {"success_rate", s.success_rate},
              {"mean_queries", s.mean_queries},
              {"mean_edits", s.mean_edits},
              {"degenerate", s.degenerate},
              {"gradient_calls", s.gradient_calls}});
  run.finish();
  return 0;
}

int cmd_eval(const Flags& flags) {
  Run run("eval", flags, load_config(flags));
  const auto& c = run.config();
  const Vocabulary vocab = load_vocab(run, flags);
  json meta;
  const LstmClassifier model = load_checkpoint(run, flags.model, "--model", &meta);
  check_vocab(model, vocab);
  const auto test_raw = run.load(c.data.test, "data.test");
  const auto test = encode_all(test_raw, vocab, model.config.max_len);
  MetricsReport clean = evaluate(model, test);
  json out = {{"clean", clean.to_json()}};

  ResultRow row;
  row.run_id = run.out().filename().string();
  row.dataset = fs::path(c.data.test).parent_path().filename().string();
  row.model = "d=" + std::to_string(model.config.embed_dim);
  row.task_loss = meta.value("task_loss", "");
  row.scheme = meta.value("scheme", "");
  row.acc = clean.acc;
  row.f1 = clean.macro_f1;
  if (!flags.adv.empty()) {
    const fs::path adv_path = require_artifact(flags.adv, "--adv");
    run.record_arg("--adv", adv_path.string());
    const AdvDataset adv = load_adversarial(adv_path);
    const MetricsReport a = evaluate_adversarial(model, vocab, adv);
    out["adversarial"] = a.to_json();
    if (a.adversarial) {
      row.attack = a.adversarial->attack;
      row.adv_acc = a.adversarial->adv_acc;
      row.adv_f1 = a.adversarial->adv_f1;
    }
  }
  write_json(run.output("metrics.json"), out);
  write_json(run.output("result.json"), row.to_json());
  run.finish();
  return 0;
}

int cmd_explain(const Flags& flags) {
  Run run("explain", flags, load_config(flags));
  const auto& c = run.config();
  const Vocabulary vocab = load_vocab(run, flags);
  const LstmClassifier model = load_checkpoint(run, flags.model, "--model");
  check_vocab(model, vocab);
  if (!model.config.has_aspects()) {
    throw CapabilityError("model has no aspect embeddings; train it with scheme.interpretable");
  }
  const auto test = encode_all(run.load(c.data.test, "data.test"), vocab, model.config.max_len);
  const HitRatioReport r = hit_ratio(model, test);
  write_file(run.output("hits.csv"), hit_records_csv(r.records, model.config.num_aspects));
  write_json(run.output("hit_ratio.json"), {{"hit_ratio", r.ratio},
                                            {"n", r.records.size()},
                                            {"ties", r.ties},
                                            {"degenerate_ties", r.degenerate_ties}});
  run.finish();
  return 0;
}

int cmd_personalize(const Flags& flags) {
  Config cfg = load_config(flags);
  if (flags.head_only) cfg.personalize.train.head_only = true;
  Run run("personalize", flags, std::move(cfg));
  if (flags.head_only) run.record_arg("--head-only", "");
  const auto& c = run.config();
  const Vocabulary vocab = load_vocab(run, flags);
  const LstmClassifier global = load_checkpoint(run, flags.model, "--model");
  check_vocab(global, vocab);
  const fs::path shards_path = require_artifact(flags.shards, "--shards");
  run.record_arg("--shards", shards_path.string());
  run.add_input(shards_path);
  const auto shards = load_user_shards(shards_path, run.schema());
  const FleetReport report = run_fleet(global, vocab, shards, c.personalize);
  write_file(run.output("fleet.csv"), fleet_csv(report));
  json users = json::array();
  for (const auto& u : report.users) {
    json t = json::array();
    for (const auto& o : u.per_temperature) {
      t.push_back({{"T", o.temperature}, {"val_acc", o.val_acc}, {"val_f1", o.val_f1}});
    }
    users.push_back({{"user_id", u.user_id},
                     {"global_val_acc", u.global_val_acc},
                     {"personal_chosen", u.personal_chosen},
                     {"best_T", u.best_temperature ? json(*u.best_temperature) : json(nullptr)},
                     {"test_acc", u.test_acc},
                     {"global_test_acc", u.global_test_acc},
                     {"insufficient_data", u.insufficient_data},
                     {"temperatures", t}});
  }
  write_json(run.output("fleet.json"), {{"users", users},
                                        {"personal_count", report.personal_count},
                                        {"mean_test_delta", report.mean_test_delta},
                                        {"median_test_delta", report.median_test_delta}});
  run.finish();
  return 0;
}

int cmd_ablate(const Flags& flags) {
  Run run("ablate", flags, load_config(flags));
  run.record_arg("--jobs", std::to_string(flags.jobs));
  const auto& c = run.config();
  const Vocabulary vocab = load_vocab(run, flags);
  const LstmClassifier teacher = load_checkpoint(run, flags.full, "--full");
  check_vocab(teacher, vocab);
  const auto train = run.load(c.data.train, "data.train");
  const auto val = run.load(c.data.val, "data.val");
  const auto test = run.load(c.data.test, "data.test");
  AblationSpec spec;
  spec.grid = default_ablation_grid();
  spec.seeds = c.ablation_seeds;
  spec.teachers = {teacher};
  spec.student_config = student_config(c, vocab, run.schema());
  spec.plan = c.train;
  spec.attack_samples = c.ablation_attack_samples;
  spec.jobs = flags.jobs;
  const auto rows = run_ablation(spec, vocab, train, val, test);
  std::string csv = "variant,seed,acc,f1,adv_acc,adv_f1\n";
  json j = json::array();
  for (const auto& r : rows) {
    csv += r.variant + "," + std::to_string(r.seed) + "," + std::to_string(r.acc) + "," +
           std::to_string(r.f1) + "," + std::to_string(r.adv_acc) + "," +
           std::to_string(r.adv_f1) + "\n";
    j.push_back({{"variant", r.variant}, {"seed", r.seed}, {"acc", r.acc}, {"f1", r.f1},
                 {"adv_acc", r.adv_acc}, {"adv_f1", r.adv_f1}});
  }
  write_file(run.output("ablation.csv"), csv);
  write_json(run.output("ablation.json"), j);
  run.finish();
  return 0;
}

int cmd_report(const Flags& flags) {
  if (flags.runs.empty()) throw UsageError("missing required flag --runs");
  const fs::path runs = fs::absolute(flags.runs);
  if (!fs::is_directory(runs)) throw DependencyError("missing run directory " + runs.string());
  const fs::path out = flags.out.empty() ? fs::path() : fs::absolute(flags.out);
  std::vector<fs::path> found;
  for (const auto& e : fs::recursive_directory_iterator(runs)) {
    if (!e.is_regular_file() || e.path().filename() != "result.json") continue;
    if (!out.empty() && e.path().parent_path() == out) continue;
    found.push_back(e.path());
  }
  if (found.empty()) throw UsageError("no result.json under " + runs.string());
  std::sort(found.begin(), found.end());
  Run run("report", flags, load_config(flags));
  run.record_arg("--runs", runs.string());
  std::vector<ResultRow> rows;
  for (const auto& p : found) {
    run.add_input(p);
    try {
      rows.push_back(ResultRow::from_json(json::parse(read_file(p))));
    } catch (const json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
  }
  const EmittedReport emitted = emit_report(rows, run.out());
  for (const auto& f : emitted.files) run.output(f.filename().string());
  run.finish();
  return 0;
}

int exit_code(const Error& e) {
  return e.kind() == "config" || e.kind() == "usage" ? 2 : 1;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json({{"error", kind}, {"message", message}}).dump() << std::endl;
}

int run_main(int argc, char** argv) {
  CLI::App app{"distilledge: compressed, robust and explainable text classifiers"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kToolVersion);
  Flags flags;

  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Flags&);
    std::vector<std::string> artifacts;
  };
  const std::vector<Command> commands = {
      {"build-vocab", "Build the vocabulary from data.train", cmd_build_vocab, {}},
      {"train-full", "Train the full (teacher) model", cmd_train_full, {"vocab"}},
      {"train-compressed", "Train a compressed model against a full one", cmd_train_compressed,
       {"vocab", "full"}},
      {"attack", "Generate adversarial examples for data.test", cmd_attack, {"vocab", "model"}},
      {"eval", "Clean and adversarial metrics", cmd_eval, {"vocab", "model", "adv"}},
      {"explain", "Aspect attention hit ratio", cmd_explain, {"vocab", "model"}},
      {"personalize", "Per-user fine-tuning and selection", cmd_personalize,
       {"vocab", "model", "shards"}},
      {"ablate", "Layer-contribution ablation over seeds", cmd_ablate, {"vocab", "full"}},
      {"report", "Collect result.json files into tables and a chart", cmd_report, {}},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->allow_extras();
    sub->add_option("--config", flags.config, "JSON config file (or a run.json)");
    sub->add_option("--out", flags.out, "Output directory");
    for (const auto& a : cmd.artifacts) {
      std::string* slot = a == "vocab"    ? &flags.vocab
                          : a == "full"   ? &flags.full
                          : a == "model"  ? &flags.model
                          : a == "adv"    ? &flags.adv
                                          : &flags.shards;
      sub->add_option("--" + a, *slot);
    }
    const std::string name = cmd.name;
    if (name == "attack") {
      sub->add_option("--attack", flags.attack, "replaceone | gradient | pwws | random");
      sub->add_flag("--only-correct", flags.only_correct);
    }
    if (name == "personalize") sub->add_flag("--head-only", flags.head_only);
    if (name == "ablate") sub->add_option("--jobs", flags.jobs)->check(CLI::PositiveNumber);
    if (name == "report") sub->add_option("--runs", flags.runs, "Directory of runs");
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }
  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    flags.overrides = parse_overrides(sub->remaining());
    return cmd->fn(flags);
  }
  return 2;
}

}  // namespace
}  // namespace distilledge

int main(int argc, char** argv) {
  try {
    return distilledge::run_main(argc, argv);
  } catch (const distilledge::Error& e) {
    distilledge::print_error(e.kind(), e.what());
    return distilledge::exit_code(e);
  } catch (const std::exception& e) {
    distilledge::print_error("internal", e.what());
    return 1;
  }
}
