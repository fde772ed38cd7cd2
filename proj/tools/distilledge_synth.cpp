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

// distilledge-synth: writes the synthetic corpora used by the tests and the
// bundled toy pipeline.
//
//   distilledge-synth topic  --out DIR [--seed N] [--train N --val N --test N]
//   distilledge-synth aspect --out DIR [--seed N] [--train N --val N --test N]
//   distilledge-synth fleet  --out DIR [--seed N] [--users N --shifted N]
//   distilledge-synth toy    --out DIR

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "distilledge/errors.hpp"
#include "distilledge/hash.hpp"
#include "distilledge/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace distilledge {
namespace {

struct Sizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

void write_splits(const fs::path& dir, const SplitCorpus& c,
                  std::span<const std::string> aspect_names = {}) {
  fs::create_directories(dir);
  write_file(dir / "train.csv", dataset_csv(c.train, aspect_names));
  write_file(dir / "val.csv", dataset_csv(c.val, aspect_names));
  write_file(dir / "test.csv", dataset_csv(c.test, aspect_names));
  write_file(dir / "synonyms.json", json(group_synonyms(c.word_groups, 3)).dump() + "\n");
}

void write_aspects(const fs::path& dir, std::span<const std::string> names) {
  json j = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = i;
  write_file(dir / "aspects.json", j.dump(2) + "\n");
}

void apply(const Sizes& s, std::size_t& train, std::size_t& val, std::size_t& test) {
  if (s.train) train = s.train;
  if (s.val) val = s.val;
  if (s.test) test = s.test;
}

// A small aspect-labelled corpus, a three-user fleet (the last user with
// classes 0 and 1 swapped) and a config wired to both.
void write_toy(const fs::path& dir) {
  AspectCorpusOptions o;
  o.train = 400;
  o.val = 100;
  o.test = 100;
  o.seed = 7;
  const AspectCorpus corpus = make_aspect_corpus(o);
  write_splits(dir, corpus.splits, corpus.aspect_names);
  write_aspects(dir, corpus.aspect_names);

  AspectCorpusOptions uo = o;
  uo.train = 3 * 60;
  uo.val = 3 * 30;
  uo.test = 3 * 30;
  uo.seed = 8;
  const AspectCorpus pool = make_aspect_corpus(uo);
  std::vector<UserShard> users;
  for (std::size_t u = 0; u < 3; ++u) {
    UserShard shard;
    shard.user_id = "user" + std::to_string(u);
    auto take = [&](const std::vector<RawExample>& src, std::size_t n) {
      std::vector<RawExample> out(src.begin() + static_cast<std::ptrdiff_t>(u * n),
                                  src.begin() + static_cast<std::ptrdiff_t>((u + 1) * n));
      if (u == 2) {
        for (auto& ex : out) {
          if (ex.label <= 1) ex.label = 1 - ex.label;
        }
      }
      return out;
    };
    shard.train = take(pool.splits.train, 60);
    shard.val = take(pool.splits.val, 30);
    shard.test = take(pool.splits.test, 30);
    users.push_back(std::move(shard));
  }
  write_file(dir / "shards.jsonl", shards_jsonl(users));

  const json config = {
      {"seed", 1},
      {"data", {{"train", "train.csv"}, {"val", "val.csv"}, {"test", "test.csv"},
                {"aspects", "aspects.json"}, {"num_classes", o.num_classes}, {"max_len", 24},
                {"vocab_size", 2000}}},
      {"model", {{"full_dim", 16}, {"dim", 6}}},
      {"train", {{"epochs", 8}, {"batch_size", 32}, {"lr", 0.01}}},
      {"attack", {{"n_samples", 40}, {"synonyms", "synonyms.json"}}},
      {"personalize", {{"grid", {20, 80}}, {"epochs", 2}, {"lr", 0.01}, {"batch_size", 32}}},
      {"ablation", {{"seeds", {1, 2}}, {"attack_samples", 20}}}};
  write_file(dir / "config.json", config.dump(2) + "\n");
}

int run_main(int argc, char** argv) {
  CLI::App app{"distilledge-synth: synthetic corpora"};
  app.require_subcommand(1, 1);
  std::string out;
  std::uint64_t seed = 1;
  Sizes sizes;
  int users = 5;
  int shifted = 2;
  auto common = [&](CLI::App* sub, bool with_sizes) {
    sub->add_option("--out", out, "Output directory")->required();
    if (!with_sizes) return;
    sub->add_option("--seed", seed);
    sub->add_option("--train", sizes.train);
    sub->add_option("--val", sizes.val);
    sub->add_option("--test", sizes.test);
  };
  CLI::App* topic = app.add_subcommand("topic", "News-style topic corpus");
  common(topic, true);
  double context_rate = 0.0;
  topic->add_option("--context-rate", context_rate, "Share of context-dependent words");
  CLI::App* aspect = app.add_subcommand("aspect", "Aspect-labelled sentiment corpus");
  common(aspect, true);
  CLI::App* fleet = app.add_subcommand("fleet", "Global corpus plus user shards");
  common(fleet, true);
  fleet->add_option("--users", users);
  fleet->add_option("--shifted", shifted);
  CLI::App* toy = app.add_subcommand("toy", "Bundled toy corpus and config");
  common(toy, false);
  CLI11_PARSE(app, argc, argv);

  const fs::path dir = out;
  if (topic->parsed()) {
    TopicCorpusOptions o;
    o.seed = seed;
    o.context_rate = context_rate;
    apply(sizes, o.train, o.val, o.test);
    write_splits(dir, make_topic_corpus(o));
  } else if (aspect->parsed()) {
    AspectCorpusOptions o;
    o.seed = seed;
    apply(sizes, o.train, o.val, o.test);
    const AspectCorpus c = make_aspect_corpus(o);
    write_splits(dir, c.splits, c.aspect_names);
    write_aspects(dir, c.aspect_names);
  } else if (fleet->parsed()) {
    FleetOptions o;
    o.base.seed = seed;
    o.users = users;
    o.shifted_users = shifted;
    apply(sizes, o.base.train, o.base.val, o.base.test);
    const Fleet f = make_fleet(o);
    write_splits(dir, f.global);
    write_file(dir / "shards.jsonl", shards_jsonl(f.users));
  } else {
    write_toy(dir);
  }
  return 0;
}

}  // namespace
}  // namespace distilledge

int main(int argc, char** argv) {
  try {
    return distilledge::run_main(argc, argv);
  } catch (const distilledge::Error& e) {
    std::cerr << json({{"error", e.kind()}, {"message", e.what()}}).dump() << std::endl;
    return e.kind() == "config" ? 2 : 1;
  }
}
