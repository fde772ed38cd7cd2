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

#include "distilledge/synth.hpp"

#include <algorithm>
#include <random>

#include "json.hpp"

#include "distilledge/errors.hpp"

namespace distilledge {
namespace {

constexpr const char* kSyllables[] = {"ba", "ko", "ri", "su", "te", "lo", "ma", "ni", "pe", "du",
                                      "ga", "vi", "zo", "ha", "fe", "ru", "mi", "so", "ta", "ne"};
constexpr std::size_t kSyllableCount = std::size(kSyllables);

// Contiguous blocks of word indices.
struct Block {
  std::size_t begin = 0;
  std::size_t size = 0;
};

class WordSource {
 public:
  Block take(std::size_t n) {
    Block b{next_, n};
    next_ += n;
    groups_.emplace_back();
    for (std::size_t i = 0; i < n; ++i) groups_.back().push_back(synth_word(b.begin + i));
    return b;
  }
  const std::vector<std::vector<std::string>>& groups() const { return groups_; }

 private:
  std::size_t next_ = 0;
  std::vector<std::vector<std::string>> groups_;
};

std::string pick(std::mt19937_64& rng, Block b) {
  std::uniform_int_distribution<std::size_t> u(0, b.size - 1);
  return synth_word(b.begin + u(rng));
}

std::discrete_distribution<std::size_t> zipf(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r) w[r] = 1.0 / static_cast<double>(r + 1);
  return {w.begin(), w.end()};
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

struct TopicModel {
  explicit TopicModel(const TopicCorpusOptions& o) : options(o) {
    if (o.num_classes < 2) throw ConfigError("synth.num_classes must be >= 2");
    if (o.min_len < 1 || o.max_len < o.min_len) throw ConfigError("synth length range is empty");
    common = src.take(static_cast<std::size_t>(o.common_words));
    for (int c = 0; c < o.num_classes; ++c) {
      topics.push_back(src.take(static_cast<std::size_t>(o.topic_words)));
    }
    for (int c = 0; c < o.num_classes; ++c) {
      ambiguous.push_back(src.take(static_cast<std::size_t>(o.ambiguous_words)));
    }
    for (int s = 0; s < 2; ++s) sections.push_back(src.take(static_cast<std::size_t>(o.section_words)));
    for (int g = 0; g < o.num_classes; ++g) {
      context.push_back(src.take(static_cast<std::size_t>(o.context_words)));
    }
    common_dist = zipf(common.size);
  }

  // Document about topic c.
  std::string document(int c, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(options.min_len, options.max_len);
    std::uniform_real_distribution<double> u(0, 1);
    const int k = options.num_classes;
    const int n = len(rng);
    const int section = u(rng) < 0.5 ? 0 : 1;
    const int group = (c - section + k) % k;
    std::vector<std::string> words;
    if (options.context_rate > 0) words.push_back(pick(rng, sections[static_cast<std::size_t>(section)]));
    for (int i = static_cast<int>(words.size()); i < n; ++i) {
      double r = u(rng);
      if (r < options.context_rate) {
        words.push_back(pick(rng, context[static_cast<std::size_t>(group)]));
        continue;
      }
      r -= options.context_rate;
      if (r < options.topic_rate) {
        words.push_back(pick(rng, topics[static_cast<std::size_t>(c)]));
      } else if (r < options.topic_rate + options.ambiguous_rate) {
        // Shared with the next class (pair c, c+1) or the previous one.
        const int pair = u(rng) < 0.5 ? c : (c + k - 1) % k;
        words.push_back(pick(rng, ambiguous[static_cast<std::size_t>(pair)]));
      } else {
        words.push_back(synth_word(common.begin + common_dist(rng)));
      }
    }
    return join(words);
  }

  RawExample example(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> cls(0, options.num_classes - 1);
    std::uniform_real_distribution<double> u(0, 1);
    RawExample ex;
    const int c = cls(rng);
    ex.text = document(c, rng);
    ex.label = u(rng) < options.label_noise ? cls(rng) : c;
    return ex;
  }

  std::vector<RawExample> draw(std::size_t n, std::mt19937_64& rng) {
    std::vector<RawExample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(example(rng));
    return out;
  }

  TopicCorpusOptions options;
  WordSource src;
  Block common;
  std::vector<Block> topics;
  std::vector<Block> ambiguous;
  std::vector<Block> sections;
  std::vector<Block> context;
  std::discrete_distribution<std::size_t> common_dist;
};

nlohmann::json example_json(const RawExample& ex) {
  nlohmann::json j;
  j["label"] = ex.label + 1;
  j["aspect"] = ex.aspect ? nlohmann::json(*ex.aspect) : nlohmann::json(nullptr);
  j["text"] = ex.text;
  return j;
}

nlohmann::json examples_json(std::span<const RawExample> examples) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& ex : examples) arr.push_back(example_json(ex));
  return arr;
}

}  // namespace

std::string synth_word(std::size_t index) {
  std::string out;
  std::size_t v = index;
  for (int i = 0; i < 2 || v > 0; ++i) {
    out += kSyllables[v % kSyllableCount];
    v /= kSyllableCount;
  }
  return out;
}

std::map<std::string, std::vector<std::string>> group_synonyms(
    const std::vector<std::vector<std::string>>& groups, int k) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& g : groups) {
    const int n = static_cast<int>(g.size());
    for (int i = 0; i < n; ++i) {
      auto& list = out[g[static_cast<std::size_t>(i)]];
      for (int j = 1; j <= std::min(k, n - 1); ++j) {
        list.push_back(g[static_cast<std::size_t>((i + j) % n)]);
      }
    }
  }
  return out;
}

SplitCorpus make_topic_corpus(const TopicCorpusOptions& options) {
  TopicModel model(options);
  std::mt19937_64 rng(options.seed);
  SplitCorpus out;
  out.train = model.draw(options.train, rng);
  out.val = model.draw(options.val, rng);
  out.test = model.draw(options.test, rng);
  out.word_groups = model.src.groups();
  return out;
}

AspectCorpus make_aspect_corpus(const AspectCorpusOptions& o) {
  if (o.num_aspects < 2) throw ConfigError("synth.num_aspects must be >= 2");
  if (o.num_classes < 2) throw ConfigError("synth.num_classes must be >= 2");
  WordSource src;
  const Block filler = src.take(static_cast<std::size_t>(o.filler_words));
  std::vector<Block> aspect_blocks;
  std::vector<Block> sentiment_blocks;
  for (int a = 0; a < o.num_aspects; ++a) {
    aspect_blocks.push_back(src.take(static_cast<std::size_t>(o.aspect_words)));
  }
  for (int c = 0; c < o.num_classes; ++c) {
    sentiment_blocks.push_back(src.take(static_cast<std::size_t>(o.sentiment_words)));
  }
  auto filler_dist = zipf(filler.size);
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<int> len(o.min_len, o.max_len);
  std::uniform_int_distribution<int> asp(0, o.num_aspects - 1);
  std::uniform_int_distribution<int> cls(0, o.num_classes - 1);
  std::uniform_real_distribution<double> u(0, 1);

  auto draw = [&](std::size_t n) {
    std::vector<RawExample> out;
    for (std::size_t k = 0; k < n; ++k) {
      RawExample ex;
      ex.aspect = asp(rng);
      ex.label = cls(rng);
      std::vector<std::string> words;
      const int n_words = len(rng);
      // At least one aspect word and one sentiment word per sentence.
      words.push_back(pick(rng, aspect_blocks[static_cast<std::size_t>(*ex.aspect)]));
      words.push_back(pick(rng, sentiment_blocks[static_cast<std::size_t>(ex.label)]));
      for (int i = 2; i < n_words; ++i) {
        const double r = u(rng);
        if (r < o.aspect_rate) {
          words.push_back(pick(rng, aspect_blocks[static_cast<std::size_t>(*ex.aspect)]));
        } else if (r < o.aspect_rate + o.sentiment_rate) {
          words.push_back(pick(rng, sentiment_blocks[static_cast<std::size_t>(ex.label)]));
        } else {
          words.push_back(synth_word(filler.begin + filler_dist(rng)));
        }
      }
      std::shuffle(words.begin(), words.end(), rng);
      ex.text = join(words);
      out.push_back(std::move(ex));
    }
    return out;
  };
  AspectCorpus out;
  out.splits.train = draw(o.train);
  out.splits.val = draw(o.val);
  out.splits.test = draw(o.test);
  out.splits.word_groups = src.groups();
  for (int a = 0; a < o.num_aspects; ++a) out.aspect_names.push_back("aspect" + std::to_string(a));
  return out;
}

Fleet make_fleet(const FleetOptions& options) {
  if (options.users < 1 || options.shifted_users < 0 || options.shifted_users > options.users) {
    throw ConfigError("synth.users and synth.shifted_users are inconsistent");
  }
  TopicModel model(options.base);
  std::mt19937_64 rng(options.base.seed);
  Fleet fleet;
  fleet.global.train = model.draw(options.base.train, rng);
  fleet.global.val = model.draw(options.base.val, rng);
  fleet.global.test = model.draw(options.base.test, rng);
  fleet.global.word_groups = model.src.groups();
  for (int u = 0; u < options.users; ++u) {
    const bool shifted = u >= options.users - options.shifted_users;
    auto shift = [&](std::vector<RawExample> xs) {
      if (shifted) {
        for (auto& ex : xs) {
          if (ex.label == 0 || ex.label == 1) ex.label = 1 - ex.label;
        }
      }
      return xs;
    };
    UserShard shard;
    shard.user_id = "user" + std::to_string(u);
    shard.train = shift(model.draw(options.user_train, rng));
    shard.val = shift(model.draw(options.user_val, rng));
    shard.test = shift(model.draw(options.user_test, rng));
    fleet.users.push_back(std::move(shard));
    fleet.shifted.push_back(shifted);
  }
  return fleet;
}

std::string dataset_csv(std::span<const RawExample> examples,
                        std::span<const std::string> aspect_names) {
  std::string out;
  for (const auto& ex : examples) {
    out += std::to_string(ex.label + 1) + ",";
    if (ex.aspect) {
      const auto a = static_cast<std::size_t>(*ex.aspect);
      out += a < aspect_names.size() ? aspect_names[a] : std::to_string(a);
    }
    out += ",\"";
    for (char ch : ex.text) {
      if (ch == '"') out += '"';
      out += ch;
    }
    out += "\"\n";
  }
  return out;
}

std::string dataset_jsonl(std::span<const RawExample> examples) {
  std::string out;
  for (const auto& ex : examples) out += example_json(ex).dump() + "\n";
  return out;
}

std::string shards_jsonl(std::span<const UserShard> shards) {
  std::string out;
  for (const auto& s : shards) {
    nlohmann::json j;
    j["user_id"] = s.user_id;
    j["train"] = examples_json(s.train);
    j["val"] = examples_json(s.val);
    j["test"] = examples_json(s.test);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace distilledge
