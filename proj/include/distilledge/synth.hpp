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

#ifndef DISTILLEDGE_SYNTH_HPP_
#define DISTILLEDGE_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "distilledge/corpus.hpp"

namespace distilledge {

// Deterministic pronounceable pseudo-word for an index (length >= 4).
std::string synth_word(std::size_t index);

struct SplitCorpus {
  std::vector<RawExample> train;
  std::vector<RawExample> val;
  std::vector<RawExample> test;
  // Words that play the same role in the generator (one topic, one aspect,
  // the common pool, ...).
  std::vector<std::vector<std::string>> word_groups;
};

// Maps every word to the next k words of its group (cyclically): a
// synonym table for the synthetic corpora.
std::map<std::string, std::vector<std::string>> group_synonyms(
    const std::vector<std::vector<std::string>>& groups, int k);

// News-style topic corpus. Each class owns a block of topical words; every
// adjacent pair of classes shares a block of ambiguous words; the rest of a
// document comes from a Zipf-weighted common vocabulary.
//
// Documents also open with a section word (one of two sections). Words in
// the context-dependent groups point to class g under section 0 and to
// class g + 1 (mod K) under section 1, so the class cannot be read off a
// bag of words without the section.
struct TopicCorpusOptions {
  int num_classes = 4;
  std::size_t train = 8000;
  std::size_t val = 1000;
  std::size_t test = 1000;
  int topic_words = 60;
  int ambiguous_words = 20;
  int common_words = 400;
  int min_len = 12;
  int max_len = 30;
  double topic_rate = 0.12;
  double ambiguous_rate = 0.12;
  int section_words = 10;
  int context_words = 30;  // per group
  double context_rate = 0.0;
  double label_noise = 0.05;
  std::uint64_t seed = 1;
};
SplitCorpus make_topic_corpus(const TopicCorpusOptions& options);

// Sentiment sentences about one of m aspects. Each aspect owns its own
// words; sentiment words are shared across aspects.
struct AspectCorpusOptions {
  int num_aspects = 4;
  int num_classes = 3;
  std::size_t train = 2000;
  std::size_t val = 300;
  std::size_t test = 500;
  int aspect_words = 20;
  int sentiment_words = 15;
  int filler_words = 80;
  int min_len = 8;
  int max_len = 16;
  double aspect_rate = 0.3;
  double sentiment_rate = 0.25;
  std::uint64_t seed = 1;
};
struct AspectCorpus {
  SplitCorpus splits;
  std::vector<std::string> aspect_names;
};
AspectCorpus make_aspect_corpus(const AspectCorpusOptions& options);

// A global corpus plus user shards drawn from the same topics. Shifted users
// see classes 0 and 1 swapped.
struct FleetOptions {
  TopicCorpusOptions base;
  int users = 5;
  int shifted_users = 2;  // the last ones
  std::size_t user_train = 200;
  std::size_t user_val = 100;
  std::size_t user_test = 100;
};
struct Fleet {
  SplitCorpus global;
  std::vector<UserShard> users;
  std::vector<bool> shifted;
};
Fleet make_fleet(const FleetOptions& options);

// Writers for the formats read by load_dataset and load_user_shards.
std::string dataset_csv(std::span<const RawExample> examples,
                        std::span<const std::string> aspect_names = {});
std::string dataset_jsonl(std::span<const RawExample> examples);
std::string shards_jsonl(std::span<const UserShard> shards);

}  // namespace distilledge

#endif  // DISTILLEDGE_SYNTH_HPP_
