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

#include "distilledge/corpus.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include "distilledge/errors.hpp"
#include "distilledge/hash.hpp"
#include "distilledge/synth.hpp"
#include "gtest/gtest.h"

namespace distilledge {
namespace {

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() / "distilledge_corpus_test") {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path write(const std::string& name, const std::string& body) const {
    write_file(path_ / name, body);
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

std::vector<RawExample> texts(std::initializer_list<const char*> xs) {
  std::vector<RawExample> out;
  for (const char* t : xs) out.push_back({t, 0, std::nullopt});
  return out;
}

TEST(TokenizeTest, LowercasePunctuationWhitespace) {
  EXPECT_EQ(tokenize("  Hello, World!  (ok) "),
            (std::vector<std::string>{"hello", "world", "ok"}));
  EXPECT_EQ(tokenize("a\xe2\x80\x83" "b"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(tokenize("don't ..."), (std::vector<std::string>{"don't"}));
}

TEST(VocabularyTest, HandCounts) {
  const auto corpus = texts({"a b", "a"});
  EXPECT_EQ(Vocabulary::build(corpus, 10).tokens(),
            (std::vector<std::string>{"<pad>", "<unk>", "a", "b"}));
  EXPECT_EQ(Vocabulary::build(corpus, 10, 2).tokens(),
            (std::vector<std::string>{"<pad>", "<unk>", "a"}));
  EXPECT_EQ(Vocabulary::build(corpus, 3).tokens(),
            (std::vector<std::string>{"<pad>", "<unk>", "a"}));
}

TEST(VocabularyTest, TiesAreLexicographic) {
  const auto v = Vocabulary::build(texts({"zeta beta alpha"}), 10);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "alpha", "beta", "zeta"}));
}

TEST(VocabularyTest, EmptyCorpusAndTinyMaxSize) {
  EXPECT_THROW(Vocabulary::build({}, 10), Error);
  EXPECT_THROW(Vocabulary::build(texts({"a"}), 1), ConfigError);
}

TEST(VocabularyTest, SaveLoadKeepsFingerprint) {
  TempDir dir;
  const auto v = Vocabulary::build(texts({"x y z", "y"}), 10);
  const auto path = dir.write("v.json", "");
  v.save(path);
  const auto back = Vocabulary::load(path);
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_EQ(back.fingerprint(), v.fingerprint());
}

TEST(EncodeTest, PadUnkTruncate) {
  const auto v = Vocabulary::build(texts({"a b", "a"}), 10);
  auto e = encode({"a b", 0, std::nullopt}, v, 4);
  EXPECT_EQ(e.token_ids, (std::vector<int>{2, 3, 0, 0}));
  EXPECT_EQ(e.length, 2);
  EXPECT_EQ(encode({"a zzz", 0, std::nullopt}, v, 4).token_ids, (std::vector<int>{2, 1, 0, 0}));
  e = encode({"a b a b a", 0, std::nullopt}, v, 4);
  EXPECT_EQ(e.token_ids, (std::vector<int>{2, 3, 2, 3}));
  EXPECT_EQ(e.length, 4);
}

TEST(EncodeTest, DecodeInvertsInVocabularyTokens) {
  const auto corpus = make_topic_corpus({.train = 50, .val = 0, .test = 0});
  const auto v = Vocabulary::build(corpus.train, 10000);
  for (const auto& ex : corpus.train) {
    const auto enc = encode(ex, v, 64);
    auto toks = tokenize(ex.text);
    if (toks.size() > 64) toks.resize(64);
    EXPECT_EQ(decode(enc, v), toks);
  }
}

TEST(LoadDatasetTest, CsvRows) {
  TempDir dir;
  DatasetSchema schema;
  schema.num_classes = 5;
  schema.aspects = {{"food", 0}, {"price", 1}, {"service", 2}, {"ambience", 3}};
  const auto path = dir.write("d.csv",
                              "2,,great phone\n"
                              "1,food,the soup was cold\n"
                              "3,price,\"quoted, with comma\"\n"
                              "oops\n");
  const auto d = load_dataset(path, DataFormat::kCsv, schema);
  ASSERT_EQ(d.examples.size(), 3u);
  EXPECT_EQ(d.examples[0], (RawExample{"great phone", 1, std::nullopt}));
  EXPECT_EQ(d.examples[1].aspect, 0);
  EXPECT_EQ(d.examples[2].text, "quoted, with comma");
  ASSERT_EQ(d.malformed.size(), 1u);
  EXPECT_EQ(d.malformed[0].row, 4u);
}

TEST(LoadDatasetTest, LabelOutOfRangeNamesRow) {
  TempDir dir;
  DatasetSchema schema;
  schema.num_classes = 5;
  const auto path = dir.write("bad.csv", "1,,fine\n9,,nope\n");
  try {
    load_dataset(path, DataFormat::kCsv, schema);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_dataset(path.parent_path() / "nope.csv", DataFormat::kCsv, schema), IoError);
}

TEST(LoadDatasetTest, Jsonl) {
  TempDir dir;
  DatasetSchema schema;
  schema.num_classes = 3;
  schema.aspects = {{"food", 0}, {"price", 1}};
  const auto path = dir.write("d.jsonl",
                              "{\"label\": 3, \"aspect\": \"price\", \"text\": \"cheap\"}\n"
                              "{\"label\": 1, \"aspect\": null, \"text\": \"meh\"}\n");
  const auto d = load_dataset(path, DataFormat::kJsonl, schema);
  ASSERT_EQ(d.examples.size(), 2u);
  EXPECT_EQ(d.examples[0], (RawExample{"cheap", 2, 1}));
  EXPECT_FALSE(d.examples[1].aspect.has_value());
}

TEST(UserShardTest, OrderEligibilityDuplicates) {
  TempDir dir;
  DatasetSchema schema;
  schema.num_classes = 2;
  auto user = [](const std::string& id, bool with_val) {
    std::string s = "{\"user_id\": \"" + id + "\", \"train\": [{\"label\": 1, \"text\": \"a " + id +
                    "\"}], \"val\": [";
    if (with_val) s += "{\"label\": 2, \"text\": \"b " + id + "\"}";
    s += "], \"test\": []}\n";
    return s;
  };
  const auto shards = load_user_shards(dir.write("s.jsonl", user("u1", true) + user("u2", false) +
                                                                 user("u3", true)),
                                       schema);
  ASSERT_EQ(shards.size(), 3u);
  EXPECT_EQ(shards[0].user_id, "u1");
  EXPECT_EQ(shards[2].user_id, "u3");
  EXPECT_TRUE(shards[0].selection_eligible());
  EXPECT_FALSE(shards[1].selection_eligible());
  try {
    load_user_shards(dir.write("dup.jsonl", user("u1", true) + user("u1", true)), schema);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("u1"), std::string::npos);
  }
}

TEST(SynthTest, WritersRoundTripThroughLoaders) {
  TempDir dir;
  FleetOptions o;
  o.base.train = 30;
  o.base.val = o.base.test = 5;
  o.user_train = 4;
  o.user_val = o.user_test = 2;
  const auto fleet = make_fleet(o);
  DatasetSchema schema;
  schema.num_classes = 4;
  const auto d = load_dataset(dir.write("g.csv", dataset_csv(fleet.global.train)), DataFormat::kCsv,
                              schema);
  EXPECT_EQ(d.examples, fleet.global.train);
  const auto shards = load_user_shards(dir.write("u.jsonl", shards_jsonl(fleet.users)), schema);
  ASSERT_EQ(shards.size(), 5u);
  EXPECT_EQ(shards[4].train, fleet.users[4].train);
}

}  // namespace
}  // namespace distilledge
