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

#ifndef DISTILLEDGE_CORPUS_HPP_
#define DISTILLEDGE_CORPUS_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace distilledge {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr int kDefaultMaxLen = 64;

struct RawExample {
  std::string text;
  int label = 0;              // 0-based class index
  std::optional<int> aspect;  // 0-based aspect index

  friend bool operator==(const RawExample&, const RawExample&) = default;
};

// Lowercases ASCII letters, splits on whitespace (ASCII and the common
// Unicode space characters), then strips leading/trailing ASCII punctuation
// from each piece. Pieces that end up empty are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Immutable token <-> id map. Ids 0 and 1 are always <pad> and <unk>.
class Vocabulary {
 public:
  // Ranks tokens by descending frequency, ties broken lexicographically.
  // Tokens with frequency < min_freq are excluded; the result holds at most
  // max_size entries including the two special tokens.
  static Vocabulary build(std::span<const RawExample> examples,
                          std::size_t max_size, int min_freq = 1);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Hex SHA-256 over the ordered token list.
  std::string fingerprint() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct EncodedExample {
  std::vector<int> token_ids;  // always max_len long, PAD-filled tail
  int length = 0;              // non-PAD prefix length
  int label = 0;
  std::optional<int> aspect;
};

EncodedExample encode(const RawExample& example, const Vocabulary& vocab,
                      int max_len = kDefaultMaxLen);
EncodedExample encode_tokens(std::span<const std::string> tokens, int label,
                             std::optional<int> aspect,
                             const Vocabulary& vocab, int max_len);
std::vector<EncodedExample> encode_all(std::span<const RawExample> examples,
                                       const Vocabulary& vocab,
                                       int max_len = kDefaultMaxLen);
std::vector<std::string> decode(const EncodedExample& encoded,
                                const Vocabulary& vocab);

// Aspect name -> index. Loaded from a JSON object {"food": 0, ...}.
using AspectLexicon = std::map<std::string, int, std::less<>>;
AspectLexicon load_aspect_lexicon(const std::filesystem::path& path);

enum class DataFormat { kCsv, kJsonl };
DataFormat parse_data_format(std::string_view name);

struct DatasetSchema {
  int num_classes = 2;
  int num_aspects = 0;  // 0: taken from the lexicon size
  AspectLexicon aspects;
};

struct MalformedRow {
  std::size_t row = 0;  // 1-based line/record number
  std::string reason;
};

struct LoadedDataset {
  std::vector<RawExample> examples;
  std::vector<MalformedRow> malformed;
};

// CSV rows are label,aspect,text (RFC-4180 quoting, aspect may be empty);
// JSONL records are {"label": int, "aspect": name|int|null, "text": str}.
// Labels are 1-based in both file formats. Structurally broken rows are
// reported in LoadedDataset::malformed; a label or aspect out of range
// throws FormatError naming the row.
LoadedDataset load_dataset(const std::filesystem::path& path,
                           DataFormat format, const DatasetSchema& schema);

// Parses one CSV record starting at 'pos'; advances 'pos' past the record
// terminator. Returns std::nullopt at end of input.
std::optional<std::vector<std::string>> next_csv_record(std::string_view data,
                                                        std::size_t& pos);

struct UserShard {
  std::string user_id;
  std::vector<RawExample> train;
  std::vector<RawExample> val;
  std::vector<RawExample> test;
  bool selection_eligible() const { return !val.empty(); }
};

// One JSON object per line: {"user_id": ..., "train": [...], "val": [...],
// "test": [...]} where each example uses the JSONL dataset record layout.
std::vector<UserShard> load_user_shards(const std::filesystem::path& path,
                                        const DatasetSchema& schema);

}  // namespace distilledge

#endif  // DISTILLEDGE_CORPUS_HPP_
