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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>
#include <utility>

#include "distilledge/errors.hpp"
#include "distilledge/hash.hpp"
#include "json.hpp"

namespace distilledge {
namespace {

using nlohmann::json;

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

// Length of a whitespace sequence starting at text[i], 0 if none.
std::size_t whitespace_len(std::string_view text, std::size_t i) {
  const auto c = static_cast<unsigned char>(text[i]);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
      c == '\f') {
    return 1;
  }
  auto at = [&](std::size_t k) {
    return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0;
  };
  // U+0085, U+00A0
  if (c == 0xC2 && (at(1) == 0x85 || at(1) == 0xA0)) return 2;
  // U+1680
  if (c == 0xE1 && at(1) == 0x9A && at(2) == 0x80) return 3;
  // U+2000..U+200A, U+2028, U+2029, U+202F, U+205F
  if (c == 0xE2 && at(1) == 0x80 &&
      ((at(2) >= 0x80 && at(2) <= 0x8A) || at(2) == 0xA8 || at(2) == 0xA9 ||
       at(2) == 0xAF)) {
    return 3;
  }
  if (c == 0xE2 && at(1) == 0x81 && at(2) == 0x9F) return 3;
  // U+3000
  if (c == 0xE3 && at(1) == 0x80 && at(2) == 0x80) return 3;
  return 0;
}

void push_token(std::string piece, std::vector<std::string>& out) {
  std::size_t b = 0;
  std::size_t e = piece.size();
  while (b < e && is_ascii_punct(piece[b])) ++b;
  while (e > b && is_ascii_punct(piece[e - 1])) --e;
  if (b == e) return;
  std::string tok = piece.substr(b, e - b);
  for (auto& ch : tok) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 0x80) ch = static_cast<char>(std::tolower(u));
  }
  out.push_back(std::move(tok));
}

int parse_int(std::string_view s, bool& ok) {
  int v = 0;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  ok = ec == std::errc() && p == s.data() + s.size() && !s.empty();
  return v;
}

int schema_aspects(const DatasetSchema& schema) {
  return schema.num_aspects > 0 ? schema.num_aspects
                                : static_cast<int>(schema.aspects.size());
}

std::string row_tag(const std::filesystem::path& path, std::size_t row) {
  return path.filename().string() + " row " + std::to_string(row);
}

// Shared by the CSV and JSONL loaders. Returns false (with a reason) for a
// structurally malformed row; throws FormatError for out-of-range values.
bool finish_example(const std::filesystem::path& path, std::size_t row,
                    int file_label, const std::optional<std::string>& aspect,
                    std::string text, const DatasetSchema& schema,
                    RawExample& out, std::string& reason) {
  if (tokenize(text).empty()) {
    reason = "empty text";
    return false;
  }
  if (file_label < 1 || file_label > schema.num_classes) {
    throw FormatError(row_tag(path, row) + ": label " +
                      std::to_string(file_label) + " outside [1, " +
                      std::to_string(schema.num_classes) + "]");
  }
  out.label = file_label - 1;
  out.text = std::move(text);
  out.aspect.reset();
  if (aspect && !aspect->empty()) {
    const int m = schema_aspects(schema);
    if (auto it = schema.aspects.find(*aspect); it != schema.aspects.end()) {
      out.aspect = it->second;
    } else {
      bool ok = false;
      const int idx = parse_int(*aspect, ok);
      if (!ok) {
        throw FormatError(row_tag(path, row) + ": unknown aspect '" +
                          *aspect + "'");
      }
      out.aspect = idx;
    }
    if (*out.aspect < 0 || *out.aspect >= m) {
      throw FormatError(row_tag(path, row) + ": aspect index " +
                        std::to_string(*out.aspect) + " outside [0, " +
                        std::to_string(m) + ")");
    }
  }
  return true;
}

bool parse_json_example(const std::filesystem::path& path, std::size_t row,
                        const json& j, const DatasetSchema& schema,
                        RawExample& out, std::string& reason) {
  if (!j.is_object() || !j.contains("label") || !j.contains("text") ||
      !j["label"].is_number_integer() || !j["text"].is_string()) {
    reason = "expected object with integer 'label' and string 'text'";
    return false;
  }
  std::optional<std::string> aspect;
  if (auto it = j.find("aspect"); it != j.end() && !it->is_null()) {
    if (it->is_string()) {
      aspect = it->get<std::string>();
    } else if (it->is_number_integer()) {
      aspect = std::to_string(it->get<int>());
    } else {
      reason = "aspect must be a name, an index or null";
      return false;
    }
  }
  return finish_example(path, row, j["label"].get<int>(), aspect,
                        j["text"].get<std::string>(), schema, out, reason);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string piece;
  std::size_t i = 0;
  while (i < text.size()) {
    if (const std::size_t ws = whitespace_len(text, i); ws > 0) {
      if (!piece.empty()) push_token(std::exchange(piece, {}), out);
      i += ws;
      continue;
    }
    piece.push_back(text[i]);
    ++i;
  }
  if (!piece.empty()) push_token(std::move(piece), out);
  return out;
}

Vocabulary Vocabulary::build(std::span<const RawExample> examples,
                             std::size_t max_size, int min_freq) {
  if (max_size < 2) throw ConfigError("vocabulary max_size must be >= 2");
  if (examples.empty()) throw FormatError("cannot build vocabulary: empty corpus");
  std::unordered_map<std::string, long> counts;
  for (const auto& ex : examples) {
    for (auto& tok : tokenize(ex.text)) ++counts[std::move(tok)];
  }
  std::vector<std::pair<std::string, long>> ranked;
  ranked.reserve(counts.size());
  for (auto& [tok, n] : counts) {
    if (n >= min_freq && tok != kPadToken && tok != kUnkToken) {
      ranked.emplace_back(tok, n);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
  for (auto& [tok, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(std::move(tok));
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[kPadId] != kPadToken ||
      tokens[kUnkId] != kUnkToken) {
    throw FormatError("vocabulary must start with <pad>, <unk>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
      throw FormatError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  return tokens_.at(static_cast<std::size_t>(id));
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

std::string Vocabulary::fingerprint() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined.push_back('\n');
  }
  return sha256_hex(joined);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  json j;
  j["tokens"] = tokens_;
  j["fingerprint"] = fingerprint();
  write_file(path, j.dump(1) + "\n");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
    return from_tokens(j.at("tokens").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

EncodedExample encode_tokens(std::span<const std::string> tokens, int label,
                             std::optional<int> aspect,
                             const Vocabulary& vocab, int max_len) {
  EncodedExample out;
  out.token_ids.assign(static_cast<std::size_t>(max_len), kPadId);
  out.length = static_cast<int>(
      std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_len)));
  for (int i = 0; i < out.length; ++i) {
    out.token_ids[static_cast<std::size_t>(i)] =
        vocab.id(tokens[static_cast<std::size_t>(i)]);
  }
  out.label = label;
  out.aspect = aspect;
  return out;
}

EncodedExample encode(const RawExample& example, const Vocabulary& vocab,
                      int max_len) {
  const auto tokens = tokenize(example.text);
  return encode_tokens(tokens, example.label, example.aspect, vocab, max_len);
}

std::vector<EncodedExample> encode_all(std::span<const RawExample> examples,
                                       const Vocabulary& vocab, int max_len) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(encode(ex, vocab, max_len));
  return out;
}

std::vector<std::string> decode(const EncodedExample& encoded,
                                const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int i = 0; i < encoded.length; ++i) {
    out.push_back(vocab.token(encoded.token_ids[static_cast<std::size_t>(i)]));
  }
  return out;
}

AspectLexicon load_aspect_lexicon(const std::filesystem::path& path) {
  AspectLexicon lex;
  try {
    const json j = json::parse(read_file(path));
    for (const auto& [name, idx] : j.items()) lex[name] = idx.get<int>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  std::set<int> seen;
  for (const auto& [name, idx] : lex) {
    if (idx < 0 || !seen.insert(idx).second) {
      throw FormatError(path.string() + ": aspect indices must be unique and >= 0");
    }
  }
  if (!seen.empty() && *seen.rbegin() != static_cast<int>(seen.size()) - 1) {
    throw FormatError(path.string() + ": aspect indices must be contiguous from 0");
  }
  return lex;
}

DataFormat parse_data_format(std::string_view name) {
  if (name == "csv") return DataFormat::kCsv;
  if (name == "jsonl") return DataFormat::kJsonl;
  throw ConfigError("unknown data format '" + std::string(name) + "'");
}

std::optional<std::vector<std::string>> next_csv_record(std::string_view data,
                                                        std::size_t& pos) {
  if (pos >= data.size()) return std::nullopt;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool field_started_quoted = false;
  while (pos < data.size()) {
    const char c = data[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < data.size() && data[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      field.push_back(c);
      ++pos;
      continue;
    }
    if (c == '"' && field.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::exchange(field, {}));
      field_started_quoted = false;
      ++pos;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && pos + 1 < data.size() && data[pos + 1] == '\n') ++pos;
      ++pos;
      break;
    } else {
      field.push_back(c);
      ++pos;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

LoadedDataset load_dataset(const std::filesystem::path& path,
                           DataFormat format, const DatasetSchema& schema) {
  if (schema.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  const std::string data = read_file(path);
  LoadedDataset out;
  std::size_t row = 0;
  std::string reason;
  if (format == DataFormat::kCsv) {
    std::size_t pos = 0;
    while (auto rec = next_csv_record(data, pos)) {
      ++row;
      if (rec->size() == 1 && (*rec)[0].empty()) continue;  // blank line
      RawExample ex;
      bool ok_label = false;
      if (rec->size() < 3) {
        out.malformed.push_back({row, "expected 3 columns label,aspect,text"});
        continue;
      }
      // Unquoted commas inside the text column are kept as part of the text.
      std::string text = (*rec)[2];
      for (std::size_t k = 3; k < rec->size(); ++k) text += "," + (*rec)[k];
      const int label = parse_int((*rec)[0], ok_label);
      if (!ok_label) {
        out.malformed.push_back({row, "label is not an integer"});
        continue;
      }
      if (finish_example(path, row, label, (*rec)[1], std::move(text), schema,
                         ex, reason)) {
        out.examples.push_back(std::move(ex));
      } else {
        out.malformed.push_back({row, reason});
      }
    }
  } else {
    std::istringstream in(data);
    std::string line;
    while (std::getline(in, line)) {
      ++row;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        out.malformed.push_back({row, "invalid JSON"});
        continue;
      }
      RawExample ex;
      if (parse_json_example(path, row, j, schema, ex, reason)) {
        out.examples.push_back(std::move(ex));
      } else {
        out.malformed.push_back({row, reason});
      }
    }
  }
  return out;
}

std::vector<UserShard> load_user_shards(const std::filesystem::path& path,
                                        const DatasetSchema& schema) {
  const std::string data = read_file(path);
  std::istringstream in(data);
  std::string line;
  std::size_t row = 0;
  std::vector<UserShard> shards;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(row_tag(path, row) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("user_id") || !j["user_id"].is_string()) {
      throw FormatError(row_tag(path, row) + ": missing string user_id");
    }
    UserShard shard;
    shard.user_id = j["user_id"].get<std::string>();
    if (!ids.insert(shard.user_id).second) {
      throw FormatError("duplicate user_id '" + shard.user_id + "'");
    }
    auto read_split = [&](const char* name, std::vector<RawExample>& dst) {
      if (!j.contains(name)) return;
      if (!j[name].is_array()) {
        throw FormatError(row_tag(path, row) + ": '" + name + "' must be an array");
      }
      for (const auto& item : j[name]) {
        RawExample ex;
        std::string reason;
        if (!parse_json_example(path, row, item, schema, ex, reason)) {
          throw FormatError(row_tag(path, row) + " (" + shard.user_id + "." +
                            name + "): " + reason);
        }
        dst.push_back(std::move(ex));
      }
    };
    read_split("train", shard.train);
    read_split("val", shard.val);
    read_split("test", shard.test);
    auto key = [](const RawExample& e) {
      return std::to_string(e.label) + "\t" + e.text;
    };
    std::set<std::string> train_keys;
    std::set<std::string> val_keys;
    for (const auto& e : shard.train) train_keys.insert(key(e));
    for (const auto& e : shard.val) {
      if (train_keys.count(key(e))) {
        throw FormatError("user '" + shard.user_id + "': train/val overlap");
      }
      val_keys.insert(key(e));
    }
    for (const auto& e : shard.test) {
      if (train_keys.count(key(e)) || val_keys.count(key(e))) {
        throw FormatError("user '" + shard.user_id + "': test split overlaps");
      }
    }
    shards.push_back(std::move(shard));
  }
  return shards;
}

}  // namespace distilledge
