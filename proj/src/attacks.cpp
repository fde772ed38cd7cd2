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

#include "distilledge/attacks.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "distilledge/errors.hpp"
#include "distilledge/hash.hpp"
#include "distilledge/losses.hpp"

namespace distilledge {
namespace {

using nlohmann::json;

int argmax(const Vector& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

// Splits a UTF-8 string into code points (each kept as its byte sequence).
std::vector<std::string> code_points(const std::string& word) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < word.size();) {
    const auto c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, word.size() - i);
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += p;
  return s;
}

std::string swap_pair(const std::string& word, std::size_t first) {
  auto cps = code_points(word);
  std::swap(cps[first], cps[first + 1]);
  return join(cps);
}

// Counts model queries made by one attack invocation.
class QueryCounter {
 public:
  explicit QueryCounter(const BlackBoxModel& model) : model_(model) {}
  Vector operator()(std::span<const std::string> tokens) {
    ++queries_;
    return model_.predict_proba(tokens);
  }
  long long queries() const { return queries_; }

 private:
  const BlackBoxModel& model_;
  long long queries_ = 0;
};

std::vector<std::size_t> order_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// UNK-probe word importance: P(y|x) - P(y|x with token i -> <unk>).
std::vector<double> unk_saliency(QueryCounter& query, const TokenSeq& tokens,
                                 int label, double base) {
  std::vector<double> scores(tokens.size());
  TokenSeq probe = tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    probe[i] = std::string(kUnkToken);
    scores[i] = base - query(probe)(label);
    probe[i] = tokens[i];
  }
  return scores;
}

AdversarialExample start(const TokenSeq& tokens, int label, const char* attack) {
  AdversarialExample ex;
  ex.label = label;
  ex.original = tokens;
  ex.perturbed = tokens;
  ex.attack = attack;
  return ex;
}

void finish(AdversarialExample& ex, QueryCounter& query) {
  ex.perturbed_prediction = ex.edits.empty() ? ex.original_prediction
                                             : argmax(query(ex.perturbed));
  ex.success = ex.perturbed_prediction != ex.original_prediction;
  ex.queries = query.queries();
}

const char* kind_name(EditKind k) { return k == EditKind::kCharSwap ? "char_swap" : "word_sub"; }

}  // namespace

ClassifierOracle::ClassifierOracle(const LstmClassifier& model, const Vocabulary& vocab)
    : model_(model), vocab_(vocab) {
  if (static_cast<int>(vocab.size()) != model.config.vocab_size) {
    throw ShapeError("vocabulary size " + std::to_string(vocab.size()) +
                     " does not match model V=" + std::to_string(model.config.vocab_size));
  }
  unit_embeddings_ = model.embedding;
  for (Index c = 0; c < unit_embeddings_.cols(); ++c) {
    const double norm = unit_embeddings_.col(c).norm();
    if (norm > 0) unit_embeddings_.col(c) /= norm;
  }
}

std::vector<int> ClassifierOracle::ids(std::span<const std::string> tokens) const {
  std::vector<int> out;
  const std::size_t n = std::min(tokens.size(), static_cast<std::size_t>(model_.config.max_len));
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab_.id(tokens[i]));
  return out;
}

Vector ClassifierOracle::predict_proba(std::span<const std::string> tokens) const {
  ++predict_calls_;
  return distilledge::predict_proba(model_, ids(tokens));
}

Matrix ClassifierOracle::grad_wrt_embeddings(std::span<const std::string> tokens,
                                             int label) const {
  ++gradient_calls_;
  const auto token_ids = ids(tokens);
  const ForwardTrace tr = forward(model_, token_ids, false);
  const int labels[] = {label};
  TraceGradients up;
  up.logits = ce_loss<Scalar>(tr.logits, labels).grad.col(0);
  const Matrix d_embed = backward(model_, tr, up, nullptr);
  // Re-expand to one column per input position; PAD positions get zero.
  Matrix out = Matrix::Zero(model_.config.embed_dim, static_cast<Index>(tokens.size()));
  Index k = 0;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (token_ids[i] == kPadId) continue;
    out.col(static_cast<Index>(i)) = d_embed.col(k++);
  }
  return out;
}

std::vector<std::string> ClassifierOracle::nearest_neighbors(const std::string& token,
                                                             int k) const {
  const int self = vocab_.id(token);
  const Vector sims = unit_embeddings_.transpose() * unit_embeddings_.col(self);
  std::vector<int> cand;
  for (int i = 2; i < static_cast<int>(vocab_.size()); ++i) {
    if (i != self) cand.push_back(i);
  }
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                    [&](int a, int b) { return sims(a) != sims(b) ? sims(a) > sims(b) : a < b; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(vocab_.token(cand[i]));
  return out;
}

StaticLexicon::StaticLexicon(std::map<std::string, std::vector<std::string>> entries) {
  for (auto& [tok, cands] : entries) {
    std::vector<std::string> kept;
    for (auto& c : cands) {
      if (c != tok && std::find(kept.begin(), kept.end(), c) == kept.end()) kept.push_back(c);
    }
    if (!kept.empty()) entries_.emplace(tok, std::move(kept));
  }
}

StaticLexicon StaticLexicon::load(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> entries;
  try {
    const json j = json::parse(read_file(path));
    for (const auto& [tok, cands] : j.items()) {
      entries[tok] = cands.get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return StaticLexicon(std::move(entries));
}

std::vector<std::string> StaticLexicon::lookup(const std::string& token) const {
  auto it = entries_.find(token);
  return it == entries_.end() ? std::vector<std::string>{} : it->second;
}

std::string swap_middle_pair(const std::string& word) {
  const auto n = code_points(word).size();
  if (n < 4) return word;
  return swap_pair(word, n / 2 - 1);
}

AdversarialExample replaceone_attack(const BlackBoxModel& model, const TokenSeq& tokens,
                                     int label, const ReplaceOneOptions& options) {
  QueryCounter query(model);
  auto ex = start(tokens, label, "replaceone");
  const Vector base = query(tokens);
  ex.original_prediction = argmax(base);
  const auto scores = unk_saliency(query, tokens, label, base(label));
  std::mt19937_64 rng(options.seed);
  int used = 0;
  for (std::size_t i : order_desc(scores)) {
    if (used >= options.budget) break;
    const std::size_t len = code_points(tokens[i]).size();
    if (len < 4) continue;
    std::string swapped;
    if (options.random_swap) {
      std::uniform_int_distribution<std::size_t> pick(0, len - 2);
      swapped = swap_pair(tokens[i], pick(rng));
    } else {
      swapped = swap_middle_pair(tokens[i]);
    }
    if (swapped == tokens[i]) continue;
    ex.perturbed[i] = swapped;
    ex.edits.push_back({static_cast<int>(i), tokens[i], swapped, EditKind::kCharSwap});
    ++used;
  }
  ex.no_candidates = ex.edits.empty();
  finish(ex, query);
  return ex;
}

AdversarialExample gradient_attack(const WhiteBoxModel& model, const TokenSeq& tokens,
                                   int label, const GradientOptions& options) {
  QueryCounter query(model);
  auto ex = start(tokens, label, "gradient");
  ex.original_prediction = argmax(query(tokens));
  const Matrix grad = model.grad_wrt_embeddings(tokens, label);
  std::vector<double> saliency(tokens.size(), 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) saliency[i] = grad.col(static_cast<Index>(i)).norm();
  int used = 0;
  for (std::size_t i : order_desc(saliency)) {
    if (used >= options.budget) break;
    const auto pool = model.nearest_neighbors(tokens[i], options.pool_size);
    std::string best;
    double best_p = std::numeric_limits<double>::infinity();
    TokenSeq probe = ex.perturbed;
    for (const auto& cand : pool) {
      if (cand == tokens[i]) continue;
      probe[i] = cand;
      const double p = query(probe)(label);
      if (p < best_p) {
        best_p = p;
        best = cand;
      }
    }
    if (best.empty()) continue;
    ex.perturbed[i] = best;
    ex.edits.push_back({static_cast<int>(i), tokens[i], best, EditKind::kWordSub});
    ++used;
  }
  ex.no_candidates = ex.edits.empty();
  finish(ex, query);
  return ex;
}

AdversarialExample pwws_attack(const BlackBoxModel& model, const TokenSeq& tokens, int label,
                               const SynonymProvider& synonyms, int budget) {
  QueryCounter query(model);
  auto ex = start(tokens, label, "pwws");
  const Vector base = query(tokens);
  ex.original_prediction = argmax(base);
  const double p_y = base(label);
  const auto saliency = unk_saliency(query, tokens, label, p_y);

  const std::size_t n = tokens.size();
  std::vector<std::string> best_sub(n);
  std::vector<double> best_delta(n, 0.0);
  std::vector<bool> has_sub(n, false);
  TokenSeq probe = tokens;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& cand : synonyms.lookup(tokens[i])) {
      if (cand == tokens[i]) continue;
      probe[i] = cand;
      const double delta = p_y - query(probe)(label);
      if (!has_sub[i] || delta > best_delta[i]) {
        best_delta[i] = delta;
        best_sub[i] = cand;
        has_sub[i] = true;
      }
    }
    probe[i] = tokens[i];
  }

  std::vector<double> order_score(n, -std::numeric_limits<double>::infinity());
  if (n > 0) {
    Vector s(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) s(static_cast<Index>(i)) = saliency[i];
    const Vector w = softmax(s);
    for (std::size_t i = 0; i < n; ++i) {
      if (has_sub[i]) order_score[i] = w(static_cast<Index>(i)) * best_delta[i];
    }
  }
  int used = 0;
  for (std::size_t i : order_desc(order_score)) {
    if (!has_sub[i] || used >= budget) break;
    ex.perturbed[i] = best_sub[i];
    ex.edits.push_back({static_cast<int>(i), tokens[i], best_sub[i], EditKind::kWordSub});
    ++used;
    if (argmax(query(ex.perturbed)) != ex.original_prediction) break;
  }
  ex.no_candidates = ex.edits.empty();
  finish(ex, query);
  return ex;
}

AdversarialExample random_attack(const BlackBoxModel& model, const TokenSeq& tokens,
                                 int label, std::uint64_t seed) {
  QueryCounter query(model);
  auto ex = start(tokens, label, "random");
  ex.original_prediction = argmax(query(tokens));
  if (!tokens.empty()) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
    const std::size_t i = pick(rng);
    const std::string unk(kUnkToken);
    if (tokens[i] != unk) {
      ex.perturbed[i] = unk;
      ex.edits.push_back({static_cast<int>(i), tokens[i], unk, EditKind::kWordSub});
    }
  }
  ex.no_candidates = ex.edits.empty();
  finish(ex, query);
  return ex;
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "replaceone") return AttackKind::kReplaceOne;
  if (name == "gradient") return AttackKind::kGradient;
  if (name == "pwws") return AttackKind::kPwws;
  if (name == "random") return AttackKind::kRandom;
  throw ConfigError("unknown attack '" + std::string(name) + "'");
}

std::string attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kReplaceOne: return "replaceone";
    case AttackKind::kGradient: return "gradient";
    case AttackKind::kPwws: return "pwws";
    case AttackKind::kRandom: return "random";
  }
  return "unknown";
}

AttackSuiteResult run_attack_suite(const LstmClassifier& model, const Vocabulary& vocab,
                                   std::span<const RawExample> dataset,
                                   const AttackSuiteOptions& options) {
  if (options.attack == AttackKind::kPwws && options.synonyms == nullptr) {
    throw ConfigError("PWWS requires a synonym lexicon");
  }
  ClassifierOracle oracle(model, vocab);
  const auto max_len = static_cast<std::size_t>(model.config.max_len);
  auto tokens_of = [&](const RawExample& ex) {
    auto toks = tokenize(ex.text);
    if (toks.size() > max_len) toks.resize(max_len);
    return toks;
  };

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (options.only_correct) {
      const auto p = oracle.predict_proba(tokens_of(dataset[i]));
      if (argmax(p) != dataset[i].label) continue;
    }
    pool.push_back(i);
  }
  if (options.n_samples > pool.size()) {
    throw ConfigError("attack.n_samples " + std::to_string(options.n_samples) +
                      " exceeds the " + std::to_string(pool.size()) + " eligible examples");
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(options.n_samples);
  oracle.reset_counters();

  AttackSuiteResult result;
  double queries = 0, edits = 0;
  std::optional<Vector> first_output;
  bool constant_output = true;
  for (std::size_t idx : pool) {
    const auto& raw = dataset[idx];
    const auto toks = tokens_of(raw);
    const std::uint64_t ex_seed = options.seed ^ (0x9E3779B97F4A7C15ULL * (idx + 1));
    AdversarialExample adv;
    switch (options.attack) {
      case AttackKind::kReplaceOne:
        adv = replaceone_attack(oracle, toks, raw.label,
                                {options.budget > 0 ? options.budget : 1, options.random_swap, ex_seed});
        break;
      case AttackKind::kGradient:
        adv = gradient_attack(oracle, toks, raw.label,
                              {options.budget > 0 ? options.budget : 1, options.pool_size});
        break;
      case AttackKind::kPwws:
        adv = pwws_attack(oracle, toks, raw.label, *options.synonyms,
                          options.budget > 0 ? options.budget : kUnlimitedBudget);
        break;
      case AttackKind::kRandom:
        adv = random_attack(oracle, toks, raw.label, ex_seed);
        break;
    }
    adv.id = "ex" + std::to_string(idx);
    if (constant_output) {
      for (const auto* seq : {&adv.original, &adv.perturbed}) {
        const Vector p = distilledge::predict_proba(model, encode_tokens(*seq, 0, std::nullopt, vocab,
                                                                          model.config.max_len).token_ids);
        if (!first_output) first_output = p;
        else if ((p - *first_output).cwiseAbs().maxCoeff() > 1e-12) constant_output = false;
      }
    }
    queries += static_cast<double>(adv.queries);
    edits += static_cast<double>(adv.edits.size());
    if (adv.success) ++result.summary.succeeded;
    result.examples.push_back(std::move(adv));
  }
  auto& s = result.summary;
  s.attempted = result.examples.size();
  if (s.attempted > 0) {
    const double n = static_cast<double>(s.attempted);
    s.success_rate = static_cast<double>(s.succeeded) / n;
    s.mean_queries = queries / n;
    s.mean_edits = edits / n;
    s.degenerate = constant_output;
  }
  s.gradient_calls = oracle.gradient_calls();
  return result;
}

json AdversarialExample::to_json() const {
  json edits_j = json::array();
  for (const auto& e : edits) {
    edits_j.push_back({{"position", e.position}, {"before", e.before}, {"after", e.after},
                       {"kind", kind_name(e.kind)}});
  }
  return json{{"id", id},
              {"label", label},
              {"original", original},
              {"perturbed", perturbed},
              {"edits", edits_j},
              {"attack", attack},
              {"success", success},
              {"queries", queries},
              {"original_prediction", original_prediction},
              {"perturbed_prediction", perturbed_prediction},
              {"no_candidates", no_candidates}};
}

AdversarialExample AdversarialExample::from_json(const json& j) {
  AdversarialExample ex;
  try {
    ex.id = j.at("id").get<std::string>();
    ex.label = j.at("label").get<int>();
    ex.original = j.at("original").get<TokenSeq>();
    ex.perturbed = j.at("perturbed").get<TokenSeq>();
    for (const auto& e : j.at("edits")) {
      const auto kind = e.at("kind").get<std::string>();
      if (kind != "char_swap" && kind != "word_sub") throw FormatError("unknown edit kind " + kind);
      ex.edits.push_back({e.at("position").get<int>(), e.at("before").get<std::string>(),
                          e.at("after").get<std::string>(),
                          kind == "char_swap" ? EditKind::kCharSwap : EditKind::kWordSub});
    }
    ex.attack = j.at("attack").get<std::string>();
    ex.success = j.at("success").get<bool>();
    ex.queries = j.at("queries").get<long long>();
    ex.original_prediction = j.value("original_prediction", 0);
    ex.perturbed_prediction = j.value("perturbed_prediction", 0);
    ex.no_candidates = j.value("no_candidates", false);
  } catch (const json::exception& e) {
    throw FormatError(std::string("adversarial record: ") + e.what());
  }
  return ex;
}

std::string adversarial_jsonl(std::span<const AdversarialExample> examples,
                              const std::string& checkpoint_hash) {
  std::string out;
  for (const auto& ex : examples) {
    json j = ex.to_json();
    j["checkpoint"] = checkpoint_hash;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void save_adversarial(const std::filesystem::path& path,
                      std::span<const AdversarialExample> examples,
                      const std::string& checkpoint_hash) {
  write_file(path, adversarial_jsonl(examples, checkpoint_hash));
}

AdvDataset load_adversarial(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DependencyError("missing adversarial set " + path.string());
  std::istringstream in(read_file(path));
  std::string line;
  AdvDataset out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + " row " + std::to_string(row) + ": " + e.what());
    }
    const auto hash = j.value("checkpoint", std::string{});
    if (out.examples.empty()) {
      out.checkpoint_hash = hash;
    } else if (hash != out.checkpoint_hash) {
      throw FormatError(path.string() + " row " + std::to_string(row) +
                        ": records from different checkpoints");
    }
    out.examples.push_back(AdversarialExample::from_json(j));
  }
  return out;
}

}  // namespace distilledge
