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

// Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
// criterion fails. Progress lines are indented; criterion lines are not.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "distilledge/attacks.hpp"
#include "distilledge/compressor.hpp"
#include "distilledge/corpus.hpp"
#include "distilledge/evalreport.hpp"
#include "distilledge/explain.hpp"
#include "distilledge/hash.hpp"
#include "distilledge/losses.hpp"
#include "distilledge/netcore.hpp"
#include "distilledge/personalize.hpp"
#include "distilledge/synth.hpp"

namespace distilledge {
namespace {

// Tolerances and budgets.
constexpr double kOracleTol = 1e-6;
constexpr int kOracleInstances = 100;
constexpr double kGradEps = 1e-4;
constexpr double kGradTol = 1e-4;
constexpr int kGradParams = 60;
constexpr double kBracketTol = 0.15;
constexpr int kSeeds = 3;
constexpr int kSeedMajority = 2;
constexpr std::size_t kTrendAttackSamples = 500;
constexpr double kSizeInversionTol = 0.005;
constexpr std::size_t kContractSamples = 1000;
constexpr double kHitWith = 0.9;
constexpr double kHitWithout = 0.6;
constexpr double kKlHighT = 1e-6;
constexpr double kBudgetLossOracles = 10;
constexpr double kBudgetGradients = 120;
constexpr double kBudgetTrend = 1800;
constexpr double kBudgetContracts = 600;
constexpr double kBudgetExplain = 600;
constexpr double kBudgetPersonalize = 600;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Every number produced by criteria 1-9 passes through here.
struct FiniteTracker {
  long long checked = 0;
  long long bad = 0;
  void note(double v) {
    ++checked;
    if (!std::isfinite(v)) ++bad;
  }
  void note(const TrainResult& r) {
    for (const auto& e : r.history) {
      note(e.train.total);
      note(e.val_acc);
    }
    for (double s : r.step_losses) note(s);
    if (r.diverged) ++bad;
  }
} finite;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  C" << id << " " << name << ": " << detail
            << std::endl;
  if (!pass) ++failures;
}

std::string timing(double seconds, double budget) {
  return fmt("%.1f s", seconds) + fmt(" (budget %.0f s)", budget);
}

// ---------------------------------------------------------------------------
// Criterion 1: scalar oracles evaluated element by element in long double.

long double ref_log_softmax(const std::vector<long double>& z, std::size_t i) {
  long double sum = 0;
  for (long double v : z) sum += std::exp(v);
  return z[i] - std::log(sum);
}

long double ref_ce(const std::vector<long double>& z, int y) { return -ref_log_softmax(z, y); }

long double ref_gce(const std::vector<long double>& z, int y, long double alpha) {
  const std::size_t k = z.size();
  std::vector<long double> p(k);
  for (std::size_t j = 0; j < k; ++j) p[j] = std::exp(ref_log_softmax(z, j));
  long double h = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (static_cast<int>(j) == y) continue;
    const long double q = p[j] / (1 - p[y]);
    if (q > 0) h -= q * std::log(q);
  }
  return -std::pow(p[y], alpha) * h / std::log(static_cast<long double>(k - 1));
}

long double ref_kl(const std::vector<long double>& t, const std::vector<long double>& s,
                   long double temp) {
  std::vector<long double> ts(t.size()), ss(s.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    ts[j] = t[j] / temp;
    ss[j] = s[j] / temp;
  }
  long double kl = 0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const long double lp = ref_log_softmax(ts, j);
    kl += std::exp(lp) * (lp - ref_log_softmax(ss, j));
  }
  return kl;
}

void criterion_loss_oracles() {
  Stopwatch sw;
  std::mt19937_64 rng(20260101);
  std::uniform_int_distribution<int> classes(3, 10);
  std::normal_distribution<double> logit(0.0, 3.0);
  std::uniform_real_distribution<double> temp(0.5, 100.0);
  std::uniform_real_distribution<double> alpha(0.1, 3.0);
  std::uniform_real_distribution<double> unit(0.0, 2.0);
  double worst = 0;
  int evals = 0;
  for (int n = 0; n < kOracleInstances; ++n) {
    const int k = classes(rng);
    Matrix z(k, 1), t(k, 1);
    std::vector<long double> zl(k), tl(k);
    for (int j = 0; j < k; ++j) {
      z(j, 0) = logit(rng);
      t(j, 0) = logit(rng);
      zl[j] = z(j, 0);
      tl[j] = t(j, 0);
    }
    const int y = std::uniform_int_distribution<int>(0, k - 1)(rng);
    const double tt = temp(rng);
    const double a = alpha(rng);
    const int labels[] = {y};
    const double ce = ce_loss<Scalar>(z, labels).value;
    const double gce = gce_loss<Scalar>(z, labels, a).value;
    const double kl = distill_loss<Scalar>(t, z, tt).value;
    for (double v : {ce, gce, kl}) finite.note(v);
    worst = std::max(worst, std::abs(ce - static_cast<double>(ref_ce(zl, y))));
    worst = std::max(worst, std::abs(gce - static_cast<double>(ref_gce(zl, y, a))));
    worst = std::max(worst, std::abs(kl - static_cast<double>(ref_kl(tl, zl, tt))));

    LossBreakdown parts{ce, unit(rng), unit(rng), kl, unit(rng), unit(rng), 0};
    LossWeights w;
    w.lambda_task = unit(rng);
    w.lambda_map = unit(rng);
    w.lambda_ae = unit(rng);
    w.lambda_int = unit(rng);
    const double total = composite_loss(parts, w).total;
    const double expect = w.lambda_task * parts.task +
                          w.lambda_map * (parts.embed_map + parts.latent_map + parts.distill) +
                          w.lambda_ae * parts.autoencoder + w.lambda_int * parts.interpretable;
    finite.note(total);
    worst = std::max(worst, std::abs(total - expect));
    evals += 4;
  }
  const double s = sw.seconds();
  report(1, "loss oracles",
         worst <= kOracleTol && s < kBudgetLossOracles,
         std::to_string(evals) + " evaluations on " + std::to_string(kOracleInstances) +
             " instances, max |err| " + fmt("%.2e", worst) + fmt(" <= %.0e", kOracleTol) +
             ", " + timing(s, kBudgetLossOracles));
}

// ---------------------------------------------------------------------------
// Criterion 2: finite differences through a d=H=3, V=50, K=4 model.

ModelConfig tiny_config(int dim, int vocab, int classes, int aspects) {
  ModelConfig c;
  c.embed_dim = c.hidden_dim = dim;
  c.vocab_size = vocab;
  c.num_classes = classes;
  c.num_aspects = aspects;
  c.max_len = 8;
  c.seed = 3;
  return c;
}

void criterion_gradients() {
  Stopwatch sw;
  ModelConfig tc = tiny_config(5, 50, 4, 0);
  tc.seed = 9;
  const LstmClassifier teacher = LstmClassifier::init(tc);
  StudentBundle bundle = StudentBundle::init(teacher, tiny_config(3, 50, 4, 2));
  bundle.for_each_param([](const char*, auto& p) { p *= 8.0; });

  std::vector<EncodedExample> data(3);
  data[0] = {{5, 17, 33, 2, 0, 0, 0, 0}, 4, 1, 0};
  data[1] = {{44, 3, 9, 0, 0, 0, 0, 0}, 3, 3, 1};
  data[2] = {{7, 7, 12, 40, 21, 0, 0, 0}, 5, 2, 0};
  std::vector<const EncodedExample*> batch;
  for (const auto& e : data) batch.push_back(&e);

  struct Term {
    const char* name;
    TaskLoss task;
    AblationFlags flags;
    LossWeights weights;
  };
  auto only = [](double l1, double l2, double l3, double l4) {
    LossWeights w;
    w.lambda_task = l1;
    w.lambda_map = l2;
    w.lambda_ae = l3;
    w.lambda_int = l4;
    w.temperature = 2.0;
    return w;
  };
  const AblationFlags none = AblationFlags::none();
  auto flag = [&](auto member) {
    AblationFlags f = none;
    f.*member = true;
    return f;
  };
  const std::vector<Term> terms = {
      {"ce", TaskLoss::kCe, none, only(1, 0, 0, 0)},
      {"gce", TaskLoss::kGce, none, only(1, 0, 0, 0)},
      {"embed_map", TaskLoss::kCe, flag(&AblationFlags::embed_map), only(0, 1, 0, 0)},
      {"latent_map", TaskLoss::kCe, flag(&AblationFlags::latent_map), only(0, 1, 0, 0)},
      {"distill", TaskLoss::kCe, flag(&AblationFlags::distill), only(0, 1, 0, 0)},
      {"autoencoder", TaskLoss::kCe, flag(&AblationFlags::autoencoder), only(0, 0, 1, 0)},
      {"interpretable", TaskLoss::kCe, flag(&AblationFlags::interpretable), only(0, 0, 0, 1)},
      {"composite/ce", TaskLoss::kCe, AblationFlags{}, only(0.2, 0.8, 0.5, 0.5)},
      {"composite/gce", TaskLoss::kGce, AblationFlags{}, only(0.2, 0.8, 0.5, 0.5)},
  };
  double worst = 0;
  bool all = true;
  std::string worst_term;
  std::size_t sampled = 0;
  for (const auto& term : terms) {
    TrainPlan plan;
    plan.task_loss = term.task;
    plan.flags = term.flags;
    plan.weights = term.weights;
    StudentBundle grads = StudentBundle::zeros_like(bundle);
    composite_batch(bundle, teacher, batch, {}, plan, &grads);
    const Vector p0 = flatten(bundle);
    const Vector g = flatten(grads);
    auto f = [&](const Vector& p) {
      StudentBundle b = bundle;
      unflatten(p, b);
      return composite_batch(b, teacher, batch, {}, plan, nullptr).total;
    };
    // Mostly coordinates the term touches, plus a few uniform draws.
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<Index> pick(0, p0.size() - 1);
    std::vector<Index> idx;
    for (int tries = 0; idx.size() < static_cast<std::size_t>(kGradParams) - 10 && tries < 20000;
         ++tries) {
      const Index i = pick(rng);
      if (g(i) != 0.0) idx.push_back(i);
    }
    while (idx.size() < static_cast<std::size_t>(kGradParams)) idx.push_back(pick(rng));
    const auto r = grad_check(f, g, p0, idx, kGradEps, kGradTol);
    for (const auto& e : r.entries) {
      finite.note(e.analytic);
      finite.note(e.numeric);
    }
    sampled += r.entries.size();
    all = all && r.passed && r.entries.size() >= 50;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_term = term.name;
    }
    std::cout << "  grad " << term.name << ": " << r.entries.size() << " params, max rel "
              << fmt("%.2e", r.max_rel_error) << std::endl;
  }
  const double s = sw.seconds();
  report(2, "gradient checks", all && s < kBudgetGradients,
         std::to_string(terms.size()) + " terms, " + std::to_string(sampled) +
             " sampled params, max rel err " + fmt("%.2e", worst) + " (" + worst_term + ")" +
             fmt(" <= %.0e", kGradTol) + ", " + timing(s, kBudgetGradients));
}

// ---------------------------------------------------------------------------
// Criterion 3: parameter accounting.

void criterion_param_count() {
  bool ok = true;
  std::string detail;
  for (int d : {1, 5, 10, 20, 100}) {
    ModelConfig c = tiny_config(d, 10, 2, 0);
    const long long expect = 4LL * d * ((d + 1) + d);
    const long long got = param_count(c).lstm;
    ok = ok && got == expect;
    detail += std::to_string(got) + (d == 100 ? "" : "/");
  }
  detail = "lstm " + detail;
  const struct {
    int dim;
    double bracket;
  } presets[] = {{5, 100e3}, {10, 200e3}, {20, 400e3}};
  for (const auto& p : presets) {
    const long long total = param_count(ModelConfig::compressed(p.dim, 20000, 4)).total;
    const bool in = std::abs(total - p.bracket) <= kBracketTol * p.bracket;
    ok = ok && in;
    detail += ", d=" + std::to_string(p.dim) + " total " + std::to_string(total) +
              fmt(" vs %.0fK", p.bracket / 1e3);
  }
  const long long full = param_count(ModelConfig::full(20000, 4)).total;
  detail += ", full " + std::to_string(full);
  report(3, "parameter accounting", ok, detail);
}

// ---------------------------------------------------------------------------
// Criteria 4-6: trends on the news-style corpus.

TopicCorpusOptions news_options(int seed) {
  TopicCorpusOptions o;
  o.train = 8000;
  o.val = 1000;
  o.test = 1000;
  o.topic_rate = 0.08;
  o.ambiguous_rate = 0.06;
  o.context_rate = 0.25;
  o.seed = 1000 + static_cast<std::uint64_t>(seed);
  return o;
}

constexpr int kNewsMaxLen = 32;
constexpr int kTeacherDim = 32;

TrainPlan news_plan(int seed) {
  TrainPlan p;
  p.seed = static_cast<std::uint64_t>(seed);
  p.epochs = 40;
  p.batch_size = 64;
  p.learning_rate = 1e-3;
  p.patience = 5;
  p.cache_teacher = true;
  return p;
}

struct SeedTrends {
  double scheme_acc = 0;        // GCE + scheme, d=10 ("All")
  double conventional_acc = 0;  // GCE, no scheme
  double gce_adv = 0;
  double ce_adv = 0;
  std::vector<std::pair<std::string, double>> ablations;
  double size_acc[3] = {0, 0, 0};  // d = 5, 10, 20
  double trend_seconds = 0;
  double ablation_seconds = 0;
  double size_seconds = 0;
};

// Kept for criterion 7.
struct ContractFixture {
  SplitCorpus corpus;
  std::optional<Vocabulary> vocab;
  std::optional<LstmClassifier> model;
};
ContractFixture contract_fixture;

double replaceone_adv_acc(const LstmClassifier& m, const Vocabulary& vocab,
                          std::span<const RawExample> test, int seed) {
  AttackSuiteOptions ao;
  ao.attack = AttackKind::kReplaceOne;
  ao.n_samples = kTrendAttackSamples;
  ao.seed = static_cast<std::uint64_t>(seed);
  const auto r = run_attack_suite(m, vocab, test, ao);
  const auto metrics = evaluate_adversarial(m, vocab, AdvDataset{r.examples, model_fingerprint(m)});
  finite.note(metrics.acc);
  return metrics.acc;
}

double test_acc(const LstmClassifier& m, std::span<const EncodedExample> test) {
  const double acc = evaluate(m, test).acc;
  finite.note(acc);
  return acc;
}

SeedTrends run_news_seed(int seed) {
  SeedTrends out;
  Stopwatch trend;
  SplitCorpus c = make_topic_corpus(news_options(seed));
  const Vocabulary vocab = Vocabulary::build(c.train, 20000, 1);
  const int v = static_cast<int>(vocab.size());
  const auto tr = encode_all(c.train, vocab, kNewsMaxLen);
  const auto va = encode_all(c.val, vocab, kNewsMaxLen);
  const auto te = encode_all(c.test, vocab, kNewsMaxLen);

  ModelConfig fc = ModelConfig::full(v, 4, kTeacherDim);
  fc.max_len = kNewsMaxLen;
  fc.seed = static_cast<std::uint64_t>(seed);
  TrainPlan tp = news_plan(seed);
  tp.task_loss = TaskLoss::kCe;
  const TrainResult teacher = pretrain_full(fc, tp, tr, va);
  finite.note(teacher);
  std::cout << "  seed " << seed << ": teacher acc " << fmt("%.3f", test_acc(teacher.model, te))
            << std::endl;

  auto student = [&](int dim) {
    ModelConfig sc = ModelConfig::compressed(dim, v, 4);
    sc.max_len = kNewsMaxLen;
    sc.seed = static_cast<std::uint64_t>(seed);
    return sc;
  };
  const TrainPlan gce = news_plan(seed);  // GCE, full scheme
  const CompressedResult scheme = train_compressed(teacher.model, student(10), gce, tr, va);
  finite.note(scheme);
  out.scheme_acc = out.size_acc[1] = test_acc(scheme.model, te);

  TrainPlan conv_plan = gce;
  conv_plan.flags = AblationFlags::none();
  conv_plan.weights.lambda_task = 1.0;
  const TrainResult conv = train_conventional(student(10), conv_plan, tr, va);
  finite.note(conv);
  out.conventional_acc = test_acc(conv.model, te);

  TrainPlan ce_plan = gce;
  ce_plan.task_loss = TaskLoss::kCe;
  const CompressedResult ce = train_compressed(teacher.model, student(10), ce_plan, tr, va);
  finite.note(ce);
  out.gce_adv = replaceone_adv_acc(scheme.model, vocab, c.test, seed);
  out.ce_adv = replaceone_adv_acc(ce.model, vocab, c.test, seed);
  out.trend_seconds = trend.seconds();
  std::cout << "  seed " << seed << ": d=10 scheme " << fmt("%.3f", out.scheme_acc)
            << " conventional " << fmt("%.3f", out.conventional_acc) << " | Replaceone AdvAcc GCE "
            << fmt("%.3f", out.gce_adv) << " CE " << fmt("%.3f", out.ce_adv) << std::endl;

  Stopwatch ablation;
  for (const auto& variant : default_ablation_grid()) {
    if (variant.flags == AblationFlags{}) continue;  // "All" is the scheme model
    TrainPlan p = gce;
    p.flags = variant.flags;
    const CompressedResult r = train_compressed(teacher.model, student(10), p, tr, va);
    finite.note(r);
    out.ablations.emplace_back(variant.name, test_acc(r.model, te));
  }
  out.ablation_seconds = ablation.seconds();
  std::cout << "  seed " << seed << ": ablation All " << fmt("%.3f", out.scheme_acc);
  for (const auto& [name, acc] : out.ablations) std::cout << " | " << name << " " << fmt("%.3f", acc);
  std::cout << std::endl;

  Stopwatch sizes;
  for (int i : {0, 2}) {
    const int dim = i == 0 ? 5 : 20;
    const CompressedResult r = train_compressed(teacher.model, student(dim), gce, tr, va);
    finite.note(r);
    out.size_acc[i] = test_acc(r.model, te);
  }
  out.size_seconds = sizes.seconds();
  std::cout << "  seed " << seed << ": size d=5 " << fmt("%.3f", out.size_acc[0]) << " d=10 "
            << fmt("%.3f", out.size_acc[1]) << " d=20 " << fmt("%.3f", out.size_acc[2]) << std::endl;

  if (seed == 1) {
    contract_fixture.corpus = std::move(c);
    contract_fixture.vocab = vocab;
    contract_fixture.model = scheme.model;
  }
  return out;
}

void criteria_trends() {
  std::vector<SeedTrends> seeds;
  for (int s = 1; s <= kSeeds; ++s) seeds.push_back(run_news_seed(s));

  int a = 0, b = 0, ablate = 0, size = 0;
  double trend_s = 0;
  std::string adetail, bdetail, abl_detail, size_detail;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& t = seeds[i];
    trend_s += t.trend_seconds;
    a += t.scheme_acc >= t.conventional_acc;
    b += t.gce_adv >= t.ce_adv;
    adetail += (i ? ", " : "") + fmt("%.3f", t.scheme_acc) + fmt("/%.3f", t.conventional_acc);
    bdetail += (i ? ", " : "") + fmt("%.3f", t.gce_adv) + fmt("/%.3f", t.ce_adv);

    bool all_best = true;
    for (const auto& [name, acc] : t.ablations) all_best = all_best && t.scheme_acc >= acc;
    ablate += all_best;
    abl_detail += std::string(i ? ", " : "") + (all_best ? "yes" : "no");

    int inversions = 0;
    bool small = true;
    for (int k = 0; k < 2; ++k) {
      const double drop = t.size_acc[k] - t.size_acc[k + 1];
      if (drop > 0) {
        ++inversions;
        small = small && drop <= kSizeInversionTol;
      }
    }
    const bool mono = inversions == 0 || (inversions == 1 && small);
    size += mono;
    size_detail += (i ? ", " : "") + fmt("%.3f", t.size_acc[0]) + fmt("<=%.3f", t.size_acc[1]) +
                   fmt("<=%.3f", t.size_acc[2]) + (mono ? "" : " (violated)");
  }
  const bool in_time = trend_s < kBudgetTrend;
  report(4, "trend (a) scheme vs conventional clean acc",
         a >= kSeedMajority && in_time,
         std::to_string(a) + "/" + std::to_string(kSeeds) + " seeds (need " +
             std::to_string(kSeedMajority) + "), acc scheme/conventional " + adetail + ", " +
             timing(trend_s, kBudgetTrend));
  report(4, "trend (b) GCE vs CE Replaceone AdvAcc",
         b >= kSeedMajority && in_time,
         std::to_string(b) + "/" + std::to_string(kSeeds) + " seeds (need " +
             std::to_string(kSeedMajority) + "), AdvAcc GCE/CE " + bdetail + " on " +
             std::to_string(kTrendAttackSamples) + " samples");
  report(5, "ablation trend", ablate >= kSeedMajority,
         "All >= every single ablation in " + std::to_string(ablate) + "/" +
             std::to_string(kSeeds) + " seeds (" + abl_detail + ")");
  report(6, "size trend", size == kSeeds,
         "monotone in d=5,10,20 (one inversion <= " + fmt("%.3f", kSizeInversionTol) +
             " allowed) in " + std::to_string(size) + "/" + std::to_string(kSeeds) +
             " seeds: " + size_detail);
}

// ---------------------------------------------------------------------------
// Criterion 7: attack contracts.

std::string check_example(const AdversarialExample& ex, int budget) {
  if (ex.perturbed.size() != ex.original.size()) return "token count changed";
  if (static_cast<int>(ex.edits.size()) > budget) return "budget exceeded";
  std::vector<bool> edited(ex.original.size(), false);
  for (const auto& e : ex.edits) {
    if (e.position < 0 || e.position >= static_cast<int>(ex.original.size())) {
      return "edit out of range";
    }
    const auto pos = static_cast<std::size_t>(e.position);
    if (edited[pos]) return "position edited twice";
    edited[pos] = true;
    if (e.before != ex.original[pos] || e.after != ex.perturbed[pos]) return "edit mismatch";
  }
  for (std::size_t i = 0; i < edited.size(); ++i) {
    if (!edited[i] && ex.original[i] != ex.perturbed[i]) return "unrecorded change";
  }
  return "";
}

void criterion_attack_contracts() {
  Stopwatch sw;
  const auto& fx = contract_fixture;
  const StaticLexicon lexicon(group_synonyms(fx.corpus.word_groups, 3));
  bool ok = fx.corpus.test.size() >= kContractSamples;
  std::string detail;
  for (AttackKind kind :
       {AttackKind::kReplaceOne, AttackKind::kGradient, AttackKind::kPwws, AttackKind::kRandom}) {
    AttackSuiteOptions o;
    o.attack = kind;
    o.n_samples = kContractSamples;
    o.seed = 7;
    o.synonyms = &lexicon;
    const auto first = run_attack_suite(*fx.model, *fx.vocab, fx.corpus.test, o);
    const auto second = run_attack_suite(*fx.model, *fx.vocab, fx.corpus.test, o);
    const std::string fp = model_fingerprint(*fx.model);
    const bool same = sha256_hex(adversarial_jsonl(first.examples, fp)) ==
                      sha256_hex(adversarial_jsonl(second.examples, fp));
    std::string problem;
    for (const auto& ex : first.examples) {
      const int limit = kind == AttackKind::kPwws ? static_cast<int>(ex.original.size()) : 1;
      problem = check_example(ex, limit);
      if (!problem.empty()) break;
      finite.note(static_cast<double>(ex.queries));
    }
    finite.note(first.summary.success_rate);
    const bool black_box = kind == AttackKind::kGradient ? first.summary.gradient_calls > 0
                                                         : first.summary.gradient_calls == 0;
    const bool n_ok = first.examples.size() == kContractSamples;
    const bool pass = same && problem.empty() && black_box && n_ok;
    ok = ok && pass;
    detail += (detail.empty() ? "" : "; ") + attack_name(kind) + " n=" +
              std::to_string(first.examples.size()) + " grad_calls=" +
              std::to_string(first.summary.gradient_calls) +
              fmt(" success=%.3f", first.summary.success_rate) + (same ? " deterministic" : " NONDETERMINISTIC") +
              (problem.empty() ? "" : " [" + problem + "]");
  }
  const double s = sw.seconds();
  report(7, "attack contracts", ok && s < kBudgetContracts,
         detail + ", " + timing(s, kBudgetContracts));
}

// ---------------------------------------------------------------------------
// Criterion 8: aspect attention with and without the interpretable term.

void criterion_explain() {
  Stopwatch sw;
  constexpr int kMax = 24;
  bool ok = true;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    AspectCorpusOptions o;
    o.seed = 3000 + static_cast<std::uint64_t>(seed);
    const AspectCorpus c = make_aspect_corpus(o);
    const Vocabulary vocab = Vocabulary::build(c.splits.train, 20000, 1);
    const int v = static_cast<int>(vocab.size());
    const auto tr = encode_all(c.splits.train, vocab, kMax);
    const auto va = encode_all(c.splits.val, vocab, kMax);
    const auto te = encode_all(c.splits.test, vocab, kMax);

    ModelConfig fc = ModelConfig::full(v, o.num_classes, kTeacherDim);
    fc.max_len = kMax;
    fc.seed = static_cast<std::uint64_t>(seed);
    TrainPlan plan;
    plan.seed = static_cast<std::uint64_t>(seed);
    plan.epochs = 20;
    plan.learning_rate = 1e-2;
    plan.task_loss = TaskLoss::kCe;
    const TrainResult teacher = pretrain_full(fc, plan, tr, va);
    finite.note(teacher);

    double hits[2] = {0, 0};
    const double lambdas[2] = {0.5, 0.0};
    for (int i = 0; i < 2; ++i) {
      ModelConfig sc = ModelConfig::compressed(10, v, o.num_classes);
      sc.max_len = kMax;
      sc.seed = static_cast<std::uint64_t>(seed);
      sc.num_aspects = o.num_aspects;
      TrainPlan sp = plan;
      sp.task_loss = TaskLoss::kGce;
      sp.cache_teacher = true;
      sp.weights.lambda_int = lambdas[i];
      const CompressedResult r = train_compressed(teacher.model, sc, sp, tr, va);
      finite.note(r);
      hits[i] = hit_ratio(r.model, te).ratio;
      finite.note(hits[i]);
    }
    const bool pass = hits[0] >= kHitWith && hits[1] <= kHitWithout;
    ok = ok && pass;
    detail += (seed > 1 ? ", " : "") + fmt("%.3f", hits[0]) + fmt("/%.3f", hits[1]);
    std::cout << "  explain seed " << seed << ": hit with " << fmt("%.3f", hits[0])
              << " without " << fmt("%.3f", hits[1]) << std::endl;
  }
  const double s = sw.seconds();
  report(8, "explainability", ok && s < kBudgetExplain,
         "hit ratio lambda4=0.5 / lambda4=0 per seed " + detail + fmt(" (need >= %.2f", kHitWith) +
             fmt(" / <= %.2f), ", kHitWithout) + timing(s, kBudgetExplain));
}

// ---------------------------------------------------------------------------
// Criterion 9: personalization selects exactly the shifted users.

void criterion_personalize() {
  Stopwatch sw;
  constexpr int kMax = 32;
  bool exact = true;
  bool invariant = true;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    FleetOptions o;
    o.base.seed = 2000 + static_cast<std::uint64_t>(seed);
    o.base.train = 4000;
    o.base.val = 500;
    o.base.test = 500;
    o.user_train = 100;
    o.user_val = 1000;
    o.user_test = 300;
    const Fleet fleet = make_fleet(o);
    const Vocabulary vocab = Vocabulary::build(fleet.global.train, 20000, 1);
    const auto tr = encode_all(fleet.global.train, vocab, kMax);
    const auto va = encode_all(fleet.global.val, vocab, kMax);

    ModelConfig c = ModelConfig::compressed(10, static_cast<int>(vocab.size()), 4);
    c.max_len = kMax;
    c.seed = static_cast<std::uint64_t>(seed);
    TrainPlan gp;
    gp.seed = static_cast<std::uint64_t>(seed);
    gp.epochs = 60;
    gp.learning_rate = 1e-2;
    gp.task_loss = TaskLoss::kGce;
    const TrainResult global = train_conventional(c, gp, tr, va);
    finite.note(global);

    PersonalizePlan pp;
    pp.train.seed = static_cast<std::uint64_t>(seed);
    pp.train.epochs = 80;
    pp.train.batch_size = 16;
    pp.train.learning_rate = 1e-2;
    pp.train.task_loss = TaskLoss::kGce;
    const FleetReport rep = run_fleet(global.model, vocab, fleet.users, pp);
    std::string chosen;
    for (std::size_t u = 0; u < rep.users.size(); ++u) {
      const auto& r = rep.users[u];
      finite.note(r.global_val_acc);
      finite.note(r.test_acc);
      double best = -1;
      for (const auto& t : r.per_temperature) {
        finite.note(t.val_acc);
        best = std::max(best, t.val_acc);
      }
      invariant = invariant && r.chosen_val_acc() >= r.global_val_acc &&
                  r.personal_chosen == (best > r.global_val_acc);
      exact = exact && r.personal_chosen == fleet.shifted[u];
      chosen += r.personal_chosen ? "P" : "G";
      std::cout << "  fleet seed " << seed << " " << r.user_id
                << (fleet.shifted[u] ? " shifted" : " aligned") << ": global val "
                << fmt("%.3f", r.global_val_acc) << " best personal " << fmt("%.3f", best)
                << " -> " << (r.personal_chosen ? "personal" : "global") << std::endl;
    }
    std::string truth;
    for (bool b : fleet.shifted) truth += b ? "P" : "G";
    detail += (seed > 1 ? ", " : "") + chosen + " vs " + truth;
  }
  const double s = sw.seconds();
  report(9, "personalization selection", exact && invariant && s < kBudgetPersonalize,
         "chosen vs shifted per seed " + detail + ", invariant " +
             (invariant ? "holds" : "VIOLATED") + ", " + timing(s, kBudgetPersonalize));
}

// ---------------------------------------------------------------------------
// Criterion 10: edge cases and numerical hygiene.

void criterion_edge_cases() {
  bool ok = true;
  std::string detail;

  std::ostringstream captured;
  std::streambuf* saved = std::cerr.rdbuf(captured.rdbuf());
  Matrix z(2, 3);
  z << 1.0, -2.0, 0.5, 3.0, 0.0, -1.0;
  const int labels[] = {0, 1, 1};
  const auto g = gce_loss<Scalar>(z, labels, 1.0);
  std::cerr.rdbuf(saved);
  const bool gce_ok = g.value == 0.0 && g.degenerate && g.grad.isZero(0.0) &&
                      captured.str().find("warning") != std::string::npos;
  ok = ok && gce_ok;
  detail += std::string("GCE K=2 ") + (gce_ok ? "0 + degenerate + warning" : "WRONG");

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  double worst = 0;
  for (int n = 0; n < 100; ++n) {
    Matrix t(4, 1), s(4, 1);
    for (int j = 0; j < 4; ++j) {
      t(j, 0) = u(rng);
      s(j, 0) = u(rng);
    }
    const double kl = distill_loss<Scalar>(t, s, 1e4).value;
    finite.note(kl);
    worst = std::max(worst, std::abs(kl));
  }
  ok = ok && worst < kKlHighT;
  detail += fmt(", KL at T=1e4 max %.2e", worst) + fmt(" < %.0e", kKlHighT);

  ok = ok && finite.bad == 0 && finite.checked > 0;
  detail += ", " + std::to_string(finite.checked) + " recorded values, " +
            std::to_string(finite.bad) + " non-finite or diverged";
  report(10, "edge cases", ok, detail);
}

}  // namespace
}  // namespace distilledge

int main() {
  using namespace distilledge;
  Stopwatch total;
  criterion_loss_oracles();
  criterion_gradients();
  criterion_param_count();
  criteria_trends();
  criterion_attack_contracts();
  criterion_explain();
  criterion_personalize();
  criterion_edge_cases();
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED")
            << fmt(" in %.0f s", total.seconds()) << std::endl;
  return failures == 0 ? 0 : 1;
}
