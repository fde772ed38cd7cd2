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

#include "distilledge/evalreport.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "distilledge/errors.hpp"
#include "distilledge/hash.hpp"
#include "distilledge/losses.hpp"

namespace distilledge {
namespace {

using nlohmann::json;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pct_pair(double a, double b) { return fixed(100 * a, 1) + "/" + fixed(100 * b, 1); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

std::string opt(const std::optional<double>& v) { return v ? fixed(*v, 6) : std::string(); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Group {
  std::string dataset, model, task_loss, scheme;
  double acc = 0, f1 = 0;
  std::optional<double> hit_ratio;
  std::map<std::string, std::pair<double, double>> adv;
};

std::vector<std::string> attack_order(std::span<const ResultRow> rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (!r.attack.empty() && std::find(out.begin(), out.end(), r.attack) == out.end()) {
      out.push_back(r.attack);
    }
  }
  return out;
}

std::vector<Group> group_rows(std::span<const ResultRow> rows) {
  std::vector<Group> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.dataset == r.dataset && g.model == r.model && g.task_loss == r.task_loss &&
             g.scheme == r.scheme;
    });
    if (it == groups.end()) {
      groups.push_back({r.dataset, r.model, r.task_loss, r.scheme, r.acc, r.f1, r.hit_ratio, {}});
      it = groups.end() - 1;
    }
    if (!it->hit_ratio && r.hit_ratio) it->hit_ratio = r.hit_ratio;
    if (!r.attack.empty() && r.adv_acc) {
      it->adv[r.attack] = {*r.adv_acc, r.adv_f1.value_or(0.0)};
    }
  }
  return groups;
}

}  // namespace

json MetricsReport::to_json() const {
  json j{{"acc", acc}, {"macro_f1", macro_f1}, {"n", n}, {"dataset_fingerprint", dataset_fingerprint}};
  json pc = json::array();
  for (const auto& c : per_class) {
    pc.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
  }
  j["per_class"] = pc;
  json conf = json::array();
  for (Index r = 0; r < confusion.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < confusion.cols(); ++c) row.push_back(confusion(r, c));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  if (adversarial) {
    j["adversarial"] = {{"attack", adversarial->attack},
                        {"adv_acc", adversarial->adv_acc},
                        {"adv_f1", adversarial->adv_f1},
                        {"success_rate", adversarial->success_rate}};
  }
  return j;
}

int argmax_lowest(const Vector& scores) {
  Index best = 0;
  for (Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(best)) best = i;
  }
  return static_cast<int>(best);
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  if (confusion.rows() != confusion.cols() || confusion.rows() < 1) {
    throw ShapeError("confusion matrix must be square and non-empty");
  }
  MetricsReport r;
  r.confusion = confusion;
  r.n = confusion.sum();
  if (r.n == 0) throw FormatError("cannot compute metrics on an empty dataset");
  r.acc = static_cast<double>(confusion.trace()) / static_cast<double>(r.n);
  const Index k = confusion.rows();
  double f1_sum = 0;
  for (Index c = 0; c < k; ++c) {
    const double tp = static_cast<double>(confusion(c, c));
    const double predicted = static_cast<double>(confusion.col(c).sum());
    const double actual = static_cast<double>(confusion.row(c).sum());
    ClassScores s;
    s.precision = predicted > 0 ? tp / predicted : 0.0;
    s.recall = actual > 0 ? tp / actual : 0.0;
    const bool defined = predicted > 0 && actual > 0 && s.precision + s.recall > 0;
    s.f1 = defined ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    f1_sum += s.f1;
    r.per_class.push_back(s);
  }
  r.macro_f1 = f1_sum / static_cast<double>(k);
  return r;
}

MetricsReport metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                       int num_classes) {
  if (truth.size() != predicted.size()) throw ShapeError("truth/prediction length mismatch");
  if (truth.empty()) throw FormatError("cannot compute metrics on an empty dataset");
  ConfusionMatrix conf = ConfusionMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes) {
      throw ShapeError("class index outside [0, K)");
    }
    ++conf(truth[i], predicted[i]);
  }
  return metrics_from_confusion(conf);
}

std::vector<int> predict_labels(const LstmClassifier& model, std::span<const EncodedExample> dataset) {
  std::vector<int> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset) out.push_back(argmax_lowest(forward(model, ex, false).logits));
  return out;
}

std::string dataset_fingerprint(std::span<const EncodedExample> dataset) {
  std::string buf;
  for (const auto& ex : dataset) {
    buf += std::to_string(ex.label);
    buf.push_back(':');
    buf += ex.aspect ? std::to_string(*ex.aspect) : "-";
    for (int id : ex.token_ids) {
      buf.push_back(' ');
      buf += std::to_string(id);
    }
    buf.push_back('\n');
  }
  return sha256_hex(buf);
}

MetricsReport evaluate(const LstmClassifier& model, std::span<const EncodedExample> dataset) {
  if (dataset.empty()) throw FormatError("cannot evaluate on an empty dataset");
  std::vector<int> truth;
  truth.reserve(dataset.size());
  for (const auto& ex : dataset) truth.push_back(ex.label);
  const auto pred = predict_labels(model, dataset);
  auto r = metrics_from_predictions(truth, pred, model.config.num_classes);
  r.dataset_fingerprint = dataset_fingerprint(dataset);
  return r;
}

MetricsReport evaluate_adversarial(const LstmClassifier& model, const Vocabulary& vocab,
                                   const AdvDataset& adv) {
  const std::string expected = model_fingerprint(model);
  if (adv.checkpoint_hash != expected) {
    throw Error("checkpoint_mismatch", "adversarial set was generated against checkpoint " +
                                           adv.checkpoint_hash.substr(0, 12) + ", not " +
                                           expected.substr(0, 12));
  }
  if (adv.examples.empty()) throw FormatError("cannot evaluate on an empty adversarial set");
  std::vector<EncodedExample> encoded;
  std::size_t succeeded = 0;
  for (const auto& ex : adv.examples) {
    encoded.push_back(encode_tokens(ex.perturbed, ex.label, std::nullopt, vocab, model.config.max_len));
    if (ex.success) ++succeeded;
  }
  auto r = evaluate(model, encoded);
  AdversarialMetrics am;
  am.attack = adv.examples.front().attack;
  am.adv_acc = r.acc;
  am.adv_f1 = r.macro_f1;
  am.success_rate = static_cast<double>(succeeded) / static_cast<double>(adv.examples.size());
  r.adversarial = am;
  return r;
}

json ResultRow::to_json() const {
  json j{{"run_id", run_id}, {"dataset", dataset}, {"model", model}, {"task_loss", task_loss},
         {"scheme", scheme}, {"attack", attack},   {"acc", acc},     {"f1", f1}};
  j["adv_acc"] = adv_acc ? json(*adv_acc) : json(nullptr);
  j["adv_f1"] = adv_f1 ? json(*adv_f1) : json(nullptr);
  j["hit_ratio"] = hit_ratio ? json(*hit_ratio) : json(nullptr);
  return j;
}

ResultRow ResultRow::from_json(const json& j) {
  ResultRow r;
  try {
    r.run_id = j.value("run_id", "");
    r.dataset = j.value("dataset", "");
    r.model = j.value("model", "");
    r.task_loss = j.value("task_loss", "");
    r.scheme = j.value("scheme", "");
    r.attack = j.value("attack", "");
    r.acc = j.at("acc").get<double>();
    r.f1 = j.at("f1").get<double>();
    auto get = [&](const char* key) -> std::optional<double> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      return j[key].get<double>();
    };
    r.adv_acc = get("adv_acc");
    r.adv_f1 = get("adv_f1");
    r.hit_ratio = get("hit_ratio");
  } catch (const json::exception& e) {
    throw FormatError(std::string("result row: ") + e.what());
  }
  return r;
}

std::string results_csv(std::span<const ResultRow> rows) {
  std::string out = "run_id,dataset,model,task_loss,scheme,attack,acc,f1,adv_acc,adv_f1,hit_ratio\n";
  for (const auto& r : rows) {
    out += csv_field(r.run_id) + "," + csv_field(r.dataset) + "," + csv_field(r.model) + "," +
           csv_field(r.task_loss) + "," + csv_field(r.scheme) + "," + csv_field(r.attack) + "," +
           fixed(r.acc, 6) + "," + fixed(r.f1, 6) + "," + opt(r.adv_acc) + "," + opt(r.adv_f1) +
           "," + opt(r.hit_ratio) + "\n";
  }
  return out;
}

std::string results_markdown(std::span<const ResultRow> rows) {
  const auto attacks = attack_order(rows);
  const auto groups = group_rows(rows);
  bool any_hit = false;
  for (const auto& g : groups) any_hit = any_hit || g.hit_ratio.has_value();

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> head{"Dataset", "Model", "Loss", "Scheme", "Clean Acc/F1"};
  for (const auto& a : attacks) head.push_back(a + " AdvAcc/AdvF1");
  if (any_hit) head.push_back("Hit-ratio");
  table.push_back(head);
  for (const auto& g : groups) {
    std::vector<std::string> row{g.dataset, g.model, g.task_loss, g.scheme, pct_pair(g.acc, g.f1)};
    for (const auto& a : attacks) {
      auto it = g.adv.find(a);
      row.push_back(it == g.adv.end() ? "N/A" : pct_pair(it->second.first, it->second.second));
    }
    if (any_hit) row.push_back(g.hit_ratio ? fixed(100 * *g.hit_ratio, 1) : "N/A");
    table.push_back(row);
  }
  std::vector<std::size_t> width(head.size(), 3);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto render = [&](const std::vector<std::string>& row) {
    std::string line = "|";
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += " " + row[c] + std::string(width[c] - row[c].size(), ' ') + " |";
    }
    return line + "\n";
  };
  std::string out = render(table[0]);
  out += "|";
  for (std::size_t c = 0; c < width.size(); ++c) out += std::string(width[c] + 2, '-') + "|";
  out += "\n";
  for (std::size_t r = 1; r < table.size(); ++r) out += render(table[r]);
  return out;
}

std::string accuracy_chart_svg(std::span<const ResultRow> rows) {
  static const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};
  const auto attacks = attack_order(rows);
  const auto groups = group_rows(rows);
  const int bars = 1 + static_cast<int>(attacks.size());
  const int bar_w = 18, gap = 24, left = 50, top = 30, plot_h = 200;
  const int group_w = bars * bar_w + gap;
  const int width = left + static_cast<int>(groups.size()) * group_w + 20 + 160;
  const int height = top + plot_h + 90;
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
    << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"10\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << left << "\" y=\"18\" font-size=\"12\">Clean vs adversarial accuracy</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = top + plot_h - plot_h * t / 4.0;
    s << "<line x1=\"" << left << "\" y1=\"" << fixed(y, 1) << "\" x2=\""
      << left + static_cast<int>(groups.size()) * group_w << "\" y2=\"" << fixed(y, 1)
      << "\" stroke=\"#dddddd\"/>\n"
      << "<text x=\"" << left - 6 << "\" y=\"" << fixed(y + 3, 1) << "\" text-anchor=\"end\">"
      << t * 25 << "%</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int x0 = left + static_cast<int>(g) * group_w + gap / 2;
    for (int b = 0; b < bars; ++b) {
      double v = 0;
      bool present = true;
      if (b == 0) {
        v = groups[g].acc;
      } else {
        auto it = groups[g].adv.find(attacks[static_cast<std::size_t>(b - 1)]);
        present = it != groups[g].adv.end();
        if (present) v = it->second.first;
      }
      if (!present) continue;
      const double h = plot_h * std::clamp(v, 0.0, 1.0);
      s << "<rect x=\"" << x0 + b * bar_w << "\" y=\"" << fixed(top + plot_h - h, 2)
        << "\" width=\"" << bar_w - 2 << "\" height=\"" << fixed(h, 2) << "\" fill=\""
        << kPalette[b % 6] << "\"><title>" << fixed(100 * v, 1) << "%</title></rect>\n";
    }
    const auto& gr = groups[g];
    const std::string label = gr.model + " " + gr.task_loss + " " + gr.scheme;
    const int cx = x0 + bars * bar_w / 2;
    s << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 14
      << "\" text-anchor=\"end\" transform=\"rotate(-35 " << cx << " " << top + plot_h + 14
      << ")\">" << xml_escape(label) << "</text>\n";
  }
  const int lx = left + static_cast<int>(groups.size()) * group_w + 20;
  for (int b = 0; b < bars; ++b) {
    const std::string name = b == 0 ? "clean" : attacks[static_cast<std::size_t>(b - 1)];
    s << "<rect x=\"" << lx << "\" y=\"" << top + b * 16 << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[b % 6] << "\"/>\n"
      << "<text x=\"" << lx + 14 << "\" y=\"" << top + b * 16 + 9 << "\">" << xml_escape(name)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

EmittedReport emit_report(std::span<const ResultRow> rows, const std::filesystem::path& dir) {
  if (rows.empty()) throw FormatError("no results to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  EmittedReport out;
  const std::pair<const char*, std::string> files[] = {
      {"results.csv", results_csv(rows)},
      {"results.md", results_markdown(rows)},
      {"accuracy.svg", accuracy_chart_svg(rows)}};
  for (const auto& [name, body] : files) {
    write_file(dir / name, body);
    out.files.push_back(dir / name);
  }
  return out;
}

}  // namespace distilledge
