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

#include "distilledge/explain.hpp"

#include <cstdio>

#include "distilledge/errors.hpp"

namespace distilledge {

Vector aspect_scores(const ForwardTrace& trace) {
  if (!trace.attention) throw CapabilityError("trace has no aspect attention");
  return trace.attention->weights.rowwise().sum();
}

HitRatioReport hit_ratio(const LstmClassifier& model, std::span<const EncodedExample> dataset) {
  if (!model.config.has_aspects()) throw CapabilityError("model has no aspect head");
  HitRatioReport report;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& ex = dataset[i];
    if (!ex.aspect) continue;
    const ForwardTrace tr = forward(model, ex, true);
    AspectScoreRecord rec;
    rec.example_id = "ex" + std::to_string(i);
    rec.scores = aspect_scores(tr);
    rec.truth = *ex.aspect;
    Index best = 0;
    for (Index j = 1; j < rec.scores.size(); ++j) {
      if (rec.scores(j) > rec.scores(best)) best = j;
    }
    rec.predicted = static_cast<int>(best);
    for (Index j = 0; j < rec.scores.size(); ++j) {
      if (j != best && rec.scores(j) == rec.scores(best)) rec.tied = true;
    }
    rec.hit = rec.predicted == rec.truth;
    if (rec.hit) ++hits;
    if (rec.tied) ++report.ties;
    report.records.push_back(std::move(rec));
  }
  if (report.records.empty()) throw FormatError("hit-ratio needs aspect-labelled examples");
  report.ratio = static_cast<double>(hits) / static_cast<double>(report.records.size());
  report.degenerate_ties = report.ties > 0;
  return report;
}

std::string hit_records_csv(std::span<const AspectScoreRecord> records, int num_aspects) {
  std::string out = "example_id";
  for (int j = 0; j < num_aspects; ++j) out += ",score_" + std::to_string(j);
  out += ",A_H,A,hit\n";
  char buf[64];
  for (const auto& r : records) {
    out += r.example_id;
    for (Index j = 0; j < r.scores.size(); ++j) {
      std::snprintf(buf, sizeof(buf), ",%.6f", r.scores(j));
      out += buf;
    }
    out += "," + std::to_string(r.predicted) + "," + std::to_string(r.truth) + "," +
           (r.hit ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace distilledge
