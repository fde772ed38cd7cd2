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

#ifndef DISTILLEDGE_EXPLAIN_HPP_
#define DISTILLEDGE_EXPLAIN_HPP_

#include <span>
#include <string>
#include <vector>

#include "distilledge/corpus.hpp"
#include "distilledge/netcore.hpp"

namespace distilledge {

struct AspectScoreRecord {
  std::string example_id;
  Vector scores;           // per-aspect attention summed over tokens
  int predicted = 0;       // argmax of scores, lowest index on ties
  int truth = 0;
  bool hit = false;
  bool tied = false;       // the maximum was shared by several aspects
};

// score_j = sum over non-PAD tokens of the per-token attention on aspect j.
Vector aspect_scores(const ForwardTrace& trace);

struct HitRatioReport {
  double ratio = 0;
  std::vector<AspectScoreRecord> records;
  std::size_t ties = 0;
  bool degenerate_ties = false;  // at least one argmax came from a tie-break
};

// Evaluates only examples that carry an aspect label; throws FormatError if
// there are none.
HitRatioReport hit_ratio(const LstmClassifier& model, std::span<const EncodedExample> dataset);

// example_id, score_0..score_{m-1}, A_H, A, hit
std::string hit_records_csv(std::span<const AspectScoreRecord> records, int num_aspects);

}  // namespace distilledge

#endif  // DISTILLEDGE_EXPLAIN_HPP_
