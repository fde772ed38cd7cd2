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

#include "distilledge/losses.hpp"

namespace distilledge {

void LossWeights::validate() const {
  auto non_negative = [](double v, const char* key) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(key) + " must be a finite value >= 0");
    }
  };
  non_negative(lambda_task, "loss.lambda1");
  non_negative(lambda_map, "loss.lambda2");
  non_negative(lambda_ae, "loss.lambda3");
  non_negative(lambda_int, "loss.lambda4");
  non_negative(gce_alpha, "loss.alpha");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("loss.T must be > 0");
  }
}

LossBreakdown composite_loss(LossBreakdown parts, const LossWeights& weights) {
  weights.validate();
  parts.total = weights.lambda_task * parts.task +
                weights.lambda_map *
                    (parts.embed_map + parts.latent_map + parts.distill) +
                weights.lambda_ae * parts.autoencoder +
                weights.lambda_int * parts.interpretable;
  return parts;
}

}  // namespace distilledge
