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

#ifndef DISTILLEDGE_LOSSES_HPP_
#define DISTILLEDGE_LOSSES_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "distilledge/errors.hpp"
#include "distilledge/log.hpp"

namespace distilledge {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Column-wise softmax with max-shift.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = x;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    auto col = out.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
  return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> log_softmax(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = x;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    auto col = out.col(c);
    const Scalar mx = col.maxCoeff();
    const Scalar lse = mx + std::log((col.array() - mx).exp().sum());
    col.array() -= lse;
  }
  return out;
}

template <typename Scalar>
struct LossValue {
  Scalar value = 0;
  MatrixX<Scalar> grad;  // d value / d input, same shape as the input
  bool degenerate = false;
};

template <typename Scalar>
struct PairLossValue {
  Scalar value = 0;
  MatrixX<Scalar> grad_first;
  MatrixX<Scalar> grad_second;
};

namespace detail {

inline void check_labels(Eigen::Index classes, Eigen::Index cols,
                         std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != cols) {
    throw ShapeError("label count does not match batch size");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw ShapeError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
}

template <typename A, typename B>
void check_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

}  // namespace detail

// Mean over the batch (columns) of -log softmax(logits)[label].
template <typename Scalar>
LossValue<Scalar> ce_loss(const MatrixX<Scalar>& logits,
                          std::span<const int> labels) {
  detail::check_labels(logits.rows(), logits.cols(), labels);
  LossValue<Scalar> out;
  const Eigen::Index batch = logits.cols();
  if (batch == 0) {
    out.grad = MatrixX<Scalar>::Zero(logits.rows(), 0);
    return out;
  }
  const MatrixX<Scalar> logp = log_softmax(logits);
  out.grad = logp.array().exp().matrix();
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    out.value -= logp(y, b);
    out.grad(y, b) -= Scalar(1);
  }
  out.value /= Scalar(batch);
  out.grad /= Scalar(batch);
  return out;
}

// Guided complement entropy. Per sample:
//   -p_g^alpha * H(q) / log(K - 1),  q_j = p_j / max(1 - p_g, eps), j != g
// with 0 log 0 := 0. For K == 2 the complement has a single class, the
// normalized entropy is defined as 0 and 'degenerate' is set.
template <typename Scalar>
LossValue<Scalar> gce_loss(const MatrixX<Scalar>& logits,
                           std::span<const int> labels, Scalar alpha,
                           Scalar eps = Scalar(1e-12)) {
  const Eigen::Index k = logits.rows();
  if (k < 2) throw ConfigError("GCE requires at least 2 classes");
  detail::check_labels(k, logits.cols(), labels);
  LossValue<Scalar> out;
  const Eigen::Index batch = logits.cols();
  out.grad = MatrixX<Scalar>::Zero(k, batch);
  if (k == 2) {
    out.degenerate = true;
    warn_once("GCE with K=2: complement has one class, loss defined as 0");
    return out;
  }
  if (batch == 0) return out;
  const Scalar norm = std::log(Scalar(k - 1));
  const MatrixX<Scalar> logp = log_softmax(logits);
  VectorX<Scalar> dp(k);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int g = labels[static_cast<std::size_t>(b)];
    const VectorX<Scalar> p = logp.col(b).array().exp();
    const Scalar pg = p(g);
    const Scalar raw_s = Scalar(1) - pg;
    const bool clamped = !(raw_s > eps);
    const Scalar s = clamped ? eps : raw_s;
    const Scalar log_s = std::log(s);
    Scalar entropy = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == g || p(j) <= Scalar(0)) continue;
      const Scalar q = p(j) / s;
      entropy -= q * (logp(j, b) - log_s);
    }
    const Scalar guide = std::pow(pg, alpha);
    out.value += -guide * entropy / norm;

    // d/dp of the per-sample term, then through the softmax Jacobian.
    dp.setZero();
    const Scalar dguide =
        alpha == Scalar(0) ? Scalar(0) : alpha * std::pow(pg, alpha - Scalar(1));
    const Scalar dentropy_dpg = clamped ? Scalar(0) : (entropy - Scalar(1)) / s;
    dp(g) = -(dguide * entropy + guide * dentropy_dpg) / norm;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == g || p(j) <= Scalar(0)) continue;
      const Scalar log_q = logp(j, b) - log_s;
      dp(j) = -guide * (-(log_q + Scalar(1)) / s) / norm;
    }
    const Scalar inner = p.dot(dp);
    out.grad.col(b) = (p.array() * (dp.array() - inner)).matrix();
  }
  out.value /= Scalar(batch);
  out.grad /= Scalar(batch);
  return out;
}

// KL(softmax(teacher/T) || softmax(student/T)), mean over the batch. The
// teacher side is a constant; grad is w.r.t. the student logits. No T^2
// rescaling is applied.
template <typename Scalar>
LossValue<Scalar> distill_loss(const MatrixX<Scalar>& teacher_logits,
                               const MatrixX<Scalar>& student_logits,
                               Scalar temperature) {
  if (!(temperature > Scalar(0))) throw ConfigError("temperature must be > 0");
  detail::check_same_shape(teacher_logits, student_logits, "distill_loss");
  LossValue<Scalar> out;
  const Eigen::Index batch = student_logits.cols();
  out.grad = MatrixX<Scalar>::Zero(student_logits.rows(), batch);
  if (batch == 0) return out;
  const MatrixX<Scalar> logp_t = log_softmax(teacher_logits / temperature);
  const MatrixX<Scalar> logp_s = log_softmax(student_logits / temperature);
  const MatrixX<Scalar> p_t = logp_t.array().exp();
  const MatrixX<Scalar> p_s = logp_s.array().exp();
  Scalar total = 0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    Scalar kl = 0;
    for (Eigen::Index j = 0; j < student_logits.rows(); ++j) {
      if (p_t(j, b) > Scalar(0)) kl += p_t(j, b) * (logp_t(j, b) - logp_s(j, b));
    }
    total += std::max(kl, Scalar(0));
  }
  out.value = total / Scalar(batch);
  out.grad = (p_s - p_t) / (temperature * Scalar(batch));
  return out;
}

// Mean squared elementwise difference; gradients for both arguments.
template <typename Scalar>
PairLossValue<Scalar> mse_loss(const MatrixX<Scalar>& a,
                               const MatrixX<Scalar>& b) {
  detail::check_same_shape(a, b, "mse_loss");
  PairLossValue<Scalar> out;
  const Eigen::Index n = a.size();
  if (n == 0) {
    out.grad_first = MatrixX<Scalar>::Zero(a.rows(), a.cols());
    out.grad_second = out.grad_first;
    return out;
  }
  const MatrixX<Scalar> diff = a - b;
  out.value = diff.squaredNorm() / Scalar(n);
  out.grad_first = diff * (Scalar(2) / Scalar(n));
  out.grad_second = -out.grad_first;
  return out;
}

// MSE between autoencoder-mapped teacher features and student features.
template <typename Scalar>
PairLossValue<Scalar> feature_map_loss(const MatrixX<Scalar>& mapped_full,
                                       const MatrixX<Scalar>& compressed) {
  return mse_loss(mapped_full, compressed);
}

template <typename Scalar>
struct AutoencoderLossValue {
  Scalar value = 0;
  MatrixX<Scalar> grad_embed_rec;
  MatrixX<Scalar> grad_hidden_rec;
};

// MSE(e_f, e_rec) + MSE(h_f, h_rec); gradients w.r.t. the reconstructions.
template <typename Scalar>
AutoencoderLossValue<Scalar> ae_loss(const MatrixX<Scalar>& embed_full,
                                     const MatrixX<Scalar>& embed_rec,
                                     const MatrixX<Scalar>& hidden_full,
                                     const MatrixX<Scalar>& hidden_rec) {
  auto e = mse_loss(embed_rec, embed_full);
  auto h = mse_loss(hidden_rec, hidden_full);
  return {e.value + h.value, std::move(e.grad_first), std::move(h.grad_first)};
}

// MSE(h_a, h); callers pass nothing for examples without an aspect label.
template <typename Scalar>
PairLossValue<Scalar> interpretable_loss(const MatrixX<Scalar>& aspect_feature,
                                         const MatrixX<Scalar>& hidden) {
  return mse_loss(aspect_feature, hidden);
}

// -log of the sentence-level attention weight on the annotated aspect.
template <typename Scalar>
LossValue<Scalar> aspect_alignment_loss(const VectorX<Scalar>& sentence_weights,
                                        int aspect,
                                        Scalar eps = Scalar(1e-12)) {
  if (aspect < 0 || aspect >= sentence_weights.size()) {
    throw ShapeError("aspect index outside attention range");
  }
  LossValue<Scalar> out;
  out.grad = MatrixX<Scalar>::Zero(sentence_weights.size(), 1);
  const Scalar w = std::max(sentence_weights(aspect), eps);
  out.value = -std::log(w);
  out.grad(aspect, 0) = -Scalar(1) / w;
  return out;
}

struct LossWeights {
  double lambda_task = 0.2;
  double lambda_map = 0.8;  // shared by embedding map, latent map, distill
  double lambda_ae = 0.5;
  double lambda_int = 0.5;
  double temperature = 80.0;
  double gce_alpha = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double task = 0;
  double embed_map = 0;
  double latent_map = 0;
  double distill = 0;
  double autoencoder = 0;
  double interpretable = 0;
  double total = 0;
};

// total = l1*task + l2*(embed_map + latent_map + distill) + l3*ae + l4*int
LossBreakdown composite_loss(LossBreakdown parts, const LossWeights& weights);

}  // namespace distilledge

#endif  // DISTILLEDGE_LOSSES_HPP_
