// Copyright 2026 The PCL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Losses and closed-form gradients.
//
// Stream 0 uses multi-label binary cross entropy on the pooled image scores.
// Refined streams use either a (weighted) per-proposal softmax loss or the
// cluster-as-bag loss with average pooling inside each object cluster.
// Supervisions are inputs only; the gradient accumulator has exactly the
// parameter layout and nothing else.

#ifndef PCL_LOSSES_HPP
#define PCL_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <type_traits>
#include <variant>
#include <vector>

#include "pcl/clustering.hpp"
#include "pcl/error.hpp"
#include "pcl/model.hpp"

namespace pcl {

inline constexpr double kLogEps = 1e-9;

// ---------------------------------------------------------------------------
// Stream 0.

struct ImageLoss {
  double value = 0.0;
  Vector grad;  // d loss / d image score
};

/// -sum_c [y_c log p_c + (1 - y_c) log(1 - p_c)], p clamped to [eps, 1 - eps].
inline ImageLoss loss_basic(const Vector& image_scores, std::span<const int> labels) {
  if (static_cast<std::size_t>(image_scores.size()) != labels.size())
    throw ConfigError("image score / label length mismatch");
  ImageLoss out;
  out.grad.resize(image_scores.size());
  for (Eigen::Index c = 0; c < image_scores.size(); ++c) {
    const double p = std::clamp(image_scores(c), kLogEps, 1.0 - kLogEps);
    const double y = labels[static_cast<std::size_t>(c)] == 1 ? 1.0 : 0.0;
    out.value -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    out.grad(c) = -y / p + (1.0 - y) / (1.0 - p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Refined streams. Inputs are (C+1) x R softmax columns; gradients are with
// respect to the pre-softmax logits.

struct StreamLoss {
  double value = 0.0;
  Matrix grad_logits;
};

/// -(1/R) sum_r lambda_r log p_{label_r, r}. Unit weights give the plain
/// softmax loss.
inline StreamLoss loss_assigned(const Matrix& probs, const ProposalLabels& sup) {
  const Eigen::Index R = probs.cols();
  if (static_cast<Eigen::Index>(sup.labels.size()) != R || static_cast<Eigen::Index>(sup.weights.size()) != R)
    throw ConfigError("proposal labels do not cover every proposal");
  StreamLoss out;
  out.grad_logits = Matrix::Zero(probs.rows(), R);
  const double inv_r = 1.0 / static_cast<double>(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    const int label = sup.labels[static_cast<std::size_t>(r)];
    if (label < 1 || label > probs.rows()) throw ConfigError("proposal label out of range");
    const double w = sup.weights[static_cast<std::size_t>(r)];
    const Eigen::Index row = label - 1;
    out.value -= w * std::log(std::max(probs(row, r), kLogEps));
    out.grad_logits.col(r) = (w * inv_r) * probs.col(r);
    out.grad_logits(row, r) -= w * inv_r;
  }
  out.value *= inv_r;
  return out;
}

/// Object clusters contribute -s_n M_n log(mean of their members' class
/// probability); background members contribute -lambda_r log p_bg. All
/// scaled by 1/R.
inline StreamLoss loss_bag(const Matrix& probs, const ClusterBags& bags) {
  const Eigen::Index R = probs.cols();
  const Eigen::Index bg = probs.rows() - 1;
  if (bags.num_proposals != R) throw ConfigError("bag supervision proposal count mismatch");
  StreamLoss out;
  out.grad_logits = Matrix::Zero(probs.rows(), R);
  const double inv_r = 1.0 / static_cast<double>(R);

  for (const auto& bag : bags.objects) {
    if (bag.members.empty()) continue;
    if (bag.label < 1 || bag.label > bg) throw ConfigError("bag label out of range");
    const Eigen::Index row = bag.label - 1;
    const double m = static_cast<double>(bag.members.size());
    double sum = 0.0;
    for (int r : bag.members) sum += probs(row, r);
    const double mean = sum / m;
    out.value -= bag.confidence * m * std::log(std::max(mean, kLogEps));
    // d/dp_{row,r} for every member r, then through the column softmax:
    // dz_{c,r} = dp * p_{row,r} * (delta_{c,row} - p_{c,r})
    const double dp = mean > kLogEps ? -bag.confidence * m / sum * inv_r : 0.0;
    for (int r : bag.members) {
      const double p_row = probs(row, r);
      out.grad_logits.col(r) -= dp * p_row * probs.col(r);
      out.grad_logits(row, r) += dp * p_row;
    }
  }

  const auto& bgc = bags.background;
  for (std::size_t i = 0; i < bgc.members.size(); ++i) {
    const Eigen::Index r = bgc.members[i];
    const double w = bgc.confidences[i];
    out.value -= w * std::log(std::max(probs(bg, r), kLogEps));
    out.grad_logits.col(r) += (w * inv_r) * probs.col(r);
    out.grad_logits(bg, r) -= w * inv_r;
  }
  out.value *= inv_r;
  return out;
}

inline StreamLoss refinement_loss(const Matrix& probs, const Supervision& sup) {
  return std::visit(
      [&](const auto& s) -> StreamLoss {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, ProposalLabels>)
          return loss_assigned(probs, s);
        else
          return loss_bag(probs, s);
      },
      sup);
}

// ---------------------------------------------------------------------------
// Whole-model forward + backward for one image.

/// All stream outputs for one image. Every stream reads the same `features`.
struct ImageForward {
  Matrix features;              // R x D, post-ReLU
  BasicForward basic;
  std::vector<Matrix> refined;  // K entries, (C+1) x R
};

inline ImageForward forward_all(const Matrix& raw, const ModelParams& params) {
  ImageForward f;
  f.features = embed(raw, params);
  f.basic = forward_basic(f.features, params);
  f.refined.reserve(params.refine.size());
  for (int k = 1; k <= params.num_refinements(); ++k) f.refined.push_back(forward_refined(f.features, params, k));
  return f;
}

struct LossReport {
  double total = 0.0;
  std::vector<double> per_stream;  // K+1 entries
  Gradients grad;
};

namespace detail {

// Accumulate a linear layer's gradient given d loss / d output, where the
// output is stored transposed (out x R). Returns the contribution to dF.
inline Matrix backprop_linear(const Matrix& input, const Linear& layer, const Matrix& grad_out_t,
                              Linear& grad) {
  grad.weight.noalias() += input.transpose() * grad_out_t.transpose();
  grad.bias += grad_out_t.rowwise().sum();
  return grad_out_t.transpose() * layer.weight.transpose();
}

}  // namespace detail

/// Gradient of the basic stream loss with respect to the cls and det logits
/// (both C x R), given d loss / d image score.
inline std::pair<Matrix, Matrix> basic_logit_grads(const BasicForward& fwd, const Vector& grad_image) {
  // image_c = sum_r A_cr B_cr; A softmax over classes, B softmax over proposals.
  const Matrix dA = fwd.det_prob.array().colwise() * grad_image.array();
  const Matrix dB = fwd.cls_prob.array().colwise() * grad_image.array();
  const Matrix& A = fwd.cls_prob;
  const Matrix& B = fwd.det_prob;
  const Eigen::RowVectorXd col_dot = (dA.cwiseProduct(A)).colwise().sum();
  const Vector row_dot = (dB.cwiseProduct(B)).rowwise().sum();
  Matrix d_cls = A.cwiseProduct(dA - col_dot.replicate(A.rows(), 1));
  Matrix d_det = B.cwiseProduct(dB - row_dot.replicate(1, B.cols()));
  return {std::move(d_cls), std::move(d_det)};
}

/// Sum of the stream-0 loss and one refinement loss per refined stream, with
/// the gradient of that sum for every parameter. `supervisions[k-1]` feeds
/// stream k; it is treated as a constant.
inline LossReport total_loss(const Matrix& raw, const ImageForward& fwd, std::span<const int> labels,
                             std::span<const Supervision> supervisions, const ModelParams& params) {
  const int K = params.num_refinements();
  if (static_cast<int>(supervisions.size()) != K)
    throw ConfigError("expected " + std::to_string(K) + " supervisions, got " +
                      std::to_string(supervisions.size()));
  if (static_cast<int>(fwd.refined.size()) != K) throw ConfigError("forward pass has wrong stream count");

  LossReport rep;
  rep.grad = ModelParams::zeros(params.shape());
  rep.per_stream.assign(static_cast<std::size_t>(K) + 1, 0.0);
  Matrix d_features = Matrix::Zero(fwd.features.rows(), fwd.features.cols());

  const ImageLoss base = loss_basic(fwd.basic.image, labels);
  rep.per_stream[0] = base.value;
  const auto [d_cls, d_det] = basic_logit_grads(fwd.basic, base.grad);
  d_features += detail::backprop_linear(fwd.features, params.cls, d_cls, rep.grad.cls);
  d_features += detail::backprop_linear(fwd.features, params.det, d_det, rep.grad.det);

  for (int k = 1; k <= K; ++k) {
    const auto ks = static_cast<std::size_t>(k - 1);
    const StreamLoss sl = refinement_loss(fwd.refined[ks], supervisions[ks]);
    rep.per_stream[static_cast<std::size_t>(k)] = sl.value;
    d_features += detail::backprop_linear(fwd.features, params.refine[ks], sl.grad_logits, rep.grad.refine[ks]);
  }

  const Matrix d_pre = (fwd.features.array() > 0.0).select(d_features, 0.0);
  rep.grad.embed.weight.noalias() += raw.transpose() * d_pre;
  rep.grad.embed.bias += d_pre.colwise().sum().transpose();

  for (double v : rep.per_stream) rep.total += v;
  return rep;
}

}  // namespace pcl

#endif  // PCL_LOSSES_HPP
