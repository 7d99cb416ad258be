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

// Online training: every iteration runs all streams forward, rebuilds the
// supervision of stream k from the current scores of stream k-1, and takes
// one SGD-with-momentum step on the summed loss.

#ifndef PCL_TRAINER_HPP
#define PCL_TRAINER_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcl/clustering.hpp"
#include "pcl/error.hpp"
#include "pcl/image.hpp"
#include "pcl/losses.hpp"
#include "pcl/model.hpp"

namespace pcl {

enum class RefineLoss { kAssigned, kAssignedWeighted, kBag };

inline std::string to_string(RefineLoss l) {
  switch (l) {
    case RefineLoss::kAssigned: return "assigned";
    case RefineLoss::kAssignedWeighted: return "assigned_weighted";
    case RefineLoss::kBag: return "bag";
  }
  return "?";
}

inline RefineLoss parse_refine_loss(const std::string& s) {
  if (s == "assigned") return RefineLoss::kAssigned;
  if (s == "assigned_weighted") return RefineLoss::kAssignedWeighted;
  if (s == "bag") return RefineLoss::kBag;
  throw ConfigError("unknown refine loss '" + s + "' (assigned|assigned_weighted|bag)");
}

inline std::string to_string(CenterMethod m) { return m == CenterMethod::kGraph ? "graph" : "highest"; }

inline CenterMethod parse_center_method(const std::string& s) {
  if (s == "graph") return CenterMethod::kGraph;
  if (s == "highest") return CenterMethod::kHighest;
  throw ConfigError("unknown center method '" + s + "' (highest|graph)");
}

struct LrStage {
  int iterations = 0;
  double lr = 0.0;

  friend bool operator==(const LrStage&, const LrStage&) = default;
};

struct TrainConfig {
  int num_refinements = 3;
  ClusteringConfig clustering;
  RefineLoss refine_loss = RefineLoss::kBag;
  std::vector<LrStage> schedule = {{2000, 1e-2}, {500, 1e-3}};
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 2;
  int embed_dim = 16;
  double embed_init_std = 0.1;
  double head_init_std = 0.01;
  std::uint64_t seed = 0;
  // Supervisions from a frozen snapshot refreshed `alternating_rounds` times
  // over the run, instead of from the live model.
  bool alternating = false;
  int alternating_rounds = 4;

  void validate() const {
    if (num_refinements < 0) throw ConfigError("K must be >= 0");
    auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!in_unit(clustering.graph_iou) || !in_unit(clustering.cluster_iou))
      throw ConfigError("IoU thresholds must lie in (0,1)");
    if (clustering.kmeans_clusters < 1) throw ConfigError("kmeans_clusters must be >= 1");
    if (clustering.max_centers < 1) throw ConfigError("max_centers must be >= 1");
    if (schedule.empty()) throw ConfigError("empty learning-rate schedule");
    for (const auto& s : schedule)
      if (s.iterations < 0 || !(s.lr >= 0.0)) throw ConfigError("schedule entries need iterations >= 0, lr >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (momentum < 0.0 || weight_decay < 0.0) throw ConfigError("momentum and weight decay must be >= 0");
    if (alternating && alternating_rounds < 1) throw ConfigError("alternating_rounds must be >= 1");
  }

  int total_iterations() const {
    int n = 0;
    for (const auto& s : schedule) n += s.iterations;
    return n;
  }

  /// Learning rate for a 0-based iteration; the last stage extends forever.
  double lr_at(int iteration) const {
    int end = 0;
    for (const auto& s : schedule) {
      end += s.iterations;
      if (iteration < end) return s.lr;
    }
    return schedule.back().lr;
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& s : c.schedule) sched.push_back({s.iterations, s.lr});
  return {{"k", c.num_refinements},
          {"center_method", to_string(c.clustering.method)},
          {"refine_loss", to_string(c.refine_loss)},
          {"graph_iou", c.clustering.graph_iou},
          {"cluster_iou", c.clustering.cluster_iou},
          {"kmeans_clusters", c.clustering.kmeans_clusters},
          {"max_centers", c.clustering.max_centers},
          {"schedule", sched},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"embed_dim", c.embed_dim},
          {"embed_init_std", c.embed_init_std},
          {"head_init_std", c.head_init_std},
          {"seed", c.seed},
          {"alternating", c.alternating},
          {"alternating_rounds", c.alternating_rounds}};
}

struct TrainState {
  ModelParams params;
  Gradients velocity;
  std::int64_t iteration = 0;
  std::mt19937_64 rng;
  std::uint64_t supervisions_built = 0;
};

inline TrainState init_state(int raw_dim, int num_classes, const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.rng.seed(cfg.seed);
  const ModelShape shape{raw_dim, cfg.embed_dim, num_classes, cfg.num_refinements};
  st.params = ModelParams::random(shape, st.rng, cfg.embed_init_std, cfg.head_init_std);
  st.velocity = ModelParams::zeros(shape);
  return st;
}

/// Centers and clusters used to supervise one refined stream.
struct StreamSupervision {
  std::vector<ClusterCenter> centers;
  ProposalClusters clusters;
  Supervision supervision;
};

/// Builds stream-k supervision from `prev_scores` (the scores of stream k-1).
inline StreamSupervision make_supervision(const Matrix& prev_scores, const TrainImage& img,
                                          const TrainConfig& cfg) {
  StreamSupervision out;
  out.centers = find_centers(prev_scores, img.labels, img.proposals, cfg.clustering);
  out.clusters = generate_clusters(img.proposals, out.centers, cfg.clustering.cluster_iou);
  switch (cfg.refine_loss) {
    case RefineLoss::kBag:
      out.supervision = supervision_bags(out.clusters);
      break;
    case RefineLoss::kAssignedWeighted:
      out.supervision = supervision_labels(out.clusters, static_cast<int>(img.labels.size()));
      break;
    case RefineLoss::kAssigned: {
      ProposalLabels pl = supervision_labels(out.clusters, static_cast<int>(img.labels.size()));
      std::fill(pl.weights.begin(), pl.weights.end(), 1.0);
      out.supervision = std::move(pl);
      break;
    }
  }
  return out;
}

/// Scores feeding stream k's supervision: stream 0 for k = 1, else k-1.
inline const Matrix& supervising_scores(const ImageForward& fwd, int k) {
  return k == 1 ? fwd.basic.scores : fwd.refined[static_cast<std::size_t>(k - 2)];
}

inline void check_image(const TrainImage& img, int num_classes, int raw_dim) {
  if (img.proposals.empty()) throw DataError("image '" + img.image_id + "' has no proposals");
  if (static_cast<int>(img.labels.size()) != num_classes)
    throw DataError("image '" + img.image_id + "' label vector has wrong length");
  if (!img.has_positive()) throw DataError("image '" + img.image_id + "' has no positive label");
  if (img.features.rows() != img.num_proposals() || img.features.cols() != raw_dim)
    throw DataError("image '" + img.image_id + "' feature matrix shape does not match its proposals");
}

struct IterationReport {
  double lr = 0.0;
  double loss_total = 0.0;
  std::vector<double> loss_per_stream;
  double mean_num_centers = 0.0;  // over images and refined streams
};

/// One SGD step on a batch. `supervisor`, when given, is the frozen model
/// that produces the supervisions (alternating mode); otherwise the live
/// parameters do.
inline IterationReport train_iteration(std::span<const TrainImage* const> batch, TrainState& st,
                                       const TrainConfig& cfg, double lr,
                                       const ModelParams* supervisor = nullptr) {
  if (batch.empty()) throw ConfigError("empty batch");
  const ModelParams& p = st.params;
  const int K = p.num_refinements();
  const int C = p.num_classes();
  const auto raw_dim = static_cast<int>(p.embed.in());

  IterationReport rep;
  rep.lr = lr;
  rep.loss_per_stream.assign(static_cast<std::size_t>(K) + 1, 0.0);
  Gradients grad = ModelParams::zeros(p.shape());
  std::size_t centers = 0;

  for (const TrainImage* img : batch) {
    check_image(*img, C, raw_dim);
    const ImageForward fwd = forward_all(img->features, p);
    std::optional<ImageForward> frozen;
    if (supervisor != nullptr) frozen = forward_all(img->features, *supervisor);
    std::vector<Supervision> sups;
    sups.reserve(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) {
      const Matrix& prev = supervising_scores(frozen ? *frozen : fwd, k);
      StreamSupervision s = make_supervision(prev, *img, cfg);
      ++st.supervisions_built;
      centers += s.centers.size();
      sups.push_back(std::move(s.supervision));
    }
    const LossReport lr_img = total_loss(img->features, fwd, img->labels, sups, p);
    rep.loss_total += lr_img.total;
    for (std::size_t k = 0; k < lr_img.per_stream.size(); ++k) rep.loss_per_stream[k] += lr_img.per_stream[k];
    auto add = [](Linear& dst, const Linear& src) {
      dst.weight += src.weight;
      dst.bias += src.bias;
    };
    add(grad.embed, lr_img.grad.embed);
    add(grad.cls, lr_img.grad.cls);
    add(grad.det, lr_img.grad.det);
    for (std::size_t k = 0; k < grad.refine.size(); ++k) add(grad.refine[k], lr_img.grad.refine[k]);
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  rep.loss_total *= inv_b;
  for (double& v : rep.loss_per_stream) v *= inv_b;
  rep.mean_num_centers = K > 0 ? static_cast<double>(centers) / static_cast<double>(batch.size() * K) : 0.0;

  // v <- momentum * v - lr * (g + wd * w); w <- w + v. No decay on biases.
  auto step = [&](Linear& w, Linear& v, const Linear& g) {
    v.weight = cfg.momentum * v.weight - lr * (inv_b * g.weight + cfg.weight_decay * w.weight);
    v.bias = cfg.momentum * v.bias - lr * (inv_b * g.bias);
    w.weight += v.weight;
    w.bias += v.bias;
  };
  step(st.params.embed, st.velocity.embed, grad.embed);
  step(st.params.cls, st.velocity.cls, grad.cls);
  step(st.params.det, st.velocity.det, grad.det);
  for (std::size_t k = 0; k < grad.refine.size(); ++k)
    step(st.params.refine[k], st.velocity.refine[k], grad.refine[k]);
  ++st.iteration;
  return rep;
}

struct LogRow {
  std::int64_t iteration = 0;
  IterationReport report;
};

struct TrainResult {
  ModelParams params;
  std::vector<LogRow> log;
  std::uint64_t supervisions_built = 0;
};

/// Full run: seeded shuffled epochs, schedule by iteration count.
inline TrainResult train(std::span<const TrainImage> images, const TrainConfig& cfg) {
  cfg.validate();
  if (images.empty()) throw ConfigError("empty training set");
  const int C = static_cast<int>(images.front().labels.size());
  const auto raw_dim = static_cast<int>(images.front().features.cols());
  if (C < 1) throw ConfigError("images carry no classes");
  for (const auto& img : images) check_image(img, C, raw_dim);

  TrainState st = init_state(raw_dim, C, cfg);
  TrainResult res;
  const int total = cfg.total_iterations();
  res.log.reserve(static_cast<std::size_t>(total));

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), st.rng);
  std::size_t cursor = 0;
  std::vector<const TrainImage*> batch;

  const int period = cfg.alternating ? std::max(1, (total + cfg.alternating_rounds - 1) / cfg.alternating_rounds) : 0;
  ModelParams frozen;

  for (int it = 0; it < total; ++it) {
    if (cfg.alternating && it % period == 0) frozen = st.params;
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), st.rng);
        cursor = 0;
      }
      batch.push_back(&images[order[cursor++]]);
    }
    IterationReport r = train_iteration(batch, st, cfg, cfg.lr_at(it), cfg.alternating ? &frozen : nullptr);
    res.log.push_back({it, std::move(r)});
  }
  res.params = std::move(st.params);
  res.supervisions_built = st.supervisions_built;
  return res;
}

/// CSV: iteration, lr, loss_total, loss_stream_0..K, mean_num_centers.
inline void write_training_log(const std::vector<LogRow>& log, int num_refinements, std::ostream& out) {
  out << "iteration,lr,loss_total";
  for (int k = 0; k <= num_refinements; ++k) out << ",loss_stream_" << k;
  out << ",mean_num_centers\n";
  out.precision(17);
  for (const auto& row : log) {
    out << row.iteration << ',' << row.report.lr << ',' << row.report.loss_total;
    for (double v : row.report.loss_per_stream) out << ',' << v;
    out << ',' << row.report.mean_num_centers << '\n';
  }
}

}  // namespace pcl

#endif  // PCL_TRAINER_HPP
