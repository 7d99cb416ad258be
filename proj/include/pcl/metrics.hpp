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

// Test-time scoring and PASCAL-style evaluation.
//
// Detection scores are the mean of the refined streams' object-class rows;
// with no refined streams the basic stream's scores are used and the result
// is flagged. AP uses greedy IoU > 0.5 matching and all-points interpolation.

#ifndef PCL_METRICS_HPP
#define PCL_METRICS_HPP

#include <algorithm>
#include <cstddef>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcl/error.hpp"
#include "pcl/geometry.hpp"
#include "pcl/groundtruth.hpp"
#include "pcl/image.hpp"
#include "pcl/model.hpp"

namespace pcl {

inline constexpr double kMatchIou = 0.5;

/// C x R detection scores for one image.
struct ProposalScores {
  Matrix scores;
  bool basic_fallback = false;
};

inline ProposalScores score_proposals(const Matrix& raw, const ModelParams& params) {
  const Matrix features = embed(raw, params);
  const int K = params.num_refinements();
  const Eigen::Index C = params.num_classes();
  ProposalScores out;
  if (K == 0) {
    out.scores = forward_basic(features, params).scores;
    out.basic_fallback = true;
    return out;
  }
  out.scores = Matrix::Zero(C, features.rows());
  for (int k = 1; k <= K; ++k) out.scores += forward_refined(features, params, k).topRows(C);
  out.scores /= static_cast<double>(K);
  return out;
}

struct DetectResult {
  std::vector<Detection> detections;  // grouped by class, each sorted by score
  bool basic_fallback = false;
};

inline DetectResult detections_from_scores(const ProposalScores& ps, std::span<const BBox> boxes,
                                           double nms_threshold) {
  DetectResult out;
  out.basic_fallback = ps.basic_fallback;
  std::vector<Detection> per_class;
  for (Eigen::Index c = 0; c < ps.scores.rows(); ++c) {
    per_class.clear();
    for (Eigen::Index r = 0; r < ps.scores.cols(); ++r)
      per_class.push_back({boxes[static_cast<std::size_t>(r)], static_cast<int>(c) + 1, ps.scores(c, r)});
    auto kept = nms(per_class, nms_threshold);
    out.detections.insert(out.detections.end(), kept.begin(), kept.end());
  }
  return out;
}

/// Per-class NMS'd detections for every proposal of `img`.
inline DetectResult detect(const TrainImage& img, const ModelParams& params, double nms_threshold = 0.3) {
  return detections_from_scores(score_proposals(img.features, params), img.proposals, nms_threshold);
}

// ---------------------------------------------------------------------------

struct ImageDetection {
  std::size_t image = 0;
  Detection det;
};

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// Precision/recall after each detection of `class_id`, ranked by score.
/// Each detection claims the highest-IoU still-unmatched groundtruth of its
/// class in its image when that IoU exceeds 0.5.
inline std::vector<PRPoint> pr_curve(std::span<const ImageDetection> dets,
                                     std::span<const ImageGroundTruth> gts, int class_id,
                                     std::size_t* num_gt_out = nullptr) {
  std::size_t num_gt = 0;
  std::vector<std::vector<char>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    used[i].assign(gts[i].size(), 0);
    for (const auto& g : gts[i]) num_gt += g.class_id == class_id;
  }
  if (num_gt_out != nullptr) *num_gt_out = num_gt;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (dets[i].det.class_id == class_id) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].det.score > dets[b].det.score; });

  std::vector<PRPoint> curve;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t idx : order) {
    const ImageDetection& d = dets[idx];
    if (d.image >= gts.size()) throw ConfigError("detection refers to unknown image");
    const auto& ig = gts[d.image];
    double best = kMatchIou;
    std::size_t match = ig.size();
    for (std::size_t g = 0; g < ig.size(); ++g) {
      if (ig[g].class_id != class_id || used[d.image][g]) continue;
      const double v = iou(d.det.box, ig[g].box);
      if (v > best) {
        best = v;
        match = g;
      }
    }
    ++seen;
    if (match < ig.size()) {
      used[d.image][match] = 1;
      ++tp;
    }
    curve.push_back({num_gt ? static_cast<double>(tp) / static_cast<double>(num_gt) : 0.0,
                     static_cast<double>(tp) / static_cast<double>(seen)});
  }
  return curve;
}

/// All-points interpolated AP; nullopt when the class has no groundtruth.
inline std::optional<double> average_precision(std::span<const ImageDetection> dets,
                                               std::span<const ImageGroundTruth> gts, int class_id) {
  std::size_t num_gt = 0;
  const auto curve = pr_curve(dets, gts, class_id, &num_gt);
  if (num_gt == 0) return std::nullopt;
  // precision envelope, right to left
  std::vector<double> env(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    env[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    ap += (curve[i].recall - prev_recall) * env[i];
    prev_recall = curve[i].recall;
  }
  return ap;
}

/// Fraction of images containing `class_id` whose top detection of that
/// class overlaps one of its groundtruths at IoU > 0.5. `top[i]` is image
/// i's top detection for the class, if any.
inline std::optional<double> corloc(std::span<const std::optional<Detection>> top,
                                    std::span<const ImageGroundTruth> gts, int class_id) {
  if (top.size() != gts.size()) throw ConfigError("corloc: one top detection slot per image expected");
  std::size_t positives = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    bool positive = false;
    bool hit = false;
    for (const auto& g : gts[i]) {
      if (g.class_id != class_id) continue;
      positive = true;
      if (top[i] && iou(top[i]->box, g.box) > kMatchIou) hit = true;
    }
    positives += positive;
    hits += positive && hit;
  }
  if (positives == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(positives);
}

// ---------------------------------------------------------------------------

struct MetricsReport {
  std::vector<std::optional<double>> ap;      // per class, index c-1
  std::vector<std::optional<double>> corloc;  // per class
  std::optional<double> map;
  std::optional<double> mean_corloc;
  std::vector<std::string> warnings;
  bool basic_fallback = false;
};

inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& x : v)
    if (x) {
      sum += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Metrics from a flat detection list. CorLoc uses each image's single
/// highest-scoring detection per class.
inline MetricsReport evaluate_detections(std::span<const ImageDetection> dets,
                                         std::span<const ImageGroundTruth> gts, int num_classes) {
  MetricsReport rep;
  for (int c = 1; c <= num_classes; ++c) {
    rep.ap.push_back(average_precision(dets, gts, c));
    if (!rep.ap.back()) rep.warnings.push_back("class " + std::to_string(c) + " has no groundtruth; AP excluded");

    std::vector<std::optional<Detection>> top(gts.size());
    for (const auto& d : dets) {
      if (d.det.class_id != c || d.image >= gts.size()) continue;
      auto& slot = top[d.image];
      if (!slot || d.det.score > slot->score) slot = d.det;
    }
    rep.corloc.push_back(corloc(top, gts, c));
    if (!rep.corloc.back())
      rep.warnings.push_back("class " + std::to_string(c) + " has no positive image; CorLoc excluded");
  }
  rep.map = mean_defined(rep.ap);
  rep.mean_corloc = mean_defined(rep.corloc);
  return rep;
}

struct EvalOutput {
  MetricsReport report;
  std::vector<ImageDetection> detections;
};

/// Runs `detect` on every image and scores the result.
inline EvalOutput evaluate(std::span<const TrainImage> images, std::span<const ImageGroundTruth> gts,
                           const ModelParams& params, double nms_threshold = 0.3) {
  if (images.size() != gts.size()) throw ConfigError("images / groundtruth count mismatch");
  EvalOutput out;
  bool fallback = false;
  for (std::size_t i = 0; i < images.size(); ++i) {
    DetectResult dr = detect(images[i], params, nms_threshold);
    fallback = fallback || dr.basic_fallback;
    for (auto& d : dr.detections) out.detections.push_back({i, d});
  }
  out.report = evaluate_detections(out.detections, gts, params.num_classes());
  out.report.basic_fallback = fallback;
  if (fallback) out.report.warnings.push_back("model has no refined streams; scores come from the basic stream");
  return out;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json classes = json::array();
  for (std::size_t c = 0; c < r.ap.size(); ++c)
    classes.push_back({{"class_id", c + 1}, {"ap", opt(r.ap[c])}, {"corloc", opt(r.corloc[c])}});
  return {{"classes", classes},
          {"map", opt(r.map)},
          {"mean_corloc", opt(r.mean_corloc)},
          {"score_source", r.basic_fallback ? "basic" : "refined_mean"},
          {"warnings", r.warnings}};
}

// ---------------------------------------------------------------------------
// Detections file: one JSON object per line.

inline void write_detections(std::span<const ImageDetection> dets, std::span<const std::string> image_ids,
                             std::ostream& out) {
  for (const auto& d : dets) {
    nlohmann::json j = {{"image_id", image_ids[d.image]},
                        {"class_id", d.det.class_id},
                        {"x1", d.det.box.x1},
                        {"y1", d.det.box.y1},
                        {"x2", d.det.box.x2},
                        {"y2", d.det.box.y2},
                        {"score", d.det.score}};
    out << j.dump() << '\n';
  }
}

/// Image ids are resolved against `image_ids`; unknown ids are an error.
inline std::vector<ImageDetection> read_detections(std::istream& in, std::span<const std::string> image_ids) {
  std::vector<ImageDetection> dets;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("image_id").get<std::string>();
      const auto it = std::find(image_ids.begin(), image_ids.end(), id);
      if (it == image_ids.end()) throw ParseError("unknown image_id '" + id + "'", lineno);
      Detection d{{j.at("x1").get<double>(), j.at("y1").get<double>(), j.at("x2").get<double>(),
                   j.at("y2").get<double>()},
                  j.at("class_id").get<int>(),
                  j.at("score").get<double>()};
      dets.push_back({static_cast<std::size_t>(it - image_ids.begin()), d});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad detection record: ") + e.what(), lineno);
    }
  }
  return dets;
}

}  // namespace pcl

#endif  // PCL_METRICS_HPP
