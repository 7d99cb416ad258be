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

// Proposal cluster learning: turn the previous stream's proposal scores into
// supervision for the next refined classifier.
//
//   1. find cluster centers per positive class (highest-scoring proposal, or
//      greedy max-degree vertices of a graph over top-ranking proposals),
//   2. assign every proposal to its most overlapping center's cluster or to
//      the background cluster,
//   3. package the clusters as per-proposal labels or as bags.
//
// Class labels are 1-based; background is C+1. Score matrices are class-major
// and may carry an extra background row, which is ignored here.

#ifndef PCL_CLUSTERING_HPP
#define PCL_CLUSTERING_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcl/error.hpp"
#include "pcl/geometry.hpp"
#include "pcl/model.hpp"

namespace pcl {

enum class CenterMethod { kHighest, kGraph };

struct ClusteringConfig {
  CenterMethod method = CenterMethod::kGraph;
  double graph_iou = 0.4;     // edge when IoU > graph_iou
  double cluster_iou = 0.5;   // object-cluster member when IoU > cluster_iou
  int kmeans_clusters = 3;
  int max_centers = 5;        // per class, graph method
};

struct ClusterCenter {
  BBox box;
  int proposal = 0;
  int label = 1;
  double confidence = 1.0;

  friend bool operator==(const ClusterCenter&, const ClusterCenter&) = default;
};

struct ObjectCluster {
  int center = 0;                 // proposal index of the center
  int label = 1;
  double confidence = 1.0;
  std::vector<int> members;       // ascending proposal indices

  friend bool operator==(const ObjectCluster&, const ObjectCluster&) = default;
};

struct BackgroundCluster {
  std::vector<int> members;       // ascending proposal indices
  std::vector<double> confidences;  // parallel to members

  bool empty() const { return members.empty(); }
  friend bool operator==(const BackgroundCluster&, const BackgroundCluster&) = default;
};

struct ProposalClusters {
  int num_proposals = 0;
  std::vector<ObjectCluster> objects;
  BackgroundCluster background;

  friend bool operator==(const ProposalClusters&, const ProposalClusters&) = default;
};

/// Per-proposal one-hot labels (1..C+1) with loss weights.
struct ProposalLabels {
  std::vector<int> labels;
  std::vector<double> weights;
};

/// Each object cluster is a bag; background members are individually negative.
struct ClusterBags {
  int num_proposals = 0;
  std::vector<ObjectCluster> objects;
  BackgroundCluster background;

  std::size_t num_bags() const { return objects.size() + (background.empty() ? 0 : 1); }
};

using Supervision = std::variant<ProposalLabels, ClusterBags>;

// ---------------------------------------------------------------------------
// Top-ranking proposals by 1-D k-means.

/// Lloyd's k-means on scalar scores with quantile initialization.
/// Returns the cluster id (0..n_clusters-1) of each score and the centers.
struct KMeans1D {
  std::vector<int> assignment;
  std::vector<double> centers;
};

inline KMeans1D kmeans_1d(std::span<const double> values, int n_clusters, int max_iter = 100) {
  const std::size_t n = values.size();
  const std::size_t k = static_cast<std::size_t>(n_clusters);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  KMeans1D km;
  km.centers.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    // quantile (2i+1)/(2k), computed in integers so exact positions stay exact
    const auto pos = std::min(n - 1, (2 * i + 1) * n / (2 * k));
    km.centers[i] = sorted[pos];
  }

  km.assignment.assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t r = 0; r < n; ++r) {
      int best = 0;
      double best_d = std::abs(values[r] - km.centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = std::abs(values[r] - km.centers[c]);
        // ties go to the cluster with the lower center value
        if (d < best_d || (d == best_d && km.centers[c] < km.centers[static_cast<std::size_t>(best)])) {
          best = static_cast<int>(c);
          best_d = d;
        }
      }
      if (km.assignment[r] != best) {
        km.assignment[r] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      sum[static_cast<std::size_t>(km.assignment[r])] += values[r];
      ++count[static_cast<std::size_t>(km.assignment[r])];
    }
    // an emptied cluster keeps its previous center
    for (std::size_t c = 0; c < k; ++c)
      if (count[c] > 0) km.centers[c] = sum[c] / static_cast<double>(count[c]);
  }
  return km;
}

/// Indices of the proposals in the k-means group with the highest center.
/// Falls back to the argmax alone when there are fewer scores than groups.
inline std::vector<int> select_top_ranking(std::span<const double> scores, int n_clusters) {
  if (scores.empty()) throw ConfigError("select_top_ranking needs at least one score");
  if (n_clusters < 1) throw ConfigError("kmeans_clusters must be >= 1");
  if (scores.size() < static_cast<std::size_t>(n_clusters)) {
    const auto it = std::max_element(scores.begin(), scores.end());
    return {static_cast<int>(it - scores.begin())};
  }
  const KMeans1D km = kmeans_1d(scores, n_clusters);
  int top = -1;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    const int c = km.assignment[r];
    if (top < 0 || km.centers[static_cast<std::size_t>(c)] > km.centers[static_cast<std::size_t>(top)] ||
        (km.centers[static_cast<std::size_t>(c)] == km.centers[static_cast<std::size_t>(top)] && c < top))
      top = c;
  }
  std::vector<int> out;
  for (std::size_t r = 0; r < scores.size(); ++r)
    if (km.assignment[r] == top) out.push_back(static_cast<int>(r));
  return out;
}

// ---------------------------------------------------------------------------
// Proposal graph.

struct ProposalGraph {
  std::vector<int> vertices;               // proposal indices
  std::vector<std::vector<char>> adjacent;  // local vertex positions

  std::size_t size() const { return vertices.size(); }
  bool edge(std::size_t a, std::size_t b) const { return adjacent[a][b] != 0; }
};

inline ProposalGraph build_graph(std::span<const BBox> boxes, std::span<const int> indices,
                                 double iou_threshold) {
  ProposalGraph g;
  g.vertices.assign(indices.begin(), indices.end());
  const std::size_t n = g.vertices.size();
  g.adjacent.assign(n, std::vector<char>(n, 0));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto ia = static_cast<std::size_t>(g.vertices[a]);
      const auto ib = static_cast<std::size_t>(g.vertices[b]);
      if (ia >= boxes.size() || ib >= boxes.size()) throw ConfigError("graph vertex out of range");
      if (ia == ib) throw ConfigError("graph vertices must be distinct");
      const char e = iou(boxes[ia], boxes[ib]) > iou_threshold ? 1 : 0;
      g.adjacent[a][b] = e;
      g.adjacent[b][a] = e;
    }
  }
  return g;
}

/// Greedy max-degree center selection on one class graph. `score(r)` gives
/// the class score of proposal r. Degree counts only vertices still present;
/// ties prefer the higher score, then the lower proposal index. A center's
/// confidence is the max score over itself and all its graph neighbours.
template <class ScoreFn>
std::vector<ClusterCenter> greedy_graph_centers(const ProposalGraph& g, std::span<const BBox> boxes,
                                                int label, ScoreFn&& score) {
  const std::size_t n = g.size();
  std::vector<char> alive(n, 1);
  std::size_t remaining = n;
  std::vector<ClusterCenter> centers;
  while (remaining > 0) {
    std::size_t best = n;
    int best_deg = -1;
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive[v]) continue;
      int deg = 0;
      for (std::size_t u = 0; u < n; ++u)
        if (alive[u] && g.edge(u, v)) ++deg;
      if (best == n || deg > best_deg) {
        best = v;
        best_deg = deg;
        continue;
      }
      if (deg < best_deg) continue;
      const double sv = score(g.vertices[v]);
      const double sb = score(g.vertices[best]);
      if (sv > sb || (sv == sb && g.vertices[v] < g.vertices[best])) best = v;
    }
    double conf = score(g.vertices[best]);
    for (std::size_t u = 0; u < n; ++u)
      if (g.edge(u, best)) conf = std::max(conf, score(g.vertices[u]));
    centers.push_back({boxes[static_cast<std::size_t>(g.vertices[best])], g.vertices[best], label, conf});
    for (std::size_t u = 0; u < n; ++u) {
      if (alive[u] && (u == best || g.edge(u, best))) {
        alive[u] = 0;
        --remaining;
      }
    }
  }
  return centers;
}

namespace detail {

inline void check_center_inputs(const Matrix& scores, std::span<const int> image_labels,
                                std::span<const BBox> boxes) {
  const auto C = static_cast<Eigen::Index>(image_labels.size());
  if (scores.rows() < C) throw ConfigError("score matrix has fewer rows than classes");
  if (scores.cols() != static_cast<Eigen::Index>(boxes.size()))
    throw ConfigError("score matrix columns do not match proposal count");
  if (boxes.empty()) throw DataError("image has no proposals");
  if (std::none_of(image_labels.begin(), image_labels.end(), [](int y) { return y == 1; }))
    throw DataError("image has no positive class label");
}

}  // namespace detail

/// One center per positive class: its highest-scoring proposal. A proposal
/// wanted by several classes goes to the class scoring it highest; the others
/// fall back to their best unclaimed proposal.
inline std::vector<ClusterCenter> find_centers_highest(const Matrix& scores,
                                                       std::span<const int> image_labels,
                                                       std::span<const BBox> boxes) {
  detail::check_center_inputs(scores, image_labels, boxes);
  struct Candidate {
    double score;
    int cls;
    int proposal;
  };
  std::vector<Candidate> cands;
  for (std::size_t c = 0; c < image_labels.size(); ++c) {
    if (image_labels[c] != 1) continue;
    for (Eigen::Index r = 0; r < scores.cols(); ++r)
      cands.push_back({scores(static_cast<Eigen::Index>(c), r), static_cast<int>(c), static_cast<int>(r)});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.cls != b.cls) return a.cls < b.cls;
    return a.proposal < b.proposal;
  });

  std::vector<char> class_done(image_labels.size(), 0);
  std::vector<char> claimed(boxes.size(), 0);
  std::vector<ClusterCenter> centers;
  for (const Candidate& cand : cands) {
    const auto c = static_cast<std::size_t>(cand.cls);
    const auto r = static_cast<std::size_t>(cand.proposal);
    if (class_done[c] || claimed[r]) continue;
    class_done[c] = 1;
    claimed[r] = 1;
    centers.push_back({boxes[r], cand.proposal, cand.cls + 1, cand.score});
  }
  std::sort(centers.begin(), centers.end(),
            [](const ClusterCenter& a, const ClusterCenter& b) { return a.label < b.label; });
  return centers;
}

/// Graph-based centers over top-ranking proposals, deduplicated across
/// classes and capped at `max_centers` most confident centers per class.
inline std::vector<ClusterCenter> find_centers_graph(const Matrix& scores,
                                                     std::span<const int> image_labels,
                                                     std::span<const BBox> boxes,
                                                     const ClusteringConfig& cfg) {
  detail::check_center_inputs(scores, image_labels, boxes);
  if (cfg.max_centers < 1) throw ConfigError("max_centers must be >= 1");
  const std::size_t C = image_labels.size();
  const std::size_t R = boxes.size();
  std::vector<std::set<int>> excluded(C);
  std::vector<std::vector<ClusterCenter>> per_class(C);

  auto run_class = [&](std::size_t c) {
    std::vector<int> candidates;
    std::vector<double> cand_scores;
    for (std::size_t r = 0; r < R; ++r) {
      if (excluded[c].count(static_cast<int>(r))) continue;
      candidates.push_back(static_cast<int>(r));
      cand_scores.push_back(scores(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)));
    }
    if (candidates.empty()) return std::vector<ClusterCenter>{};
    std::vector<int> top;
    for (int local : select_top_ranking(cand_scores, cfg.kmeans_clusters))
      top.push_back(candidates[static_cast<std::size_t>(local)]);
    const ProposalGraph g = build_graph(boxes, top, cfg.graph_iou);
    return greedy_graph_centers(g, boxes, static_cast<int>(c) + 1, [&](int r) {
      return scores(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r));
    });
  };

  std::vector<char> dirty(C, 0);
  for (std::size_t c = 0; c < C; ++c) dirty[c] = image_labels[c] == 1;
  for (;;) {
    for (std::size_t c = 0; c < C; ++c)
      if (dirty[c]) per_class[c] = run_class(c);
    std::fill(dirty.begin(), dirty.end(), 0);

    std::map<int, std::vector<std::size_t>> owners;
    for (std::size_t c = 0; c < C; ++c)
      for (const auto& s : per_class[c]) owners[s.proposal].push_back(c);
    bool conflict = false;
    for (const auto& [r, classes] : owners) {
      if (classes.size() < 2) continue;
      conflict = true;
      std::size_t winner = classes.front();
      for (std::size_t c : classes)
        if (scores(static_cast<Eigen::Index>(c), r) > scores(static_cast<Eigen::Index>(winner), r)) winner = c;
      for (std::size_t c : classes) {
        if (c == winner) continue;
        excluded[c].insert(r);
        dirty[c] = 1;
      }
    }
    if (!conflict) break;
  }

  std::vector<ClusterCenter> centers;
  for (std::size_t c = 0; c < C; ++c) {
    auto& list = per_class[c];
    std::stable_sort(list.begin(), list.end(), [](const ClusterCenter& a, const ClusterCenter& b) {
      return a.confidence > b.confidence;
    });
    if (list.size() > static_cast<std::size_t>(cfg.max_centers))
      list.resize(static_cast<std::size_t>(cfg.max_centers));
    centers.insert(centers.end(), list.begin(), list.end());
  }
  return centers;
}

inline std::vector<ClusterCenter> find_centers(const Matrix& scores, std::span<const int> image_labels,
                                               std::span<const BBox> boxes, const ClusteringConfig& cfg) {
  return cfg.method == CenterMethod::kHighest ? find_centers_highest(scores, image_labels, boxes)
                                              : find_centers_graph(scores, image_labels, boxes, cfg);
}

// ---------------------------------------------------------------------------
// Cluster generation.

/// Each proposal joins the cluster of its most overlapping center (lowest
/// center index on ties) when that IoU exceeds `cluster_iou`; otherwise it is
/// background, weighted by that center's confidence.
inline ProposalClusters generate_clusters(std::span<const BBox> boxes,
                                          std::span<const ClusterCenter> centers, double cluster_iou) {
  if (centers.empty()) throw ConfigError("generate_clusters needs at least one center");
  ProposalClusters out;
  out.num_proposals = static_cast<int>(boxes.size());
  for (const auto& s : centers) out.objects.push_back({s.proposal, s.label, s.confidence, {}});
  for (std::size_t r = 0; r < boxes.size(); ++r) {
    std::size_t nearest = 0;
    double best = -1.0;
    for (std::size_t n = 0; n < centers.size(); ++n) {
      const double v = iou(boxes[r], centers[n].box);
      if (v > best) {
        best = v;
        nearest = n;
      }
    }
    if (best > cluster_iou) {
      out.objects[nearest].members.push_back(static_cast<int>(r));
    } else {
      out.background.members.push_back(static_cast<int>(r));
      out.background.confidences.push_back(centers[nearest].confidence);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Supervision packaging.

/// `num_classes` is C; background proposals get label C+1.
inline ProposalLabels supervision_labels(const ProposalClusters& clusters, int num_classes) {
  ProposalLabels sup;
  const auto R = static_cast<std::size_t>(clusters.num_proposals);
  sup.labels.assign(R, 0);
  sup.weights.assign(R, 0.0);
  for (const auto& obj : clusters.objects) {
    for (int r : obj.members) {
      sup.labels[static_cast<std::size_t>(r)] = obj.label;
      sup.weights[static_cast<std::size_t>(r)] = obj.confidence;
    }
  }
  for (std::size_t m = 0; m < clusters.background.members.size(); ++m) {
    const auto r = static_cast<std::size_t>(clusters.background.members[m]);
    sup.labels[r] = num_classes + 1;
    sup.weights[r] = clusters.background.confidences[m];
  }
  return sup;
}

inline ClusterBags supervision_bags(const ProposalClusters& clusters) {
  ClusterBags bags;
  bags.num_proposals = clusters.num_proposals;
  for (const auto& obj : clusters.objects)
    if (!obj.members.empty()) bags.objects.push_back(obj);
  bags.background = clusters.background;
  return bags;
}

/// True when every index 0..R-1 appears in exactly one cluster.
inline bool is_partition(const ProposalClusters& clusters) {
  std::vector<int> seen(static_cast<std::size_t>(clusters.num_proposals), 0);
  auto mark = [&](int r) {
    if (r < 0 || r >= clusters.num_proposals) return false;
    return ++seen[static_cast<std::size_t>(r)] == 1;
  };
  for (const auto& obj : clusters.objects)
    for (int r : obj.members)
      if (!mark(r)) return false;
  for (int r : clusters.background.members)
    if (!mark(r)) return false;
  return std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; });
}

// ---------------------------------------------------------------------------
// Debug dump.

inline nlohmann::json clusters_to_json(const std::string& image_id, int stream,
                                       std::span<const ClusterCenter> centers,
                                       const ProposalClusters& clusters) {
  using nlohmann::json;
  json jc = json::array();
  for (const auto& s : centers)
    jc.push_back({{"proposal", s.proposal},
                  {"box", {s.box.x1, s.box.y1, s.box.x2, s.box.y2}},
                  {"label", s.label},
                  {"confidence", s.confidence}});
  json jo = json::array();
  for (const auto& o : clusters.objects)
    jo.push_back({{"center", o.center}, {"label", o.label}, {"confidence", o.confidence}, {"members", o.members}});
  return {{"image_id", image_id},
          {"stream", stream},
          {"num_proposals", clusters.num_proposals},
          {"centers", jc},
          {"clusters", jo},
          {"background", {{"members", clusters.background.members},
                          {"confidences", clusters.background.confidences}}}};
}

inline ProposalClusters clusters_from_json(const nlohmann::json& j) {
  ProposalClusters pc;
  pc.num_proposals = j.at("num_proposals").get<int>();
  for (const auto& o : j.at("clusters"))
    pc.objects.push_back({o.at("center").get<int>(), o.at("label").get<int>(),
                          o.at("confidence").get<double>(), o.at("members").get<std::vector<int>>()});
  pc.background.members = j.at("background").at("members").get<std::vector<int>>();
  pc.background.confidences = j.at("background").at("confidences").get<std::vector<double>>();
  return pc;
}

}  // namespace pcl

#endif  // PCL_CLUSTERING_HPP
