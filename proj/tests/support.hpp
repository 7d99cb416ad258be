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

// Independent oracles and random-instance builders shared by the unit tests
// and the acceptance binary. Nothing here calls the code it checks except
// where noted.

#ifndef PCL_TESTS_SUPPORT_HPP
#define PCL_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "pcl/clustering.hpp"
#include "pcl/geometry.hpp"
#include "pcl/losses.hpp"
#include "pcl/model.hpp"

namespace pcl::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline BBox random_box(Rng& rng, double canvas = 10.0, double min_side = 0.5) {
  const double w = uniform(rng, min_side, canvas / 2);
  const double h = uniform(rng, min_side, canvas / 2);
  const double x = uniform(rng, 0.0, canvas - w);
  const double y = uniform(rng, 0.0, canvas - h);
  return {x, y, x + w, y + h};
}

/// Boxes that cluster around a few anchors so graphs get edges.
inline std::vector<BBox> clustered_boxes(Rng& rng, int n, int anchors, double canvas = 10.0) {
  std::vector<BBox> a;
  for (int i = 0; i < anchors; ++i) a.push_back(random_box(rng, canvas, 1.5));
  std::vector<BBox> out;
  for (int i = 0; i < n; ++i) {
    const BBox& b = a[static_cast<std::size_t>(uniform_int(rng, 0, anchors - 1))];
    const double s = 0.25 * std::min(b.width(), b.height());
    out.push_back({b.x1 + uniform(rng, -s, s), b.y1 + uniform(rng, -s, s), b.x2 + uniform(rng, -s, s),
                   b.y2 + uniform(rng, -s, s)});
  }
  return out;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

/// Random 0/1 labels with at least one positive.
inline std::vector<int> random_labels(Rng& rng, int C) {
  std::vector<int> y(static_cast<std::size_t>(C));
  do {
    for (int& v : y) v = uniform_int(rng, 0, 1);
  } while (std::count(y.begin(), y.end(), 1) == 0);
  return y;
}

// ---------------------------------------------------------------------------
// Geometry.

/// IoU by counting cells of a grid with spacing `step`, sampled at cell centers.
inline double raster_iou(const BBox& a, const BBox& b, double step = 0.01) {
  const double x0 = std::min(a.x1, b.x1), x1 = std::max(a.x2, b.x2);
  const double y0 = std::min(a.y1, b.y1), y1 = std::max(a.y2, b.y2);
  long in_a = 0, in_b = 0, both = 0;
  for (double x = x0 + step / 2; x < x1; x += step) {
    for (double y = y0 + step / 2; y < y1; y += step) {
      const bool pa = x > a.x1 && x < a.x2 && y > a.y1 && y < a.y2;
      const bool pb = x > b.x1 && x < b.x2 && y > b.y1 && y < b.y2;
      in_a += pa;
      in_b += pb;
      both += pa && pb;
    }
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

/// Plain overlap formula, written out separately from the library.
inline double iou_formula(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  return inter / ((a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter);
}

// ---------------------------------------------------------------------------
// 1-D k-means.

/// Exact k-means on scalars: the optimal clustering of sorted values is a
/// contiguous partition, so try every split. Returns the indices of the
/// group with the highest mean.
inline std::set<int> brute_force_top_group(const std::vector<double>& values, int k) {
  std::vector<int> idx(values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return values[a] < values[b]; });
  const int n = static_cast<int>(values.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_cuts;
  std::vector<int> cuts(static_cast<std::size_t>(k - 1));
  // cuts are strictly increasing positions in 1..n-1
  std::function<void(int, int)> rec = [&](int depth, int from) {
    if (depth == k - 1) {
      double cost = 0.0;
      int lo = 0;
      for (int c = 0; c <= k - 1; ++c) {
        const int hi = c < k - 1 ? cuts[static_cast<std::size_t>(c)] : n;
        double mean = 0.0;
        for (int i = lo; i < hi; ++i) mean += values[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
        mean /= hi - lo;
        for (int i = lo; i < hi; ++i) {
          const double d = values[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] - mean;
          cost += d * d;
        }
        lo = hi;
      }
      if (cost < best - 1e-15) {
        best = cost;
        best_cuts = cuts;
      }
      return;
    }
    for (int p = from; p <= n - (k - 1 - depth); ++p) {
      cuts[static_cast<std::size_t>(depth)] = p;
      rec(depth + 1, p + 1);
    }
  };
  rec(0, 1);
  const int start = best_cuts.empty() ? 0 : best_cuts.back();
  std::set<int> top;
  for (int i = start; i < n; ++i) top.insert(idx[static_cast<std::size_t>(i)]);
  return top;
}

/// Lloyd's iteration on scalars with quantile seeding, kept separate from
/// the library's version: centers start at sorted[floor((2i+1)n/(2k))],
/// points go to the nearest center (lower center on ties), emptied groups keep
/// their center. Returns the members of the non-empty group with the highest
/// center; with fewer values than groups, the argmax alone.
inline std::vector<int> lloyd_top_group(const std::vector<double>& v, int k) {
  const int n = static_cast<int>(v.size());
  if (n < k) return {static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin())};
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> mu;
  for (int i = 0; i < k; ++i) mu.push_back(sorted[static_cast<std::size_t>(std::min(n - 1, (2 * i + 1) * n / (2 * k)))]);
  std::vector<int> group(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<int> next;
    for (double x : v) {
      int g = 0;
      for (int c = 1; c < k; ++c) {
        const double dc = std::abs(x - mu[static_cast<std::size_t>(c)]);
        const double dg = std::abs(x - mu[static_cast<std::size_t>(g)]);
        if (dc < dg || (dc == dg && mu[static_cast<std::size_t>(c)] < mu[static_cast<std::size_t>(g)])) g = c;
      }
      next.push_back(g);
    }
    if (next == group) break;
    group = next;
    for (int c = 0; c < k; ++c) {
      double sum = 0.0;
      int cnt = 0;
      for (int r = 0; r < n; ++r)
        if (group[static_cast<std::size_t>(r)] == c) {
          sum += v[static_cast<std::size_t>(r)];
          ++cnt;
        }
      if (cnt > 0) mu[static_cast<std::size_t>(c)] = sum / cnt;
    }
  }
  int top = -1;
  for (int g : group)
    if (top < 0 || mu[static_cast<std::size_t>(g)] > mu[static_cast<std::size_t>(top)] ||
        (mu[static_cast<std::size_t>(g)] == mu[static_cast<std::size_t>(top)] && g < top))
      top = g;
  std::vector<int> out;
  for (int r = 0; r < n; ++r)
    if (group[static_cast<std::size_t>(r)] == top) out.push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Graph centers.

/// Greedy max-degree selection written against explicit edge sets. At each
/// step every surviving vertex is ranked by (degree desc, score desc,
/// proposal index asc) with a full sort.
inline std::vector<ClusterCenter> greedy_oracle(const std::vector<int>& top, const std::vector<BBox>& boxes,
                                                const std::function<double(int)>& score, int label,
                                                double graph_iou) {
  std::map<int, std::set<int>> nbrs;
  for (int a : top) {
    nbrs[a];
    for (int b : top)
      if (a != b && iou_formula(boxes[static_cast<std::size_t>(a)], boxes[static_cast<std::size_t>(b)]) > graph_iou)
        nbrs[a].insert(b);
  }
  std::set<int> alive(top.begin(), top.end());
  std::vector<ClusterCenter> out;
  while (!alive.empty()) {
    struct Key {
      int deg;
      double s;
      int r;
    };
    std::vector<Key> keys;
    for (int v : alive) {
      int deg = 0;
      for (int u : nbrs[v]) deg += alive.count(u) ? 1 : 0;
      keys.push_back({deg, score(v), v});
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
      if (a.deg != b.deg) return a.deg > b.deg;
      if (a.s != b.s) return a.s > b.s;
      return a.r < b.r;
    });
    const int c = keys.front().r;
    double conf = score(c);
    for (int u : nbrs[c]) conf = std::max(conf, score(u));
    out.push_back({boxes[static_cast<std::size_t>(c)], c, label, conf});
    alive.erase(c);
    for (int u : nbrs[c]) alive.erase(u);
  }
  return out;
}

/// Reference for the whole graph center search, including cross-class
/// deduplication and the per-class cap. Top-ranking selection is delegated
/// to `top_fn` so callers can pick the k-means implementation.
inline std::vector<ClusterCenter> graph_centers_oracle(
    const Matrix& scores, const std::vector<int>& labels, const std::vector<BBox>& boxes,
    const ClusteringConfig& cfg, const std::function<std::vector<int>(const std::vector<double>&)>& top_fn) {
  const int C = static_cast<int>(labels.size());
  const int R = static_cast<int>(boxes.size());
  std::vector<std::set<int>> banned(static_cast<std::size_t>(C));
  std::vector<std::vector<ClusterCenter>> found(static_cast<std::size_t>(C));
  auto solve = [&](int c) {
    std::vector<int> cand;
    std::vector<double> vals;
    for (int r = 0; r < R; ++r)
      if (!banned[static_cast<std::size_t>(c)].count(r)) {
        cand.push_back(r);
        vals.push_back(scores(c, r));
      }
    std::vector<int> top;
    if (!cand.empty())
      for (int local : top_fn(vals)) top.push_back(cand[static_cast<std::size_t>(local)]);
    return greedy_oracle(top, boxes, [&](int r) { return scores(c, r); }, c + 1, cfg.graph_iou);
  };
  for (int c = 0; c < C; ++c)
    if (labels[static_cast<std::size_t>(c)] == 1) found[static_cast<std::size_t>(c)] = solve(c);
  for (bool changed = true; changed;) {
    changed = false;
    for (int r = 0; r < R; ++r) {
      std::vector<int> claim;
      for (int c = 0; c < C; ++c)
        for (const auto& s : found[static_cast<std::size_t>(c)])
          if (s.proposal == r) claim.push_back(c);
      if (claim.size() < 2) continue;
      int win = claim[0];
      for (int c : claim)
        if (scores(c, r) > scores(win, r)) win = c;
      for (int c : claim)
        if (c != win) {
          banned[static_cast<std::size_t>(c)].insert(r);
          found[static_cast<std::size_t>(c)] = solve(c);
          changed = true;
        }
      if (changed) break;
    }
  }
  std::vector<ClusterCenter> out;
  for (auto& list : found) {
    std::stable_sort(list.begin(), list.end(),
                     [](const ClusterCenter& a, const ClusterCenter& b) { return a.confidence > b.confidence; });
    for (std::size_t i = 0; i < list.size() && i < static_cast<std::size_t>(cfg.max_centers); ++i)
      out.push_back(list[i]);
  }
  return out;
}

/// Concatenate every cluster's members, sort, and compare with 0..R-1.
inline bool is_partition_oracle(const ProposalClusters& pc) {
  std::vector<int> all;
  for (const auto& o : pc.objects) all.insert(all.end(), o.members.begin(), o.members.end());
  all.insert(all.end(), pc.background.members.begin(), pc.background.members.end());
  std::sort(all.begin(), all.end());
  if (static_cast<int>(all.size()) != pc.num_proposals) return false;
  for (int r = 0; r < pc.num_proposals; ++r)
    if (all[static_cast<std::size_t>(r)] != r) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Finite differences.

/// |a - b| / max(|a|, |b|, floor). Central differences at h = 1e-5 on O(1)
/// losses carry ~1e-10 of rounding noise, which is all a structurally zero
/// gradient entry shows; the floor keeps that noise at ~1e-5 relative.
inline double rel_err(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central differences of f over every entry of x; returns the max relative
/// error against `analytic`.
template <class F>
double fd_check(Matrix x, const Matrix& analytic, F&& f, double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double keep = x(i, j);
      x(i, j) = keep + h;
      const double up = f(x);
      x(i, j) = keep - h;
      const double down = f(x);
      x(i, j) = keep;
      worst = std::max(worst, rel_err((up - down) / (2 * h), analytic(i, j)));
    }
  }
  return worst;
}

/// Random supervision for one refined stream over `boxes`: assigned labels
/// (weighted or unit) or bags, chosen by `kind` 0/1/2.
inline Supervision random_supervision(Rng& rng, const std::vector<BBox>& boxes, int C, int kind) {
  const int R = static_cast<int>(boxes.size());
  std::vector<ClusterCenter> centers;
  const int n = uniform_int(rng, 1, std::min(3, R));
  std::vector<int> picks(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) picks[static_cast<std::size_t>(r)] = r;
  std::shuffle(picks.begin(), picks.end(), rng);
  for (int i = 0; i < n; ++i) {
    const int r = picks[static_cast<std::size_t>(i)];
    centers.push_back({boxes[static_cast<std::size_t>(r)], r, uniform_int(rng, 1, C), uniform(rng, 0.05, 1.0)});
  }
  const ProposalClusters pc = generate_clusters(boxes, centers, 0.5);
  if (kind == 2) return supervision_bags(pc);
  ProposalLabels pl = supervision_labels(pc, C);
  if (kind == 0) std::fill(pl.weights.begin(), pl.weights.end(), 1.0);
  return pl;
}

/// Flattened view of every parameter, in for_each_layer order.
inline std::vector<double*> param_slots(ModelParams& p) {
  std::vector<double*> out;
  p.for_each_layer([&](const std::string&, Linear& l) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
  });
  return out;
}

/// Max relative error of the whole-model gradient over every parameter.
inline double composite_fd(const Matrix& raw, const std::vector<int>& labels, const std::vector<Supervision>& sups,
                           ModelParams params, double h = 1e-5) {
  const LossReport rep = total_loss(raw, forward_all(raw, params), labels, sups, params);
  Gradients g = rep.grad;
  const auto slots = param_slots(params);
  const auto gslots = param_slots(g);
  double worst = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double keep = *slots[i];
    *slots[i] = keep + h;
    const double up = total_loss(raw, forward_all(raw, params), labels, sups, params).total;
    *slots[i] = keep - h;
    const double down = total_loss(raw, forward_all(raw, params), labels, sups, params).total;
    *slots[i] = keep;
    worst = std::max(worst, rel_err((up - down) / (2 * h), *gslots[i]));
  }
  return worst;
}

}  // namespace pcl::testing

#endif  // PCL_TESTS_SUPPORT_HPP
