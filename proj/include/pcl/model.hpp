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

// Scoring model: a shared linear+ReLU embedding of raw proposal features,
// the two-branch weighted-sum-pooling MIL head, and K refined instance
// classifiers. Forward passes only; gradients are in losses.hpp.
//
// Score matrices are stored class-major: rows are classes, columns are
// proposals (C x R for the basic stream, (C+1) x R for refined streams,
// the last row being background).

#ifndef PCL_MODEL_HPP
#define PCL_MODEL_HPP

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcl/error.hpp"

namespace pcl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense affine map y = x * weight + bias, weight is in x out.
struct Linear {
  Matrix weight;
  Vector bias;

  static Linear zeros(Eigen::Index in, Eigen::Index out) {
    return {Matrix::Zero(in, out), Vector::Zero(out)};
  }
  Eigen::Index in() const { return weight.rows(); }
  Eigen::Index out() const { return weight.cols(); }

  /// Rows of `x` are samples.
  Matrix apply(const Matrix& x) const {
    Matrix y = x * weight;
    y.rowwise() += bias.transpose();
    return y;
  }

  bool same_shape(const Linear& o) const {
    return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
           bias.size() == o.bias.size();
  }
};

struct ModelShape {
  int raw_dim = 16;
  int embed_dim = 16;
  int num_classes = 4;
  int num_refinements = 3;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Everything the optimizer updates. Gradients use the same type.
struct ModelParams {
  Linear embed;                 // raw_dim x embed_dim
  Linear cls;                   // embed_dim x C
  Linear det;                   // embed_dim x C
  std::vector<Linear> refine;   // K heads, embed_dim x (C+1)

  static ModelParams zeros(const ModelShape& s) {
    if (s.raw_dim < 1 || s.embed_dim < 1 || s.num_classes < 1 || s.num_refinements < 0)
      throw ConfigError("model shape requires raw_dim, embed_dim, classes >= 1 and K >= 0");
    ModelParams p;
    p.embed = Linear::zeros(s.raw_dim, s.embed_dim);
    p.cls = Linear::zeros(s.embed_dim, s.num_classes);
    p.det = Linear::zeros(s.embed_dim, s.num_classes);
    p.refine.assign(static_cast<std::size_t>(s.num_refinements),
                    Linear::zeros(s.embed_dim, s.num_classes + 1));
    return p;
  }

  /// Gaussian weights, zero biases.
  template <class Rng>
  static ModelParams random(const ModelShape& s, Rng& rng, double embed_std, double head_std) {
    ModelParams p = zeros(s);
    std::normal_distribution<double> embed_dist(0.0, embed_std);
    std::normal_distribution<double> head_dist(0.0, head_std);
    auto fill = [&](Matrix& m, auto& dist) {
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    };
    fill(p.embed.weight, embed_dist);
    fill(p.cls.weight, head_dist);
    fill(p.det.weight, head_dist);
    for (auto& h : p.refine) fill(h.weight, head_dist);
    return p;
  }

  ModelShape shape() const {
    return {static_cast<int>(embed.in()), static_cast<int>(embed.out()),
            static_cast<int>(cls.out()), static_cast<int>(refine.size())};
  }
  int num_classes() const { return static_cast<int>(cls.out()); }
  int num_refinements() const { return static_cast<int>(refine.size()); }

  /// Visits every layer in a fixed order with a stable name.
  template <class Fn>
  void for_each_layer(Fn&& fn) {
    fn(std::string("embed"), embed);
    fn(std::string("cls"), cls);
    fn(std::string("det"), det);
    for (std::size_t k = 0; k < refine.size(); ++k) fn("refine" + std::to_string(k + 1), refine[k]);
  }
  template <class Fn>
  void for_each_layer(Fn&& fn) const {
    const_cast<ModelParams*>(this)->for_each_layer(
        [&](const std::string& name, Linear& l) { fn(name, static_cast<const Linear&>(l)); });
  }

  bool all_finite() const {
    bool ok = true;
    for_each_layer([&](const std::string&, const Linear& l) {
      ok = ok && l.weight.allFinite() && l.bias.allFinite();
    });
    return ok;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!(a.shape() == b.shape())) return false;
    auto eq = [](const Linear& x, const Linear& y) {
      return x.weight == y.weight && x.bias == y.bias;
    };
    if (!eq(a.embed, b.embed) || !eq(a.cls, b.cls) || !eq(a.det, b.det)) return false;
    for (std::size_t k = 0; k < a.refine.size(); ++k)
      if (!eq(a.refine[k], b.refine[k])) return false;
    return true;
  }
};

using Gradients = ModelParams;

// ---------------------------------------------------------------------------
// Softmax helpers. Max-subtracted, so finite for logits far beyond +-1e4.

/// Softmax down each column.
inline Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - m).exp();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

/// Softmax along each row.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward passes.

/// Shared proposal features F = max(0, raw * W_emb + b), R x embed_dim.
inline Matrix embed(const Matrix& raw, const ModelParams& params) {
  if (raw.cols() != params.embed.in())
    throw ConfigError("raw feature width " + std::to_string(raw.cols()) +
                      " does not match model raw_dim " + std::to_string(params.embed.in()));
  if (raw.rows() < 1) throw ConfigError("need at least one proposal");
  return params.embed.apply(raw).cwiseMax(0.0);
}

/// Intermediates of the basic MIL head, kept for backprop.
struct BasicForward {
  Matrix cls_prob;   // softmax over classes, C x R
  Matrix det_prob;   // softmax over proposals, C x R
  Matrix scores;     // elementwise product, C x R
  Vector image;      // per-class sum over proposals, length C
};

inline BasicForward forward_basic(const Matrix& features, const ModelParams& params) {
  BasicForward out;
  out.cls_prob = softmax_columns(params.cls.apply(features).transpose());
  out.det_prob = softmax_rows(params.det.apply(features).transpose());
  out.scores = out.cls_prob.cwiseProduct(out.det_prob);
  out.image = out.scores.rowwise().sum();
  return out;
}

/// Raw (C+1) x R logits of refined head k (1-based).
inline Matrix refined_logits(const Matrix& features, const ModelParams& params, int k) {
  if (k < 1 || k > params.num_refinements())
    throw ConfigError("refined stream " + std::to_string(k) + " out of range 1.." +
                      std::to_string(params.num_refinements()));
  return params.refine[static_cast<std::size_t>(k - 1)].apply(features).transpose();
}

/// (C+1) x R, each column a distribution over C object classes + background.
inline Matrix forward_refined(const Matrix& features, const ModelParams& params, int k) {
  return softmax_columns(refined_logits(features, params, k));
}

// ---------------------------------------------------------------------------
// Checkpoint I/O. JSON with shape headers; doubles are written in shortest
// round-trip form so save/load is bit-exact.

inline nlohmann::json to_json(const ModelParams& p) {
  using nlohmann::json;
  const ModelShape s = p.shape();
  json j;
  j["format"] = "pcl-checkpoint";
  j["version"] = 1;
  j["shape"] = {{"raw_dim", s.raw_dim},
                {"embed_dim", s.embed_dim},
                {"num_classes", s.num_classes},
                {"num_refinements", s.num_refinements}};
  json layers = json::array();
  p.for_each_layer([&](const std::string& name, const Linear& l) {
    std::vector<double> w(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        w[static_cast<std::size_t>(i * l.weight.cols() + c)] = l.weight(i, c);
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"name", name},
                      {"rows", l.weight.rows()},
                      {"cols", l.weight.cols()},
                      {"weight", w},
                      {"bias", b}});
  });
  j["layers"] = std::move(layers);
  return j;
}

inline ModelParams params_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "pcl-checkpoint")
      throw ParseError("not a pcl checkpoint", 0);
    if (j.at("version").get<int>() != 1)
      throw ParseError("unsupported checkpoint version " + j.at("version").dump(), 0);
    const auto& js = j.at("shape");
    ModelShape s{js.at("raw_dim").get<int>(), js.at("embed_dim").get<int>(),
                 js.at("num_classes").get<int>(), js.at("num_refinements").get<int>()};
    ModelParams p = ModelParams::zeros(s);
    const auto& layers = j.at("layers");
    std::size_t idx = 0;
    p.for_each_layer([&](const std::string& name, Linear& l) {
      if (idx >= layers.size()) throw ParseError("checkpoint is missing layer " + name, 0);
      const auto& jl = layers[idx++];
      if (jl.at("name").get<std::string>() != name)
        throw ParseError("expected layer " + name + ", found " + jl.at("name").dump(), 0);
      const auto w = jl.at("weight").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (jl.at("rows").get<Eigen::Index>() != l.weight.rows() ||
          jl.at("cols").get<Eigen::Index>() != l.weight.cols() ||
          static_cast<Eigen::Index>(w.size()) != l.weight.size() ||
          static_cast<Eigen::Index>(b.size()) != l.bias.size())
        throw ParseError("shape mismatch in layer " + name, 0);
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
          l.weight(i, c) = w[static_cast<std::size_t>(i * l.weight.cols() + c)];
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = b[static_cast<std::size_t>(i)];
    });
    if (idx != layers.size()) throw ParseError("checkpoint has extra layers", 0);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what(), 0);
  }
}

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << to_json(p).dump() << '\n';
  if (!out) throw ConfigError("failed writing " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what(), 0);
  }
  return params_from_json(j);
}

}  // namespace pcl

#endif  // PCL_MODEL_HPP
