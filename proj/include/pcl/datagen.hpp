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

// Synthetic weakly-labelled detection data.
//
// Each image plants 1..3 non-overlapping objects. Every object has one
// discriminative part, a sub-box covering part_area of it. Proposals mix
// jittered copies of each object, boxes interpolated between the part and
// the whole object, part boxes, and random background boxes. A proposal's
// raw feature is
//
//   object_signal * sum_c maxIoU_c(b) * proto_c
//   + part_signal * sum_c maxPart_c(b) * part_proto_c + noise,
//
// where maxIoU_c is the best IoU with an object of class c and maxPart_c the
// strongest class-c part evidence: the share of the part the box covers,
// scaled by (part area / box area)^part_dilution for boxes larger than it.
// Object prototypes share a common direction; part prototypes are orthogonal
// to all of them. Part boxes therefore carry the cleanest class signal while
// the whole object carries the most object evidence.

#ifndef PCL_DATAGEN_HPP
#define PCL_DATAGEN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcl/error.hpp"
#include "pcl/geometry.hpp"
#include "pcl/groundtruth.hpp"
#include "pcl/image.hpp"
#include "pcl/model.hpp"

namespace pcl {

inline constexpr int kDatasetSchemaVersion = 1;

struct GenConfig {
  int num_images = 100;
  int num_classes = 4;
  int min_objects = 1;
  int max_objects = 3;
  int num_proposals = 50;
  int raw_dim = 16;
  double noise = 0.1;
  double object_signal = 1.0;
  double part_signal = 1.5;
  double part_dilution = 0.35;     // exponent on part-area / box-area for boxes larger than the part
  double prototype_sharing = 0.8;  // weight of the common direction in object prototypes
  double part_area_min = 0.30;     // discriminative part area / object area
  double part_area_max = 0.40;
  double part_iou_min = 0.10;      // band for part proposals vs their object
  double part_iou_max = 0.45;
  double canvas = 100.0;
  std::uint64_t seed = 0;
  std::uint64_t prototype_seed = 0;  // shared by train/test splits of one benchmark

  void validate() const {
    if (num_classes < 2) throw ConfigError("need at least 2 classes");
    if (num_proposals < 20) throw ConfigError("need at least 20 proposals per image");
    if (num_images < 0) throw ConfigError("num_images must be >= 0");
    if (min_objects < 1 || max_objects < min_objects || max_objects > 3)
      throw ConfigError("objects per image must satisfy 1 <= min <= max <= 3");
    if (raw_dim < 2 * num_classes + 1)
      throw ConfigError("raw_dim must be at least 2*C+1 to hold the prototypes");
    if (noise < 0.0) throw ConfigError("noise must be >= 0");
    if (!(part_iou_min > 0.0 && part_iou_min < part_iou_max && part_iou_max <= 0.5))
      throw ConfigError("part IoU band must satisfy 0 < min < max <= 0.5");
    if (!(part_area_min >= part_iou_min && part_area_max <= part_iou_max && part_area_min <= part_area_max))
      throw ConfigError("part area range must lie inside the part IoU band");
  }
};

inline nlohmann::json to_json(const GenConfig& g) {
  return {{"num_images", g.num_images},   {"num_classes", g.num_classes},
          {"min_objects", g.min_objects}, {"max_objects", g.max_objects},
          {"num_proposals", g.num_proposals}, {"raw_dim", g.raw_dim},
          {"noise", g.noise},             {"object_signal", g.object_signal},
          {"part_signal", g.part_signal}, {"part_dilution", g.part_dilution},
          {"prototype_sharing", g.prototype_sharing},
          {"part_area_min", g.part_area_min}, {"part_area_max", g.part_area_max},
          {"part_iou_min", g.part_iou_min}, {"part_iou_max", g.part_iou_max},
          {"canvas", g.canvas},           {"seed", g.seed},
          {"prototype_seed", g.prototype_seed}};
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig g;
  g.num_images = j.at("num_images").get<int>();
  g.num_classes = j.at("num_classes").get<int>();
  g.min_objects = j.at("min_objects").get<int>();
  g.max_objects = j.at("max_objects").get<int>();
  g.num_proposals = j.at("num_proposals").get<int>();
  g.raw_dim = j.at("raw_dim").get<int>();
  g.noise = j.at("noise").get<double>();
  g.object_signal = j.at("object_signal").get<double>();
  g.part_signal = j.at("part_signal").get<double>();
  g.part_dilution = j.at("part_dilution").get<double>();
  g.prototype_sharing = j.at("prototype_sharing").get<double>();
  g.part_area_min = j.at("part_area_min").get<double>();
  g.part_area_max = j.at("part_area_max").get<double>();
  g.part_iou_min = j.at("part_iou_min").get<double>();
  g.part_iou_max = j.at("part_iou_max").get<double>();
  g.canvas = j.at("canvas").get<double>();
  g.seed = j.at("seed").get<std::uint64_t>();
  g.prototype_seed = j.at("prototype_seed").get<std::uint64_t>();
  return g;
}

enum class ProposalKind { kObject, kGrowth, kPart, kBackground };

inline const char* to_string(ProposalKind k) {
  switch (k) {
    case ProposalKind::kObject: return "object";
    case ProposalKind::kGrowth: return "growth";
    case ProposalKind::kPart: return "part";
    case ProposalKind::kBackground: return "background";
  }
  return "?";
}

inline ProposalKind parse_proposal_kind(const std::string& s) {
  if (s == "object") return ProposalKind::kObject;
  if (s == "growth") return ProposalKind::kGrowth;
  if (s == "part") return ProposalKind::kPart;
  if (s == "background") return ProposalKind::kBackground;
  throw ParseError("unknown proposal kind '" + s + "'", 0);
}

/// Evaluation-side annotations for one image.
struct ImageAnnotation {
  ImageGroundTruth objects;
  std::vector<BBox> parts;           // discriminative part of each object
  std::vector<ProposalKind> kinds;   // per proposal
  std::vector<int> parents;          // per proposal: object index, -1 for background

  friend bool operator==(const ImageAnnotation&, const ImageAnnotation&) = default;
};

struct DatasetManifest {
  int schema_version = kDatasetSchemaVersion;
  std::uint64_t seed = 0;
  int num_classes = 0;
  int raw_dim = 0;
  nlohmann::json generator;  // generation config, null when unknown
  std::vector<TrainImage> images;
  std::vector<ImageAnnotation> annotations;  // parallel to images

  std::vector<ImageGroundTruth> groundtruth() const {
    std::vector<ImageGroundTruth> out;
    out.reserve(annotations.size());
    for (const auto& a : annotations) out.push_back(a.objects);
    return out;
  }
};

/// The part of a manifest training may see.
inline std::vector<TrainImage> training_view(const DatasetManifest& m) { return m.images; }

inline bool operator==(const TrainImage& a, const TrainImage& b) {
  return a.image_id == b.image_id && a.width == b.width && a.height == b.height && a.labels == b.labels &&
         a.proposals == b.proposals && a.features.rows() == b.features.rows() &&
         a.features.cols() == b.features.cols() && a.features == b.features;
}

inline bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
  return a.schema_version == b.schema_version && a.seed == b.seed && a.num_classes == b.num_classes &&
         a.raw_dim == b.raw_dim && a.generator == b.generator && a.images == b.images &&
         a.annotations == b.annotations;
}

// ---------------------------------------------------------------------------
// Generation.

namespace detail {

class BoxSampler {
 public:
  BoxSampler(std::mt19937_64& rng, double canvas) : rng_(rng), canvas_(canvas) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  BBox clip(BBox b) const {
    b.x1 = std::clamp(b.x1, 0.0, canvas_);
    b.y1 = std::clamp(b.y1, 0.0, canvas_);
    b.x2 = std::clamp(b.x2, 0.0, canvas_);
    b.y2 = std::clamp(b.y2, 0.0, canvas_);
    return b;
  }

  BBox random_box(double min_side, double max_side) {
    const double w = uniform(min_side, max_side);
    const double h = uniform(min_side, max_side);
    const double x = uniform(0.0, canvas_ - w);
    const double y = uniform(0.0, canvas_ - h);
    return {x, y, x + w, y + h};
  }

  /// Random edge perturbation proportional to the box size.
  BBox jitter(const BBox& b, double scale) {
    const double w = b.width();
    const double h = b.height();
    return clip({b.x1 + uniform(-scale, scale) * w, b.y1 + uniform(-scale, scale) * h,
                 b.x2 + uniform(-scale, scale) * w, b.y2 + uniform(-scale, scale) * h});
  }

  /// Sub-box of `b` with the given area fraction, random aspect and place.
  BBox sub_box(const BBox& b, double area_fraction) {
    const double aspect = uniform(-0.4, 0.4);
    double fw = std::sqrt(area_fraction) * std::exp(aspect);
    double fh = area_fraction / fw;
    fw = std::min(fw, 1.0);
    fh = std::min(area_fraction / fw, 1.0);
    const double w = fw * b.width();
    const double h = fh * b.height();
    const double x = b.x1 + uniform(0.0, b.width() - w);
    const double y = b.y1 + uniform(0.0, b.height() - h);
    return {x, y, x + w, y + h};
  }

 private:
  std::mt19937_64& rng_;
  double canvas_;
};

inline std::vector<Vector> orthonormal_basis(int dim, int count, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vector> basis;
  while (static_cast<int>(basis.size()) < count) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = n(rng);
    for (const auto& u : basis) v -= v.dot(u) * u;
    const double norm = v.norm();
    if (norm > 1e-6) basis.push_back(v / norm);
  }
  return basis;
}

/// Share of the part covered by the proposal, diluted by how much larger
/// than the part the proposal is.
inline double part_evidence(const BBox& proposal, const BBox& part, double dilution) {
  const double coverage = intersection_area(proposal, part) / part.area();
  const double ratio = std::min(part.area(), proposal.area()) / proposal.area();
  return coverage * std::pow(ratio, dilution);
}

constexpr int kMaxRetries = 1000;

}  // namespace detail

/// Class prototypes (object, part) for a dataset, fixed by its seed.
struct Prototypes {
  std::vector<Vector> object;  // C unit vectors sharing a common direction
  std::vector<Vector> part;    // C unit vectors orthogonal to every object prototype
};

inline Prototypes make_prototypes(const GenConfig& cfg) {
  std::mt19937_64 rng(cfg.prototype_seed);
  const int C = cfg.num_classes;
  const auto basis = detail::orthonormal_basis(cfg.raw_dim, 2 * C + 1, rng);
  Prototypes p;
  const double a = cfg.prototype_sharing;
  const double b = std::sqrt(std::max(0.0, 1.0 - a * a));
  for (int c = 0; c < C; ++c) {
    p.object.push_back(a * basis[0] + b * basis[static_cast<std::size_t>(1 + c)]);
    p.part.push_back(basis[static_cast<std::size_t>(1 + C + c)]);
  }
  return p;
}

/// Raw feature of one proposal given the planted objects and parts.
inline Vector proposal_feature(const BBox& b, const ImageGroundTruth& objects, const std::vector<BBox>& parts,
                               const Prototypes& protos, const GenConfig& cfg) {
  const auto C = static_cast<std::size_t>(cfg.num_classes);
  std::vector<double> obj(C, 0.0);
  std::vector<double> part(C, 0.0);
  for (std::size_t j = 0; j < objects.size(); ++j) {
    const auto c = static_cast<std::size_t>(objects[j].class_id - 1);
    obj[c] = std::max(obj[c], iou(b, objects[j].box));
    part[c] = std::max(part[c], detail::part_evidence(b, parts[j], cfg.part_dilution));
  }
  Vector f = Vector::Zero(cfg.raw_dim);
  for (std::size_t c = 0; c < C; ++c)
    f += cfg.object_signal * obj[c] * protos.object[c] + cfg.part_signal * part[c] * protos.part[c];
  return f;
}

inline DatasetManifest generate_synthetic(const GenConfig& cfg) {
  cfg.validate();
  const Prototypes protos = make_prototypes(cfg);
  std::mt19937_64 rng(cfg.seed);
  detail::BoxSampler bs(rng, cfg.canvas);
  std::normal_distribution<double> noise(0.0, 1.0);

  DatasetManifest m;
  m.seed = cfg.seed;
  m.num_classes = cfg.num_classes;
  m.raw_dim = cfg.raw_dim;
  m.generator = to_json(cfg);

  const double min_side = 0.2 * cfg.canvas;
  const double max_side = 0.45 * cfg.canvas;
  for (int i = 0; i < cfg.num_images; ++i) {
    TrainImage img;
    ImageAnnotation ann;
    img.image_id = "img" + std::to_string(i);
    img.width = cfg.canvas;
    img.height = cfg.canvas;

    const int n_obj = bs.uniform_int(cfg.min_objects, cfg.max_objects);
    for (int attempt = 0; static_cast<int>(ann.objects.size()) < n_obj; ++attempt) {
      if (attempt > detail::kMaxRetries)
        throw DataError("could not place " + std::to_string(n_obj) + " disjoint objects in " + img.image_id);
      const BBox b = bs.random_box(min_side, max_side);
      const bool clear = std::all_of(ann.objects.begin(), ann.objects.end(),
                                     [&](const GroundTruth& g) { return intersection_area(g.box, b) == 0.0; });
      if (!clear) continue;
      ann.objects.push_back({b, bs.uniform_int(1, cfg.num_classes)});
      ann.parts.push_back(bs.sub_box(b, bs.uniform(cfg.part_area_min, cfg.part_area_max)));
    }

    auto add = [&](const BBox& b, ProposalKind kind, int parent) {
      img.proposals.push_back(b);
      ann.kinds.push_back(kind);
      ann.parents.push_back(parent);
    };
    // Rejection-sample a box from `make` until `accept` holds.
    auto sample = [&](auto&& make, auto&& accept) {
      for (int t = 0; t < detail::kMaxRetries; ++t) {
        const BBox b = make();
        if (b.valid() && accept(b)) return b;
      }
      throw DataError("proposal sampling did not converge in " + img.image_id);
    };

    for (std::size_t j = 0; j < ann.objects.size(); ++j) {
      const BBox& obj = ann.objects[j].box;
      const BBox& part = ann.parts[j];
      const int parent = static_cast<int>(j);
      // whole-object proposals at graded IoU; the first is a tight one
      const double levels[] = {0.85, 0.75, 0.65, 0.55};
      for (double lo : levels)
        add(sample([&] { return bs.jitter(obj, 0.15); },
                   [&](const BBox& b) { double v = iou(b, obj); return v > lo && v <= lo + 0.1; }),
            ProposalKind::kObject, parent);
      // boxes growing from the part towards the whole object
      for (double t : {0.3, 0.55, 0.8}) {
        const BBox grown{part.x1 + t * (obj.x1 - part.x1), part.y1 + t * (obj.y1 - part.y1),
                         part.x2 + t * (obj.x2 - part.x2), part.y2 + t * (obj.y2 - part.y2)};
        add(sample([&] { return bs.jitter(grown, 0.05); }, [](const BBox&) { return true; }),
            ProposalKind::kGrowth, parent);
      }
      // part boxes: near the discriminative part, and elsewhere inside the object
      auto in_band = [&](const BBox& b) {
        const double v = iou(b, obj);
        return v >= cfg.part_iou_min && v <= cfg.part_iou_max;
      };
      for (int n = 0; n < 2; ++n) add(sample([&] { return bs.jitter(part, 0.1); }, in_band), ProposalKind::kPart, parent);
      for (int n = 0; n < 2; ++n)
        add(sample([&] { return bs.sub_box(obj, bs.uniform(cfg.part_iou_min, cfg.part_iou_max)); }, in_band),
            ProposalKind::kPart, parent);
    }
    if (static_cast<int>(img.proposals.size()) > cfg.num_proposals)
      throw ConfigError("num_proposals too small for the planted objects");
    while (static_cast<int>(img.proposals.size()) < cfg.num_proposals)
      add(bs.random_box(0.1 * cfg.canvas, 0.5 * cfg.canvas), ProposalKind::kBackground, -1);

    // shuffle so proposal order carries no information
    std::vector<std::size_t> order(img.proposals.size());
    for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<BBox> boxes;
    std::vector<ProposalKind> kinds;
    std::vector<int> parents;
    for (std::size_t r : order) {
      boxes.push_back(img.proposals[r]);
      kinds.push_back(ann.kinds[r]);
      parents.push_back(ann.parents[r]);
    }
    img.proposals = std::move(boxes);
    ann.kinds = std::move(kinds);
    ann.parents = std::move(parents);

    img.features.resize(static_cast<Eigen::Index>(img.proposals.size()), cfg.raw_dim);
    for (std::size_t r = 0; r < img.proposals.size(); ++r) {
      Vector f = proposal_feature(img.proposals[r], ann.objects, ann.parts, protos, cfg);
      for (int d = 0; d < cfg.raw_dim; ++d) f(d) += cfg.noise * noise(rng);
      img.features.row(static_cast<Eigen::Index>(r)) = f.transpose();
    }

    img.labels.assign(static_cast<std::size_t>(cfg.num_classes), 0);
    for (const auto& g : ann.objects) img.labels[static_cast<std::size_t>(g.class_id - 1)] = 1;
    m.images.push_back(std::move(img));
    m.annotations.push_back(std::move(ann));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dataset file: JSON lines.
//
//   {"schema":"pcl-dataset","version":1,"seed":..,"num_classes":..,"raw_dim":..,
//    "num_images":N,"generator":{..}}
//   N image records {image_id,width,height,labels,proposals,features}
//   {"section":"groundtruth"}
//   N records {image_id,groundtruth:[{box,class}],parts,proposal_kinds,parents}

namespace detail {

inline nlohmann::json box_json(const BBox& b) { return {b.x1, b.y1, b.x2, b.y2}; }

inline BBox box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw nlohmann::json::type_error::create(302, "box must be [x1,y1,x2,y2]", &j);
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw nlohmann::json::other_error::create(501, "invalid box", &j);
  return b;
}

}  // namespace detail

inline void save_dataset(const DatasetManifest& m, std::ostream& out) {
  using nlohmann::json;
  out << json{{"schema", "pcl-dataset"},
              {"version", m.schema_version},
              {"seed", m.seed},
              {"num_classes", m.num_classes},
              {"raw_dim", m.raw_dim},
              {"num_images", m.images.size()},
              {"generator", m.generator}}
             .dump()
      << '\n';
  for (const auto& img : m.images) {
    json props = json::array();
    for (const auto& b : img.proposals) props.push_back(detail::box_json(b));
    json feats = json::array();
    for (Eigen::Index r = 0; r < img.features.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(img.features.cols()));
      for (Eigen::Index d = 0; d < img.features.cols(); ++d) row[static_cast<std::size_t>(d)] = img.features(r, d);
      feats.push_back(row);
    }
    out << json{{"image_id", img.image_id}, {"width", img.width},    {"height", img.height},
                {"labels", img.labels},     {"proposals", props}, {"features", feats}}
               .dump()
        << '\n';
  }
  out << json{{"section", "groundtruth"}}.dump() << '\n';
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    const auto& a = m.annotations[i];
    json gt = json::array();
    for (const auto& g : a.objects) gt.push_back({{"box", detail::box_json(g.box)}, {"class", g.class_id}});
    json parts = json::array();
    for (const auto& b : a.parts) parts.push_back(detail::box_json(b));
    std::vector<std::string> kinds;
    for (auto k : a.kinds) kinds.emplace_back(to_string(k));
    out << json{{"image_id", m.images[i].image_id},
                {"groundtruth", gt},
                {"parts", parts},
                {"proposal_kinds", kinds},
                {"parents", a.parents}}
               .dump()
        << '\n';
  }
}

inline void save_dataset(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  save_dataset(m, out);
  if (!out) throw ConfigError("failed writing " + path);
}

inline DatasetManifest load_dataset(std::istream& in) {
  using nlohmann::json;
  std::size_t lineno = 0;
  std::string line;
  auto next = [&](const char* what) -> json {
    if (!std::getline(in, line)) throw ParseError(std::string("unexpected end of file, expected ") + what, lineno + 1);
    ++lineno;
    try {
      return json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
  };

  DatasetManifest m;
  std::size_t n = 0;
  {
    const json h = next("header");
    try {
      if (h.at("schema").get<std::string>() != "pcl-dataset") throw ParseError("not a pcl dataset file", lineno);
      m.schema_version = h.at("version").get<int>();
      if (m.schema_version != kDatasetSchemaVersion)
        throw ParseError("unsupported schema version " + std::to_string(m.schema_version) + " (expected " +
                             std::to_string(kDatasetSchemaVersion) + ")",
                         lineno);
      m.seed = h.at("seed").get<std::uint64_t>();
      m.num_classes = h.at("num_classes").get<int>();
      m.raw_dim = h.at("raw_dim").get<int>();
      n = h.at("num_images").get<std::size_t>();
      m.generator = h.value("generator", json());
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad header: ") + e.what(), lineno);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const json j = next("image record");
    try {
      TrainImage img;
      img.image_id = j.at("image_id").get<std::string>();
      img.width = j.at("width").get<double>();
      img.height = j.at("height").get<double>();
      img.labels = j.at("labels").get<std::vector<int>>();
      if (static_cast<int>(img.labels.size()) != m.num_classes) throw ParseError("label vector length != num_classes", lineno);
      for (const auto& b : j.at("proposals")) img.proposals.push_back(detail::box_from_json(b));
      const auto& feats = j.at("features");
      if (feats.size() != img.proposals.size()) throw ParseError("feature rows != proposal count", lineno);
      img.features.resize(static_cast<Eigen::Index>(feats.size()), m.raw_dim);
      for (std::size_t r = 0; r < feats.size(); ++r) {
        const auto row = feats[r].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != m.raw_dim) throw ParseError("feature row width != raw_dim", lineno);
        for (int d = 0; d < m.raw_dim; ++d) img.features(static_cast<Eigen::Index>(r), d) = row[static_cast<std::size_t>(d)];
      }
      m.images.push_back(std::move(img));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad image record: ") + e.what(), lineno);
    }
  }

  {
    const json s = next("groundtruth section marker");
    if (!s.is_object() || s.value("section", std::string()) != "groundtruth")
      throw ParseError("expected groundtruth section marker", lineno);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const json j = next("groundtruth record");
    try {
      if (j.at("image_id").get<std::string>() != m.images[i].image_id)
        throw ParseError("groundtruth record out of order", lineno);
      ImageAnnotation a;
      for (const auto& g : j.at("groundtruth"))
        a.objects.push_back({detail::box_from_json(g.at("box")), g.at("class").get<int>()});
      for (const auto& b : j.value("parts", json::array())) a.parts.push_back(detail::box_from_json(b));
      for (const auto& k : j.value("proposal_kinds", json::array())) a.kinds.push_back(parse_proposal_kind(k.get<std::string>()));
      a.parents = j.value("parents", std::vector<int>{});
      m.annotations.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad groundtruth record: ") + e.what(), lineno);
    } catch (const ParseError& e) {
      if (e.line() != 0) throw;
      throw ParseError(e.what(), lineno);
    }
  }
  return m;
}

inline DatasetManifest load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset " + path);
  return load_dataset(in);
}

}  // namespace pcl

#endif  // PCL_DATAGEN_HPP
