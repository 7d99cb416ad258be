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

// Command-line driver: gen | train | eval | clusters | score.
//
// Exit codes: 0 success, 1 usage error, 2 data or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pcl/clustering.hpp"
#include "pcl/datagen.hpp"
#include "pcl/metrics.hpp"
#include "pcl/model.hpp"
#include "pcl/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_output_dir() {
  const char* env = std::getenv("PCL_OUTPUT_DIR");
  return env != nullptr ? std::string(env) : std::string();
}

/// Resolves an output path: explicit, else under $PCL_OUTPUT_DIR.
fs::path resolve_output(const std::string& given, const std::string& fallback_name) {
  if (!given.empty()) return given;
  const std::string dir = default_output_dir();
  if (dir.empty()) throw UsageError("no output given (-o) and PCL_OUTPUT_DIR is unset");
  return fs::path(dir) / fallback_name;
}

/// Writes via a temporary sibling and renames into place.
template <class Fn>
void write_atomic(const fs::path& path, Fn&& write) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw pcl::ConfigError("cannot write " + tmp.string());
    write(out);
    out.flush();
    if (!out) throw pcl::ConfigError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_atomic(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

std::vector<pcl::LrStage> parse_schedule(const std::string& s) {
  std::vector<pcl::LrStage> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("schedule entries look like ITERS:LR, got '" + item + "'");
    try {
      out.push_back({std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw UsageError("bad schedule entry '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty schedule");
  return out;
}

void check_compatible(const pcl::ModelParams& p, const pcl::DatasetManifest& m) {
  if (p.num_classes() != m.num_classes)
    throw pcl::ConfigError("checkpoint has " + std::to_string(p.num_classes()) + " classes, dataset has " +
                           std::to_string(m.num_classes));
  if (p.embed.in() != m.raw_dim)
    throw pcl::ConfigError("checkpoint raw_dim " + std::to_string(p.embed.in()) + " != dataset raw_dim " +
                           std::to_string(m.raw_dim));
}

void emit(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json(out_path, j);
}

// ---------------------------------------------------------------------------

struct GenArgs {
  pcl::GenConfig cfg;
  std::string out;
};

void run_gen(const GenArgs& a) {
  try {
    a.cfg.validate();
  } catch (const pcl::ConfigError& err) {
    throw UsageError(err.what());
  }
  const fs::path path = resolve_output(a.out, "dataset.jsonl");
  const pcl::DatasetManifest m = pcl::generate_synthetic(a.cfg);
  write_atomic(path, [&](std::ostream& o) { pcl::save_dataset(m, o); });
  std::cerr << "wrote " << m.images.size() << " images to " << path.string() << '\n';
}

struct TrainArgs {
  pcl::TrainConfig cfg;
  std::string data;
  std::string out;
  std::string center_method = "graph";
  std::string refine_loss = "bag";
  std::string schedule = "2000:0.01,500:0.001";
};

void run_train(TrainArgs a) {
  a.cfg.clustering.method = pcl::parse_center_method(a.center_method);
  a.cfg.refine_loss = pcl::parse_refine_loss(a.refine_loss);
  a.cfg.schedule = parse_schedule(a.schedule);
  a.cfg.validate();
  const fs::path dir = resolve_output(a.out, "run");
  if (!fs::exists(a.data)) throw pcl::ConfigError("dataset not found: " + a.data);
  const pcl::DatasetManifest m = pcl::load_dataset(a.data);
  const std::vector<pcl::TrainImage> images = pcl::training_view(m);

  const pcl::TrainResult res = pcl::train(images, a.cfg);
  fs::create_directories(dir);
  write_json(dir / "config.json", {{"command", "train"}, {"data", a.data}, {"train", pcl::to_json(a.cfg)}});
  write_atomic(dir / "train_log.csv",
               [&](std::ostream& o) { pcl::write_training_log(res.log, a.cfg.num_refinements, o); });
  write_atomic(dir / "checkpoint.json", [&](std::ostream& o) { o << pcl::to_json(res.params).dump() << '\n'; });
  std::cerr << "trained " << res.log.size() << " iterations; outputs in " << dir.string() << '\n';
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string dump_dets;
  double nms = 0.3;
};

void run_eval(const EvalArgs& a) {
  const pcl::ModelParams params = pcl::load_checkpoint(a.checkpoint);
  const pcl::DatasetManifest m = pcl::load_dataset(a.data);
  check_compatible(params, m);
  const auto gts = m.groundtruth();
  const pcl::EvalOutput ev = pcl::evaluate(m.images, gts, params, a.nms);
  if (!a.dump_dets.empty()) {
    std::vector<std::string> ids;
    for (const auto& img : m.images) ids.push_back(img.image_id);
    write_atomic(a.dump_dets, [&](std::ostream& o) { pcl::write_detections(ev.detections, ids, o); });
  }
  for (const auto& w : ev.report.warnings) std::cerr << "warning: " << w << '\n';
  emit(pcl::to_json(ev.report), a.out);
}

struct ScoreArgs {
  std::string detections;
  std::string data;
  std::string out;
};

void run_score(const ScoreArgs& a) {
  const pcl::DatasetManifest m = pcl::load_dataset(a.data);
  std::vector<std::string> ids;
  for (const auto& img : m.images) ids.push_back(img.image_id);
  std::ifstream in(a.detections);
  if (!in) throw pcl::ConfigError("cannot open detections " + a.detections);
  const auto dets = pcl::read_detections(in, ids);
  const auto gts = m.groundtruth();
  const pcl::MetricsReport rep = pcl::evaluate_detections(dets, gts, m.num_classes);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  emit(pcl::to_json(rep), a.out);
}

struct ClustersArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string config;
  int stream = 1;
  pcl::ClusteringConfig clustering;
  std::string center_method = "graph";
};

void run_clusters(ClustersArgs a) {
  const pcl::ModelParams params = pcl::load_checkpoint(a.checkpoint);
  const int K = params.num_refinements();
  if (a.stream < 1 || a.stream > K)
    throw UsageError("--stream must lie in 1.." + std::to_string(K) + " for this checkpoint");
  pcl::TrainConfig cfg;
  cfg.clustering = a.clustering;
  cfg.clustering.method = pcl::parse_center_method(a.center_method);
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw pcl::ConfigError("cannot open config " + a.config);
    const auto j = nlohmann::json::parse(in).at("train");
    cfg.clustering.method = pcl::parse_center_method(j.at("center_method").get<std::string>());
    cfg.clustering.graph_iou = j.at("graph_iou").get<double>();
    cfg.clustering.cluster_iou = j.at("cluster_iou").get<double>();
    cfg.clustering.kmeans_clusters = j.at("kmeans_clusters").get<int>();
    cfg.clustering.max_centers = j.at("max_centers").get<int>();
  }
  const pcl::DatasetManifest m = pcl::load_dataset(a.data);
  check_compatible(params, m);

  std::ostringstream buf;
  for (const auto& img : m.images) {
    const pcl::ImageForward fwd = pcl::forward_all(img.features, params);
    const pcl::StreamSupervision s = pcl::make_supervision(pcl::supervising_scores(fwd, a.stream), img, cfg);
    buf << pcl::clusters_to_json(img.image_id, a.stream, s.centers, s.clusters).dump() << '\n';
  }
  if (a.out.empty())
    std::cout << buf.str();
  else
    write_atomic(a.out, [&](std::ostream& o) { o << buf.str(); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proposal cluster learning for weakly supervised detection"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic dataset");
  g->add_option("--images", gen.cfg.num_images, "number of images")->capture_default_str();
  g->add_option("--classes", gen.cfg.num_classes, "number of object classes (>= 2)")->capture_default_str();
  g->add_option("--proposals", gen.cfg.num_proposals, "proposals per image (>= 20)")->capture_default_str();
  g->add_option("--raw-dim", gen.cfg.raw_dim, "raw feature width")->capture_default_str();
  g->add_option("--min-objects", gen.cfg.min_objects)->capture_default_str();
  g->add_option("--max-objects", gen.cfg.max_objects)->capture_default_str();
  g->add_option("--noise", gen.cfg.noise, "feature noise standard deviation")->capture_default_str();
  g->add_option("--part-signal", gen.cfg.part_signal)->capture_default_str();
  g->add_option("--object-signal", gen.cfg.object_signal)->capture_default_str();
  g->add_option("--part-dilution", gen.cfg.part_dilution, "how fast part evidence fades in larger boxes")
      ->capture_default_str();
  g->add_option("--prototype-seed", gen.cfg.prototype_seed, "seed for the class feature prototypes")
      ->capture_default_str();
  g->add_option("--seed", gen.cfg.seed)->capture_default_str();
  g->add_option("-o,--output", gen.out, "dataset file (default $PCL_OUTPUT_DIR/dataset.jsonl)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--data", tr.data, "training dataset")->required();
  t->add_option("--k", tr.cfg.num_refinements, "number of refined classifiers")->capture_default_str();
  t->add_option("--center-method", tr.center_method, "highest|graph")->capture_default_str();
  t->add_option("--refine-loss", tr.refine_loss, "assigned|assigned_weighted|bag")->capture_default_str();
  t->add_option("--graph-iou", tr.cfg.clustering.graph_iou)->capture_default_str();
  t->add_option("--cluster-iou", tr.cfg.clustering.cluster_iou)->capture_default_str();
  t->add_option("--kmeans-clusters", tr.cfg.clustering.kmeans_clusters)->capture_default_str();
  t->add_option("--max-centers", tr.cfg.clustering.max_centers)->capture_default_str();
  t->add_option("--schedule", tr.schedule, "comma list of ITERS:LR")->capture_default_str();
  t->add_option("--momentum", tr.cfg.momentum)->capture_default_str();
  t->add_option("--weight-decay", tr.cfg.weight_decay)->capture_default_str();
  t->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  t->add_option("--embed-dim", tr.cfg.embed_dim)->capture_default_str();
  t->add_option("--seed", tr.cfg.seed)->capture_default_str();
  t->add_flag("--alternating", tr.cfg.alternating, "supervise from periodically frozen snapshots");
  t->add_option("--alternating-rounds", tr.cfg.alternating_rounds)->capture_default_str();
  t->add_option("-o,--output", tr.out, "run directory (default $PCL_OUTPUT_DIR/run)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--nms", ev.nms, "per-class NMS IoU threshold")->capture_default_str();
  e->add_option("--dump-dets", ev.dump_dets, "write detections as JSON lines");
  e->add_option("-o,--output", ev.out, "metrics report (default stdout)");

  ClustersArgs cl;
  auto* c = app.add_subcommand("clusters", "dump proposal clusters for one refined stream");
  c->add_option("--checkpoint", cl.checkpoint)->required();
  c->add_option("--data", cl.data)->required();
  c->add_option("--stream", cl.stream, "refined stream k in 1..K")->capture_default_str();
  c->add_option("--config", cl.config, "take clustering settings from a run's config.json");
  c->add_option("--center-method", cl.center_method)->capture_default_str();
  c->add_option("--graph-iou", cl.clustering.graph_iou)->capture_default_str();
  c->add_option("--cluster-iou", cl.clustering.cluster_iou)->capture_default_str();
  c->add_option("--kmeans-clusters", cl.clustering.kmeans_clusters)->capture_default_str();
  c->add_option("--max-centers", cl.clustering.max_centers)->capture_default_str();
  c->add_option("-o,--output", cl.out, "JSON lines output (default stdout)");

  ScoreArgs sc;
  auto* s = app.add_subcommand("score", "score a detections file against a dataset");
  s->add_option("--detections", sc.detections)->required();
  s->add_option("--data", sc.data)->required();
  s->add_option("-o,--output", sc.out, "metrics report (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (g->parsed()) run_gen(gen);
    if (t->parsed()) run_train(tr);
    if (e->parsed()) run_eval(ev);
    if (c->parsed()) run_clusters(cl);
    if (s->parsed()) run_score(sc);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const pcl::ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return 0;
}
