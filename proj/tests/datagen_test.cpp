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

#include "pcl/datagen.hpp"

#include <sstream>

#include <gtest/gtest.h>

namespace pcl {
namespace {

std::string serialize(const DatasetManifest& m) {
  std::ostringstream out;
  save_dataset(m, out);
  return out.str();
}

DatasetManifest small(std::uint64_t seed = 3, int n = 10) {
  GenConfig g;
  g.num_images = n;
  g.seed = seed;
  return generate_synthetic(g);
}

TEST(GenerateTest, SameSeedSameBytes) {
  EXPECT_EQ(serialize(small(3)), serialize(small(3)));
  EXPECT_NE(serialize(small(3)), serialize(small(4)));
}

TEST(GenerateTest, EveryObjectCovered) {
  const DatasetManifest m = generate_synthetic(GenConfig{});
  ASSERT_EQ(m.images.size(), 100u);
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    for (const auto& g : m.annotations[i].objects) {
      double best = 0.0;
      for (const auto& b : m.images[i].proposals) best = std::max(best, iou(b, g.box));
      EXPECT_GT(best, 0.5) << m.images[i].image_id;
    }
  }
}

TEST(GenerateTest, LabelsMatchObjects) {
  const DatasetManifest m = small();
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    std::vector<int> y(4, 0);
    for (const auto& g : m.annotations[i].objects) y[static_cast<std::size_t>(g.class_id - 1)] = 1;
    EXPECT_EQ(m.images[i].labels, y);
    EXPECT_EQ(m.images[i].num_proposals(), 50);
    EXPECT_EQ(m.images[i].features.cols(), 16);
  }
}

TEST(GenerateTest, PartProposalsInIouBand) {
  const GenConfig g;
  const DatasetManifest m = small();
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    const auto& a = m.annotations[i];
    for (std::size_t r = 0; r < a.kinds.size(); ++r) {
      if (a.kinds[r] != ProposalKind::kPart) continue;
      const double v = iou(m.images[i].proposals[r], a.objects[static_cast<std::size_t>(a.parents[r])].box);
      EXPECT_GE(v, g.part_iou_min);
      EXPECT_LE(v, g.part_iou_max);
    }
  }
}

TEST(GenerateTest, NoiselessPrototypeProbe) {
  GenConfig g;
  g.num_images = 30;
  g.noise = 0.0;
  const DatasetManifest m = generate_synthetic(g);
  const Prototypes protos = make_prototypes(g);
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    const auto& img = m.images[i];
    for (const auto& obj : m.annotations[i].objects) {
      std::size_t best = 0;
      for (std::size_t r = 1; r < img.proposals.size(); ++r)
        if (iou(img.proposals[r], obj.box) > iou(img.proposals[best], obj.box)) best = r;
      const Vector f = img.features.row(static_cast<Eigen::Index>(best)).transpose();
      int top = 0;
      for (int c = 1; c < g.num_classes; ++c)
        if (f.dot(protos.object[static_cast<std::size_t>(c)]) > f.dot(protos.object[static_cast<std::size_t>(top)]))
          top = c;
      EXPECT_EQ(top + 1, obj.class_id) << img.image_id;
    }
  }
}

TEST(GenerateTest, BackgroundCarriesLessSignal) {
  GenConfig g;
  g.num_images = 30;
  g.noise = 0.0;
  const DatasetManifest m = generate_synthetic(g);
  double obj = 0.0, bg = 0.0;
  int n_obj = 0, n_bg = 0;
  for (std::size_t i = 0; i < m.images.size(); ++i)
    for (std::size_t r = 0; r < m.annotations[i].kinds.size(); ++r) {
      const double norm = m.images[i].features.row(static_cast<Eigen::Index>(r)).norm();
      if (m.annotations[i].kinds[r] == ProposalKind::kObject) {
        obj += norm;
        ++n_obj;
      } else if (m.annotations[i].kinds[r] == ProposalKind::kBackground) {
        bg += norm;
        ++n_bg;
      }
    }
  EXPECT_LT(bg / n_bg, obj / n_obj);
}

TEST(GenerateTest, PrototypesIndependentOfImageSeed) {
  GenConfig a, b;
  a.seed = 1;
  b.seed = 2;
  EXPECT_EQ(make_prototypes(a).object, make_prototypes(b).object);
  b.prototype_seed = 9;
  EXPECT_NE(make_prototypes(a).object, make_prototypes(b).object);
}

TEST(GenerateTest, Validation) {
  GenConfig g;
  g.num_classes = 1;
  EXPECT_THROW(generate_synthetic(g), ConfigError);
  g = GenConfig{};
  g.num_proposals = 10;
  EXPECT_THROW(generate_synthetic(g), ConfigError);
}

TEST(DatasetFileTest, RoundTrip) {
  const DatasetManifest m = small();
  std::istringstream in(serialize(m));
  const DatasetManifest back = load_dataset(in);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(gen_config_from_json(back.generator).seed, 3u);
}

TEST(DatasetFileTest, TruncatedFileFails) {
  const std::string text = serialize(small());
  for (std::size_t cut : {text.size() / 3, text.size() / 2, text.size() - 5}) {
    std::istringstream in(text.substr(0, cut));
    EXPECT_THROW(load_dataset(in), ParseError);
  }
}

TEST(DatasetFileTest, EmptyDataset) {
  GenConfig g;
  g.num_images = 0;
  const DatasetManifest m = generate_synthetic(g);
  std::istringstream in(serialize(m));
  const DatasetManifest back = load_dataset(in);
  EXPECT_TRUE(back.images.empty());
  EXPECT_TRUE(back == m);
}

TEST(DatasetFileTest, VersionMismatch) {
  std::string text = serialize(small(3, 1));
  const auto pos = text.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 11, "\"version\":7");
  std::istringstream in(text);
  try {
    load_dataset(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

}  // namespace
}  // namespace pcl
