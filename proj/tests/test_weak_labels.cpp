#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "coarse3d/weak_labels.hpp"

using namespace coarse3d;

namespace {

PointCloud grid_cloud(int n, float spacing) {
  PointCloud cloud;
  for (int i = 0; i < n; ++i) cloud.push_back(i * spacing, 0.f, 0.f, 0.f);
  return cloud;
}

}  // namespace

TEST_CASE("subsample keeps exactly max(1, round(ratio * N))") {
  const std::vector<int> dense(1000, 2);
  CHECK(subsample_labels(dense, 0.001, 1).labelled_count() == 1);
  CHECK(subsample_labels(dense, 0.01, 1).labelled_count() == 10);
  CHECK(subsample_labels(dense, 0.0149, 1).labelled_count() == 15);  // rounds to nearest
  CHECK(subsample_labels(std::vector<int>(3, 0), 0.001, 1).labelled_count() == 1);  // floor of 1
  CHECK(subsample_labels(dense, 1.0, 1).labelled_count() == 1000);
}

TEST_CASE("subsample marks kept points ORIGINAL and drops the rest") {
  std::vector<int> dense(50);
  for (int i = 0; i < 50; ++i) dense[i] = i % 4;
  const LabelMask mask = subsample_labels(dense, 0.2, 7);
  REQUIRE(mask.size() == 50);
  int kept = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.provenance[i] == Provenance::ORIGINAL) {
      CHECK(mask.labels[i] == dense[i]);
      ++kept;
    } else {
      CHECK(mask.provenance[i] == Provenance::NONE);
      CHECK(mask.labels[i] == kUnlabelled);
    }
  }
  CHECK(kept == 10);
}

TEST_CASE("subsample is deterministic and seed-sensitive") {
  std::vector<int> dense(200, 1);
  const LabelMask a = subsample_labels(dense, 0.1, 5);
  const LabelMask b = subsample_labels(dense, 0.1, 5);
  const LabelMask c = subsample_labels(dense, 0.1, 6);
  CHECK(a.labels == b.labels);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.provenance[i] != c.provenance[i]) differs = true;
  CHECK(differs);
}

TEST_CASE("voxel propagation fills co-voxel points and leaves originals alone") {
  // points 0,1 share a voxel (0.06); point 2 is far away
  PointCloud cloud;
  cloud.push_back(0.01f, 0.01f, 0.f, 0.f);
  cloud.push_back(0.02f, 0.02f, 0.f, 0.f);
  cloud.push_back(1.f, 1.f, 1.f, 0.f);
  LabelMask mask;
  mask.labels = {3, kUnlabelled, kUnlabelled};
  mask.provenance = {Provenance::ORIGINAL, Provenance::NONE, Provenance::NONE};
  const LabelMask out = propagate_voxel_labels(cloud, mask, 0.06, 9);
  CHECK(out.labels[0] == 3);
  CHECK(out.provenance[0] == Provenance::ORIGINAL);
  CHECK(out.labels[1] == 3);
  CHECK(out.provenance[1] == Provenance::PROPAGATED);
  CHECK(out.labels[2] == kUnlabelled);
  CHECK(out.provenance[2] == Provenance::NONE);
}

TEST_CASE("voxel binning is a floor anchored at the origin") {
  // 0.059 and 0.061 straddle the voxel boundary at 0.06
  PointCloud cloud;
  cloud.push_back(0.059f, 0.f, 0.f, 0.f);
  cloud.push_back(0.061f, 0.f, 0.f, 0.f);
  LabelMask mask;
  mask.labels = {2, kUnlabelled};
  mask.provenance = {Provenance::ORIGINAL, Provenance::NONE};
  const LabelMask out = propagate_voxel_labels(cloud, mask, 0.06, 1);
  CHECK(out.labels[1] == kUnlabelled);  // different voxel: no propagation
}

TEST_CASE("conflicting voxel labels resolve by a seeded uniform pick") {
  PointCloud cloud;
  cloud.push_back(0.01f, 0.f, 0.f, 0.f);
  cloud.push_back(0.02f, 0.f, 0.f, 0.f);
  cloud.push_back(0.03f, 0.f, 0.f, 0.f);
  LabelMask mask;
  mask.labels = {1, 4, kUnlabelled};
  mask.provenance = {Provenance::ORIGINAL, Provenance::ORIGINAL, Provenance::NONE};

  std::set<int> outcomes;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const LabelMask out = propagate_voxel_labels(cloud, mask, 0.06, seed);
    // originals never change
    CHECK(out.labels[0] == 1);
    CHECK(out.labels[1] == 4);
    CHECK(out.provenance[2] == Provenance::PROPAGATED);
    outcomes.insert(out.labels[2]);
    // determinism per seed
    CHECK(propagate_voxel_labels(cloud, mask, 0.06, seed).labels == out.labels);
  }
  CHECK(outcomes == std::set<int>{1, 4});  // both outcomes reachable
}

TEST_CASE("class frequencies count ORIGINAL labels only") {
  PointCloud cloud = grid_cloud(4, 1.f);
  (void)cloud;
  LabelMask mask;
  mask.labels = {0, 0, 1, 1};
  mask.provenance = {Provenance::ORIGINAL, Provenance::ORIGINAL, Provenance::ORIGINAL,
                     Provenance::PROPAGATED};
  const ClassStats stats = class_frequencies(mask, 3);
  CHECK(stats.counts == std::vector<std::int64_t>{2, 1, 0});
  CHECK(stats.freq[0] == doctest::Approx(2.0 / 3.0));
  CHECK(stats.freq[1] == doctest::Approx(1.0 / 3.0));
  CHECK(stats.freq[2] == 0.0);
}

TEST_CASE("class frequencies reject an all-unlabelled mask") {
  LabelMask mask;
  mask.labels = {kUnlabelled};
  mask.provenance = {Provenance::NONE};
  CHECK_THROWS_AS(class_frequencies(mask, 2), std::runtime_error);
}

TEST_CASE("focal weights follow ln(1 + 1/freq) with an eps floor") {
  ClassStats stats;
  stats.counts = {3, 1, 0};
  stats.freq = {0.75, 0.25, 0.0};
  const auto w = focal_weights(stats);
  CHECK(w[0] == doctest::Approx(std::log(1.0 + 1.0 / 0.75)));
  CHECK(w[1] == doctest::Approx(std::log(1.0 + 1.0 / 0.25)));
  CHECK(w[2] == doctest::Approx(std::log(1.0 + 1e6)));
  CHECK(w[1] > w[0]);  // rarer class weighs more
}
