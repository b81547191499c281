#pragma once

#include <cstdint>
#include <vector>

#include "coarse3d/pointcloud.hpp"

namespace coarse3d {

enum class Provenance : std::uint8_t { NONE = 0, ORIGINAL = 1, PROPAGATED = 2 };

struct LabelMask {
  std::vector<int> labels;           // class id or kUnlabelled
  std::vector<Provenance> provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t labelled_count() const;
};

struct ClassStats {
  std::vector<std::int64_t> counts;  // per class, ORIGINAL labels only
  std::vector<double> freq;          // counts / total
};

// keeps exactly max(1, round(ratio * N)) labels, uniform without replacement
LabelMask subsample_labels(const std::vector<int>& dense, double ratio, std::uint64_t seed);

// copies each voxel's label to every point in the voxel; conflicting ORIGINAL
// labels inside one voxel are resolved by one seeded uniform pick per voxel
LabelMask propagate_voxel_labels(const PointCloud& cloud, const LabelMask& mask,
                                 double voxel_size, std::uint64_t seed);

ClassStats class_frequencies(const LabelMask& mask, int n_classes);

// w_k = ln(1 + 1/max(freq_k, eps))
std::vector<double> focal_weights(const ClassStats& stats, double eps = 1e-6);

}  // namespace coarse3d
