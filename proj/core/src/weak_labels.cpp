#include "coarse3d/weak_labels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "coarse3d/rng.hpp"

namespace coarse3d {

std::size_t LabelMask::labelled_count() const {
  std::size_t n = 0;
  for (auto p : provenance)
    if (p != Provenance::NONE) ++n;
  return n;
}

LabelMask subsample_labels(const std::vector<int>& dense, double ratio, std::uint64_t seed) {
  if (ratio <= 0.0 || ratio > 1.0) throw std::invalid_argument("subsample_labels: bad ratio");
  const std::size_t n = dense.size();
  LabelMask mask;
  mask.labels.assign(n, kUnlabelled);
  mask.provenance.assign(n, Provenance::NONE);
  if (n == 0) return mask;

  const std::size_t keep =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x5ab5aULL));
  for (std::size_t i = 0; i < keep; ++i) {  // partial Fisher-Yates
    const std::size_t j = i + rng.uniform_int(n - i);
    std::swap(idx[i], idx[j]);
    mask.labels[idx[i]] = dense[idx[i]];
    mask.provenance[idx[i]] = Provenance::ORIGINAL;
  }
  return mask;
}

LabelMask propagate_voxel_labels(const PointCloud& cloud, const LabelMask& mask,
                                 double voxel_size, std::uint64_t seed) {
  if (voxel_size <= 0.0) throw std::invalid_argument("propagate_voxel_labels: bad voxel size");
  if (cloud.size() != mask.size())
    throw std::invalid_argument("propagate_voxel_labels: cloud/mask size mismatch");

  auto voxel_key = [&](std::size_t i) {
    // floor binning anchored at the coordinate origin
    const auto vx = static_cast<std::int64_t>(std::floor(cloud.xs[i] / voxel_size));
    const auto vy = static_cast<std::int64_t>(std::floor(cloud.ys[i] / voxel_size));
    const auto vz = static_cast<std::int64_t>(std::floor(cloud.zs[i] / voxel_size));
    return (static_cast<std::uint64_t>(vx) & 0x1FFFFFu) |
           ((static_cast<std::uint64_t>(vy) & 0x1FFFFFu) << 21) |
           ((static_cast<std::uint64_t>(vz) & 0x1FFFFFu) << 42);
  };

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> voxels;
  std::vector<std::uint64_t> order;  // first-touch order keeps iteration deterministic
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto key = voxel_key(i);
    auto [it, inserted] = voxels.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(i);
  }

  LabelMask out = mask;
  for (const auto key : order) {
    const auto& members = voxels[key];
    std::vector<int> original;
    for (auto i : members)
      if (mask.provenance[i] == Provenance::ORIGINAL) original.push_back(mask.labels[i]);
    if (original.empty()) continue;
    int voxel_label = original[0];
    if (original.size() > 1) {
      Rng rng(derive_seed(seed, key, 0x70befULL));
      voxel_label = original[rng.uniform_int(original.size())];
    }
    for (auto i : members) {
      if (mask.provenance[i] == Provenance::ORIGINAL) continue;  // originals never change
      out.labels[i] = voxel_label;
      out.provenance[i] = Provenance::PROPAGATED;
    }
  }
  return out;
}

ClassStats class_frequencies(const LabelMask& mask, int n_classes) {
  ClassStats stats;
  stats.counts.assign(n_classes, 0);
  stats.freq.assign(n_classes, 0.0);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.provenance[i] != Provenance::ORIGINAL) continue;
    const int k = mask.labels[i];
    if (k < 0 || k >= n_classes)
      throw std::out_of_range("class_frequencies: label out of range");
    ++stats.counts[k];
    ++total;
  }
  if (total == 0) throw std::runtime_error("class_frequencies: no ORIGINAL labels");
  for (int k = 0; k < n_classes; ++k)
    stats.freq[k] = static_cast<double>(stats.counts[k]) / static_cast<double>(total);
  return stats;
}

std::vector<double> focal_weights(const ClassStats& stats, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("focal_weights: eps must be > 0");
  std::vector<double> w(stats.freq.size());
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] = std::log(1.0 + 1.0 / std::max(stats.freq[k], eps));
  return w;
}

}  // namespace coarse3d
