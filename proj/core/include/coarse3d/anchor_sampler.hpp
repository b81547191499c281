#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "coarse3d/tensor.hpp"

namespace coarse3d {

struct EntropyMap {
  int h = 0, w = 0;
  Vec values;  // h*w, nats
};

struct Anchor {
  int row = 0, col = 0;
  int class_id = 0;
};

struct AnchorSet {
  std::vector<Anchor> anchors;
  int epoch = 0;
};

// per-class tables of (pixel index, probability), probabilities summing to 1
struct ClassProbabilityTable {
  std::vector<int> pixels;
  std::vector<double> prob;
};
using SamplingTables = std::map<int, ClassProbabilityTable>;

// softmax_map: (h*w) x K rows summing to 1; natural-log entropy, 0*ln0 = 0
EntropyMap shannon_entropy(const Mat& softmax_map, int h, int w);

// rho(x) = exp(-H^2) normalized within each predicted class over valid pixels
SamplingTables sampling_probabilities(const EntropyMap& entropy,
                                      const std::vector<int>& pred_labels,
                                      const std::vector<std::uint8_t>& valid);

// 0 during warm-up; 1 at the first contrastive epoch; linear in epoch up to
// floor(0.5 * pseudo_count) at the final epoch
int anchor_budget(int epoch, int warmup, int total_epochs, int pseudo_count);

// budget split across classes proportional to pixel counts (largest
// remainder, >= 1 per present class when feasible), then weighted sampling
// without replacement inside each class
AnchorSet sample_anchors(const SamplingTables& tables, int budget, std::uint64_t seed, int width);

}  // namespace coarse3d
