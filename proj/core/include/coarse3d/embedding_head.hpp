#pragma once

#include <cstdint>
#include <vector>

#include "coarse3d/backbone.hpp"
#include "coarse3d/nn.hpp"
#include "coarse3d/tensor.hpp"

namespace coarse3d {

struct HeadConfig {
  int embed_dim = 256;
  double leaky_slope = 0.1;
  bool use_bias = true;
};

// Projection head: each pyramid level is bilinearly resized to full
// resolution, channel-concatenated, passed through two pointwise layers with
// a leaky rectifier in between, then per-pixel l2-normalized.
class ProjectionHead {
 public:
  ProjectionHead(const HeadConfig& cfg, const std::vector<int>& level_channels,
                 std::uint64_t seed);

  struct Cache {
    std::vector<int> level_h, level_w;
    Tensor concat;
    Tensor hidden;   // post-activation
    Tensor pre_norm;
    Vec norms;
  };

  // returns H x W x D unit-norm embeddings
  Tensor forward(const FeaturePyramid& pyramid, Cache& cache) const;

  // returns per-level gradients for the backbone pyramid
  std::vector<Tensor> backward(const Cache& cache, const Tensor& d_embed);

  std::vector<Param*> params();
  const HeadConfig& config() const { return cfg_; }

 private:
  HeadConfig cfg_;
  std::vector<int> level_channels_;
  Param w1_, b1_, w2_, b2_;
};

}  // namespace coarse3d
