#pragma once

#include <cstdint>
#include <vector>

#include "coarse3d/nn.hpp"
#include "coarse3d/pointcloud.hpp"
#include "coarse3d/tensor.hpp"

namespace coarse3d {

struct BackboneConfig {
  int height = 64;
  int width = 2048;
  int in_channels = 5;
  int n_classes = 5;
  std::vector<int> widths = {16, 32, 64};  // one per encoder stage
  double leaky_slope = 0.1;
};

struct FeaturePyramid {
  std::vector<Tensor> levels;  // level s has spatial size (H/2^s) x (W/2^s)
};

// Small encoder-decoder over range images: per-stage 3x3 conv + 2x2 pooling,
// decoder with bilinear upsampling and skip concatenation, 1x1 classifier.
// Encoder stage outputs are exposed as the feature pyramid.
class ToyBackbone {
 public:
  ToyBackbone(const BackboneConfig& cfg, std::uint64_t seed);

  struct Cache {
    Tensor input;
    std::vector<Tensor> enc_in;    // stage inputs (post-pool)
    std::vector<Mat> enc_cols;
    std::vector<Tensor> enc_out;   // pyramid levels (post-activation)
    std::vector<Tensor> dec_in;    // concat inputs per decoder stage
    std::vector<Mat> dec_cols;
    std::vector<Tensor> dec_out;
    Tensor head_in;
  };

  // logits: H x W x K
  Tensor forward(const RangeImage& image, FeaturePyramid& pyramid, Cache& cache) const;

  // d_pyramid entries may be empty tensors (no gradient from the head);
  // accumulates parameter gradients
  void backward(const Cache& cache, const Tensor& d_logits,
                const std::vector<Tensor>& d_pyramid);

  std::vector<Param*> params();
  const BackboneConfig& config() const { return cfg_; }
  int stages() const { return static_cast<int>(cfg_.widths.size()); }

 private:
  BackboneConfig cfg_;
  std::vector<Param> enc_w_, enc_b_;
  std::vector<Param> dec_w_, dec_b_;  // stages-1 decoder convs
  Param cls_w_, cls_b_;
};

Tensor range_image_to_tensor(const RangeImage& image);

}  // namespace coarse3d
