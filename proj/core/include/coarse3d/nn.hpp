#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coarse3d/tensor.hpp"

namespace coarse3d {

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, int rows, int cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

namespace nn {

double leaky_relu(double x, double slope);
void leaky_relu_forward(Mat& m, double slope);
// dy is modified in place into dx, using the forward output y
void leaky_relu_backward(Mat& dy, const Mat& y, double slope);

// 3x3 same-padding convolution. weight: (9*cin) x cout, bias: 1 x cout.
// cols, when non-null, receives the im2col matrix for the backward pass.
Tensor conv3x3_forward(const Tensor& x, const Param& weight, const Param& bias, Mat* cols);
// accumulates into weight.grad / bias.grad; returns dx
Tensor conv3x3_backward(const Tensor& dy, const Tensor& x, const Mat& cols, Param& weight,
                        Param& bias);

// pointwise (1x1) linear layer
Tensor linear_forward(const Tensor& x, const Param& weight, const Param& bias);
Tensor linear_backward(const Tensor& dy, const Tensor& x, Param& weight, Param& bias);

// 2x2 average pooling (h, w must be even)
Tensor avgpool2_forward(const Tensor& x);
Tensor avgpool2_backward(const Tensor& dy, int h, int w);

// bilinear resize to (out_h, out_w), half-pixel-center convention
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
// transpose of bilinear_resize: scatters dy back to an (in_h, in_w) grid
Tensor bilinear_resize_backward(const Tensor& dy, int in_h, int in_w);

Tensor concat_channels(const std::vector<const Tensor*>& parts);

// He-style fan-in scaled init, seeded
void init_conv_weight(Param& p, int fan_in, std::uint64_t seed);

}  // namespace nn
}  // namespace coarse3d
