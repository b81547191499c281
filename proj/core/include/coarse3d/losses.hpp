#pragma once

#include <vector>

#include "coarse3d/prototype_bank.hpp"
#include "coarse3d/tensor.hpp"

namespace coarse3d {

struct LossWeights {
  double lambda_foc = 1.0;
  double lambda_lov = 1.0;
  double lambda_nce = 0.1;
  double temperature = 0.1;
  double gamma = 2.0;
};

struct LossValue {
  double value = 0.0;
  Mat grad;  // w.r.t. the continuous input (rows match the input)
};

// softmax over each row; grad helpers for composing with the losses below
Mat row_softmax(const Mat& logits);
// Jacobian-vector product of row softmax: dz = f .* (dp - (f . dp))
Mat softmax_backward(const Mat& probs, const Mat& dprobs);

// Pixel-to-prototype InfoNCE: positives are all prototypes of the anchor's
// class, negatives all other classes' prototypes. Gradient flows to the
// anchors only; prototypes are constants here.
LossValue info_nce_pix2proto(const Mat& anchors, const std::vector<int>& anchor_classes,
                             const PrototypeBank& bank, double temperature);

// mean over labelled rows of -w_y (1-f_y)^gamma ln f_y; grad w.r.t. logits
LossValue focal_loss(const Mat& logits, const std::vector<int>& labels,
                     const std::vector<double>& class_weights, double gamma);

// Lovasz-softmax over labelled rows; grad w.r.t. probabilities
LossValue lovasz_softmax(const Mat& probs, const std::vector<int>& labels);

double total_loss(double foc, double lov, double nce, const LossWeights& w);

}  // namespace coarse3d
