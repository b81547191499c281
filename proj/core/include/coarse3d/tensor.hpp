#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <utility>
#include <vector>

namespace coarse3d {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Dense H x W x C map stored as an (H*W) x C matrix, pixel index p = r*W + c.
// Pointwise layers are then plain matrix products.
struct Tensor {
  int h = 0, w = 0, c = 0;
  Mat m;  // (h*w) x c

  Tensor() = default;
  Tensor(int h_, int w_, int c_) : h(h_), w(w_), c(c_), m(Mat::Zero(h_ * w_, c_)) {}
  Tensor(int h_, int w_, int c_, Mat m_) : h(h_), w(w_), c(c_), m(std::move(m_)) {
    assert(m.rows() == h * w && m.cols() == c);
  }

  int pixels() const { return h * w; }
  double& at(int r, int col, int ch) { return m(r * w + col, ch); }
  double at(int r, int col, int ch) const { return m(r * w + col, ch); }
  Eigen::Block<Mat, 1, Eigen::Dynamic> pixel(int r, int col) { return m.row(r * w + col); }
};

}  // namespace coarse3d
