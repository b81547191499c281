#include "coarse3d/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "coarse3d/rng.hpp"

namespace coarse3d::nn {

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

void leaky_relu_forward(Mat& m, double slope) {
  m = m.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

void leaky_relu_backward(Mat& dy, const Mat& y, double slope) {
  dy = dy.cwiseProduct(y.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
}

namespace {

// im2col for a 3x3 same-padding kernel: out is (h*w) x (9*cin)
Mat im2col3x3(const Tensor& x) {
  const int h = x.h, w = x.w, cin = x.c;
  Mat cols = Mat::Zero(h * w, 9 * cin);
  for (int kr = 0; kr < 3; ++kr) {
    for (int kc = 0; kc < 3; ++kc) {
      const int dr = kr - 1, dc = kc - 1;
      const int tap = kr * 3 + kc;
      for (int r = 0; r < h; ++r) {
        const int sr = r + dr;
        if (sr < 0 || sr >= h) continue;
        const int c0 = std::max(0, -dc);
        const int c1 = std::min(w, w - dc);
        if (c1 <= c0) continue;
        cols.block(r * w + c0, tap * cin, c1 - c0, cin) =
            x.m.block(sr * w + c0 + dc, 0, c1 - c0, cin);
      }
    }
  }
  return cols;
}

// transpose of im2col: scatter-add (h*w) x (9*cin) back onto the input grid
Tensor col2im3x3(const Mat& dcols, int h, int w, int cin) {
  Tensor dx(h, w, cin);
  for (int kr = 0; kr < 3; ++kr) {
    for (int kc = 0; kc < 3; ++kc) {
      const int dr = kr - 1, dc = kc - 1;
      const int tap = kr * 3 + kc;
      for (int r = 0; r < h; ++r) {
        const int sr = r + dr;
        if (sr < 0 || sr >= h) continue;
        const int c0 = std::max(0, -dc);
        const int c1 = std::min(w, w - dc);
        if (c1 <= c0) continue;
        dx.m.block(sr * w + c0 + dc, 0, c1 - c0, cin) +=
            dcols.block(r * w + c0, tap * cin, c1 - c0, cin);
      }
    }
  }
  return dx;
}

}  // namespace

Tensor conv3x3_forward(const Tensor& x, const Param& weight, const Param& bias, Mat* cols) {
  if (weight.value.rows() != 9 * x.c) throw std::invalid_argument("conv3x3: weight shape");
  Mat c = im2col3x3(x);
  Tensor y(x.h, x.w, static_cast<int>(weight.value.cols()));
  y.m.noalias() = c * weight.value;
  y.m.rowwise() += bias.value.row(0);
  if (cols) *cols = std::move(c);
  return y;
}

Tensor conv3x3_backward(const Tensor& dy, const Tensor& x, const Mat& cols, Param& weight,
                        Param& bias) {
  weight.grad.noalias() += cols.transpose() * dy.m;
  bias.grad.row(0) += dy.m.colwise().sum();
  Mat dcols = dy.m * weight.value.transpose();
  return col2im3x3(dcols, x.h, x.w, x.c);
}

Tensor linear_forward(const Tensor& x, const Param& weight, const Param& bias) {
  Tensor y(x.h, x.w, static_cast<int>(weight.value.cols()));
  y.m.noalias() = x.m * weight.value;
  y.m.rowwise() += bias.value.row(0);
  return y;
}

Tensor linear_backward(const Tensor& dy, const Tensor& x, Param& weight, Param& bias) {
  weight.grad.noalias() += x.m.transpose() * dy.m;
  bias.grad.row(0) += dy.m.colwise().sum();
  Tensor dx(x.h, x.w, x.c);
  dx.m.noalias() = dy.m * weight.value.transpose();
  return dx;
}

Tensor avgpool2_forward(const Tensor& x) {
  if (x.h % 2 != 0 || x.w % 2 != 0) throw std::invalid_argument("avgpool2: odd spatial size");
  Tensor y(x.h / 2, x.w / 2, x.c);
  for (int r = 0; r < y.h; ++r) {
    for (int c = 0; c < y.w; ++c) {
      y.m.row(r * y.w + c) = 0.25 * (x.m.row((2 * r) * x.w + 2 * c) +
                                     x.m.row((2 * r) * x.w + 2 * c + 1) +
                                     x.m.row((2 * r + 1) * x.w + 2 * c) +
                                     x.m.row((2 * r + 1) * x.w + 2 * c + 1));
    }
  }
  return y;
}

Tensor avgpool2_backward(const Tensor& dy, int h, int w) {
  Tensor dx(h, w, dy.c);
  for (int r = 0; r < dy.h; ++r) {
    for (int c = 0; c < dy.w; ++c) {
      const auto g = 0.25 * dy.m.row(r * dy.w + c);
      dx.m.row((2 * r) * w + 2 * c) = g;
      dx.m.row((2 * r) * w + 2 * c + 1) = g;
      dx.m.row((2 * r + 1) * w + 2 * c) = g;
      dx.m.row((2 * r + 1) * w + 2 * c + 1) = g;
    }
  }
  return dx;
}

namespace {

struct Lerp {
  int i0, i1;
  double w0, w1;
};

Lerp lerp_coeff(int out_i, int out_n, int in_n) {
  if (in_n == out_n) return {out_i, out_i, 1.0, 0.0};
  const double scale = static_cast<double>(in_n) / out_n;
  double src = (out_i + 0.5) * scale - 0.5;
  src = std::max(0.0, std::min(src, static_cast<double>(in_n - 1)));
  const int i0 = static_cast<int>(std::floor(src));
  const int i1 = std::min(i0 + 1, in_n - 1);
  const double w1 = src - i0;
  return {i0, i1, 1.0 - w1, w1};
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
  Tensor y(out_h, out_w, x.c);
  std::vector<Lerp> rows(out_h), cols(out_w);
  for (int r = 0; r < out_h; ++r) rows[r] = lerp_coeff(r, out_h, x.h);
  for (int c = 0; c < out_w; ++c) cols[c] = lerp_coeff(c, out_w, x.w);
  for (int r = 0; r < out_h; ++r) {
    const auto& lr = rows[r];
    for (int c = 0; c < out_w; ++c) {
      const auto& lc = cols[c];
      y.m.row(r * out_w + c) = lr.w0 * lc.w0 * x.m.row(lr.i0 * x.w + lc.i0) +
                               lr.w0 * lc.w1 * x.m.row(lr.i0 * x.w + lc.i1) +
                               lr.w1 * lc.w0 * x.m.row(lr.i1 * x.w + lc.i0) +
                               lr.w1 * lc.w1 * x.m.row(lr.i1 * x.w + lc.i1);
    }
  }
  return y;
}

Tensor bilinear_resize_backward(const Tensor& dy, int in_h, int in_w) {
  Tensor dx(in_h, in_w, dy.c);
  std::vector<Lerp> rows(dy.h), cols(dy.w);
  for (int r = 0; r < dy.h; ++r) rows[r] = lerp_coeff(r, dy.h, in_h);
  for (int c = 0; c < dy.w; ++c) cols[c] = lerp_coeff(c, dy.w, in_w);
  for (int r = 0; r < dy.h; ++r) {
    const auto& lr = rows[r];
    for (int c = 0; c < dy.w; ++c) {
      const auto& lc = cols[c];
      const auto g = dy.m.row(r * dy.w + c);
      dx.m.row(lr.i0 * in_w + lc.i0) += lr.w0 * lc.w0 * g;
      dx.m.row(lr.i0 * in_w + lc.i1) += lr.w0 * lc.w1 * g;
      dx.m.row(lr.i1 * in_w + lc.i0) += lr.w1 * lc.w0 * g;
      dx.m.row(lr.i1 * in_w + lc.i1) += lr.w1 * lc.w1 * g;
    }
  }
  return dx;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: empty");
  int total_c = 0;
  for (auto* p : parts) {
    if (p->h != parts[0]->h || p->w != parts[0]->w)
      throw std::invalid_argument("concat_channels: spatial mismatch");
    total_c += p->c;
  }
  Tensor y(parts[0]->h, parts[0]->w, total_c);
  int off = 0;
  for (auto* p : parts) {
    y.m.middleCols(off, p->c) = p->m;
    off += p->c;
  }
  return y;
}

void init_conv_weight(Param& p, int fan_in, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x11217ULL));
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (Eigen::Index i = 0; i < p.value.rows(); ++i)
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) p.value(i, j) = rng.normal(0.0, std_dev);
}

}  // namespace coarse3d::nn
