#include "coarse3d/backbone.hpp"

#include <stdexcept>

#include "coarse3d/rng.hpp"

namespace coarse3d {

Tensor range_image_to_tensor(const RangeImage& image) {
  Tensor x(image.h, image.w, 5);
  // fixed per-channel scaling keeps activations around unit magnitude
  constexpr double scale[5] = {1.0 / 20.0, 1.0 / 20.0, 1.0 / 20.0, 1.0 / 4.0, 1.0};
  for (int p = 0; p < image.h * image.w; ++p) {
    if (!image.valid[p]) continue;
    for (int k = 0; k < 5; ++k) x.m(p, k) = image.channels[p * 5 + k] * scale[k];
  }
  return x;
}

ToyBackbone::ToyBackbone(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.widths.empty()) throw std::invalid_argument("backbone: need at least one stage");
  const int s_count = stages();
  int cin = cfg.in_channels;
  for (int s = 0; s < s_count; ++s) {
    enc_w_.emplace_back("enc" + std::to_string(s) + ".w", 9 * cin, cfg.widths[s]);
    enc_b_.emplace_back("enc" + std::to_string(s) + ".b", 1, cfg.widths[s]);
    nn::init_conv_weight(enc_w_.back(), 9 * cin, derive_seed(seed, 0xe0c0 + s));
    cin = cfg.widths[s];
  }
  for (int s = s_count - 2; s >= 0; --s) {
    const int in_c = cfg.widths[s + 1] + cfg.widths[s];
    dec_w_.emplace_back("dec" + std::to_string(s) + ".w", 9 * in_c, cfg.widths[s]);
    dec_b_.emplace_back("dec" + std::to_string(s) + ".b", 1, cfg.widths[s]);
    nn::init_conv_weight(dec_w_.back(), 9 * in_c, derive_seed(seed, 0xdec0 + s));
  }
  const int head_c = s_count >= 2 ? cfg.widths[0] : cfg.widths.back();
  cls_w_ = Param("cls.w", head_c, cfg.n_classes);
  cls_b_ = Param("cls.b", 1, cfg.n_classes);
  nn::init_conv_weight(cls_w_, head_c, derive_seed(seed, 0xc125));
}

Tensor ToyBackbone::forward(const RangeImage& image, FeaturePyramid& pyramid, Cache& cache) const {
  if (image.h != cfg_.height || image.w != cfg_.width)
    throw std::invalid_argument("backbone: image shape mismatch with configured H x W");
  const int s_count = stages();
  cache.input = range_image_to_tensor(image);
  cache.enc_in.clear();
  cache.enc_cols.assign(s_count, Mat());
  cache.enc_out.clear();
  cache.dec_in.clear();
  cache.dec_cols.assign(std::max(0, s_count - 1), Mat());
  cache.dec_out.clear();

  Tensor cur = cache.input;
  for (int s = 0; s < s_count; ++s) {
    if (s > 0) cur = nn::avgpool2_forward(cur);
    cache.enc_in.push_back(cur);
    Tensor y = nn::conv3x3_forward(cur, enc_w_[s], enc_b_[s], &cache.enc_cols[s]);
    nn::leaky_relu_forward(y.m, cfg_.leaky_slope);
    cache.enc_out.push_back(y);
    cur = y;
  }
  pyramid.levels = cache.enc_out;

  Tensor dec = cache.enc_out.back();
  for (int i = 0; i < s_count - 1; ++i) {
    const int s = s_count - 2 - i;
    Tensor up = nn::bilinear_resize(dec, cache.enc_out[s].h, cache.enc_out[s].w);
    Tensor cat = nn::concat_channels({&up, &cache.enc_out[s]});
    cache.dec_in.push_back(cat);
    Tensor y = nn::conv3x3_forward(cat, dec_w_[i], dec_b_[i], &cache.dec_cols[i]);
    nn::leaky_relu_forward(y.m, cfg_.leaky_slope);
    cache.dec_out.push_back(y);
    dec = y;
  }

  cache.head_in = dec;
  return nn::linear_forward(dec, cls_w_, cls_b_);
}

void ToyBackbone::backward(const Cache& cache, const Tensor& d_logits,
                           const std::vector<Tensor>& d_pyramid) {
  const int s_count = stages();
  std::vector<Tensor> d_enc(s_count);
  for (int s = 0; s < s_count; ++s) {
    d_enc[s] = Tensor(cache.enc_out[s].h, cache.enc_out[s].w, cache.enc_out[s].c);
    if (s < static_cast<int>(d_pyramid.size()) && d_pyramid[s].m.size() > 0)
      d_enc[s].m += d_pyramid[s].m;
  }

  Tensor d_dec = nn::linear_backward(d_logits, cache.head_in, cls_w_, cls_b_);

  for (int i = s_count - 2; i >= 0; --i) {
    const int s = s_count - 2 - i;
    Tensor g = std::move(d_dec);
    nn::leaky_relu_backward(g.m, cache.dec_out[i].m, cfg_.leaky_slope);
    Tensor d_cat = nn::conv3x3_backward(g, cache.dec_in[i], cache.dec_cols[i], dec_w_[i],
                                        dec_b_[i]);
    const int up_c = (i == 0) ? cfg_.widths[s_count - 1] : cfg_.widths[s + 1];
    Tensor d_up(d_cat.h, d_cat.w, up_c);
    d_up.m = d_cat.m.leftCols(up_c);
    d_enc[s].m += d_cat.m.rightCols(cfg_.widths[s]);
    const Tensor& prev =
        (i == 0) ? cache.enc_out[s_count - 1] : cache.dec_out[i - 1];
    Tensor d_prev = nn::bilinear_resize_backward(d_up, prev.h, prev.w);
    if (i == 0) {
      d_enc[s_count - 1].m += d_prev.m;
      break;
    }
    d_dec = std::move(d_prev);
  }
  if (s_count == 1) {
    // single-stage model: classifier gradient feeds the encoder output directly
    d_enc[0].m += d_dec.m;
  }

  for (int s = s_count - 1; s >= 0; --s) {
    Tensor g = std::move(d_enc[s]);
    nn::leaky_relu_backward(g.m, cache.enc_out[s].m, cfg_.leaky_slope);
    Tensor d_in = nn::conv3x3_backward(g, cache.enc_in[s], cache.enc_cols[s], enc_w_[s],
                                       enc_b_[s]);
    if (s > 0) {
      Tensor d_pooled = nn::avgpool2_backward(d_in, cache.enc_out[s - 1].h,
                                              cache.enc_out[s - 1].w);
      d_enc[s - 1].m += d_pooled.m;
    }
  }
}

std::vector<Param*> ToyBackbone::params() {
  std::vector<Param*> out;
  for (auto& p : enc_w_) out.push_back(&p);
  for (auto& p : enc_b_) out.push_back(&p);
  for (auto& p : dec_w_) out.push_back(&p);
  for (auto& p : dec_b_) out.push_back(&p);
  out.push_back(&cls_w_);
  out.push_back(&cls_b_);
  return out;
}

}  // namespace coarse3d
