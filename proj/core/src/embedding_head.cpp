#include "coarse3d/embedding_head.hpp"

#include <numeric>
#include <stdexcept>

#include "coarse3d/rng.hpp"

namespace coarse3d {

namespace {
constexpr double kNormFloor = 1e-12;
}

ProjectionHead::ProjectionHead(const HeadConfig& cfg, const std::vector<int>& level_channels,
                               std::uint64_t seed)
    : cfg_(cfg), level_channels_(level_channels) {
  const int total_c = std::accumulate(level_channels.begin(), level_channels.end(), 0);
  if (total_c <= 0) throw std::invalid_argument("projection head: empty pyramid contract");
  w1_ = Param("head.w1", total_c, cfg.embed_dim);
  b1_ = Param("head.b1", 1, cfg.embed_dim);
  w2_ = Param("head.w2", cfg.embed_dim, cfg.embed_dim);
  b2_ = Param("head.b2", 1, cfg.embed_dim);
  nn::init_conv_weight(w1_, total_c, derive_seed(seed, 0xead1));
  nn::init_conv_weight(w2_, cfg.embed_dim, derive_seed(seed, 0xead2));
}

Tensor ProjectionHead::forward(const FeaturePyramid& pyramid, Cache& cache) const {
  if (pyramid.levels.empty()) throw std::invalid_argument("projection head: empty pyramid");
  const int h = pyramid.levels[0].h, w = pyramid.levels[0].w;
  cache.level_h.clear();
  cache.level_w.clear();
  std::vector<Tensor> resized;
  resized.reserve(pyramid.levels.size());
  for (const auto& level : pyramid.levels) {
    cache.level_h.push_back(level.h);
    cache.level_w.push_back(level.w);
    resized.push_back(level.h == h && level.w == w ? level : nn::bilinear_resize(level, h, w));
  }
  std::vector<const Tensor*> parts;
  for (const auto& t : resized) parts.push_back(&t);
  cache.concat = nn::concat_channels(parts);

  Tensor hidden = nn::linear_forward(cache.concat, w1_, b1_);
  nn::leaky_relu_forward(hidden.m, cfg_.leaky_slope);
  cache.hidden = hidden;
  cache.pre_norm = nn::linear_forward(hidden, w2_, b2_);

  cache.norms = cache.pre_norm.m.rowwise().norm().cwiseMax(kNormFloor);
  Tensor out = cache.pre_norm;
  out.m.array().colwise() /= cache.norms.array();
  return out;
}

std::vector<Tensor> ProjectionHead::backward(const Cache& cache, const Tensor& d_embed) {
  // normalization backward: project out the radial component, divide by norm
  Tensor d_pre = d_embed;
  for (Eigen::Index p = 0; p < d_pre.m.rows(); ++p) {
    const double n = cache.norms(p);
    const auto e = cache.pre_norm.m.row(p) / n;
    d_pre.m.row(p) = (d_embed.m.row(p) - e * e.dot(d_embed.m.row(p))) / n;
  }

  Tensor d_hidden = nn::linear_backward(d_pre, cache.hidden, w2_, b2_);
  nn::leaky_relu_backward(d_hidden.m, cache.hidden.m, cfg_.leaky_slope);
  Tensor d_concat = nn::linear_backward(d_hidden, cache.concat, w1_, b1_);

  std::vector<Tensor> d_levels;
  int off = 0;
  for (std::size_t s = 0; s < level_channels_.size(); ++s) {
    const int c = level_channels_[s];
    Tensor slice(d_concat.h, d_concat.w, c);
    slice.m = d_concat.m.middleCols(off, c);
    off += c;
    if (cache.level_h[s] == d_concat.h && cache.level_w[s] == d_concat.w)
      d_levels.push_back(std::move(slice));
    else
      d_levels.push_back(nn::bilinear_resize_backward(slice, cache.level_h[s], cache.level_w[s]));
  }
  return d_levels;
}

std::vector<Param*> ProjectionHead::params() {
  // with use_bias off the biases stay zero and are excluded from optimization
  if (!cfg_.use_bias) return {&w1_, &w2_};
  return {&w1_, &b1_, &w2_, &b2_};
}

}  // namespace coarse3d
