#include <doctest.h>

#include <functional>
#include <stdexcept>

#include "coarse3d/backbone.hpp"
#include "coarse3d/embedding_head.hpp"
#include "coarse3d/nn.hpp"
#include "coarse3d/rng.hpp"

using namespace coarse3d;

namespace {

Tensor random_tensor(int h, int w, int c, std::uint64_t seed) {
  Tensor t{h, w, c, Mat(h * w, c)};
  Rng rng(seed);
  for (int i = 0; i < t.m.rows(); ++i)
    for (int j = 0; j < c; ++j) t.m(i, j) = rng.normal() * 0.5;
  return t;
}

// central finite differences of a scalar functional against an analytic grad
void check_grad(Mat& x, const Mat& analytic, const std::function<double()>& f,
                double h = 1e-6, double tol = 1e-5) {
  REQUIRE(analytic.rows() == x.rows());
  REQUIRE(analytic.cols() == x.cols());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + h;
      const double up = f();
      x(i, j) = keep - h;
      const double dn = f();
      x(i, j) = keep;
      const double fd = (up - dn) / (2 * h);
      CHECK(analytic(i, j) == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
}

double weighted_sum(const Mat& y, const Mat& w) { return (y.array() * w.array()).sum(); }

Mat random_weights(int rows, int cols, std::uint64_t seed) {
  Mat w(rows, cols);
  Rng rng(seed);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) w(i, j) = rng.normal();
  return w;
}

}  // namespace

TEST_CASE("conv3x3 matches a hand-rolled stencil on a delta image") {
  Tensor x{3, 3, 1, Mat::Zero(9, 1)};
  x.m(4, 0) = 1.0;  // center pixel
  Param w("w", 9, 1), b("b", 1, 1);
  for (int k = 0; k < 9; ++k) w.value(k, 0) = k + 1;
  const Tensor y = nn::conv3x3_forward(x, w, b, nullptr);
  // output at pixel p sees the delta through the tap whose offset matches
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const int dr = 1 - (r - 1), dc = 1 - (c - 1);  // kernel tap hit by the center delta
      CHECK(y.m(r * 3 + c, 0) == doctest::Approx(w.value((dr * 3 + dc), 0)));
    }
}

TEST_CASE("conv3x3 backward passes a finite-difference check") {
  Tensor x = random_tensor(4, 4, 2, 11);
  Param w("w", 18, 3), b("b", 1, 3);
  w.value = random_weights(18, 3, 12);
  b.value = random_weights(1, 3, 13);
  const Mat probe = random_weights(16, 3, 14);

  auto loss = [&] {
    return weighted_sum(nn::conv3x3_forward(x, w, b, nullptr).m, probe);
  };

  Mat cols;
  const Tensor y = nn::conv3x3_forward(x, w, b, &cols);
  Tensor dy{y.h, y.w, y.c, probe};
  const Tensor dx = nn::conv3x3_backward(dy, x, cols, w, b);

  check_grad(x.m, dx.m, loss);
  check_grad(w.value, w.grad, loss);
  check_grad(b.value, b.grad, loss);
}

TEST_CASE("linear (1x1) backward passes a finite-difference check") {
  Tensor x = random_tensor(2, 3, 4, 21);
  Param w("w", 4, 2), b("b", 1, 2);
  w.value = random_weights(4, 2, 22);
  const Mat probe = random_weights(6, 2, 23);

  auto loss = [&] { return weighted_sum(nn::linear_forward(x, w, b).m, probe); };

  const Tensor y = nn::linear_forward(x, w, b);
  Tensor dy{y.h, y.w, y.c, probe};
  const Tensor dx = nn::linear_backward(dy, x, w, b);

  check_grad(x.m, dx.m, loss);
  check_grad(w.value, w.grad, loss);
  check_grad(b.value, b.grad, loss);
}

TEST_CASE("avgpool2 halves each dimension and backward spreads evenly") {
  Tensor x = random_tensor(4, 6, 2, 31);
  const Tensor y = nn::avgpool2_forward(x);
  CHECK(y.h == 2);
  CHECK(y.w == 3);
  CHECK(y.m(0, 0) ==
        doctest::Approx(0.25 * (x.m(0, 0) + x.m(1, 0) + x.m(6, 0) + x.m(7, 0))));

  const Mat probe = random_weights(6, 2, 32);
  auto loss = [&] { return weighted_sum(nn::avgpool2_forward(x).m, probe); };
  Tensor dy{2, 3, 2, probe};
  Tensor dx = nn::avgpool2_backward(dy, 4, 6);
  check_grad(x.m, dx.m, loss);
}

TEST_CASE("bilinear resize is identity at equal sizes and exact on linear ramps") {
  Tensor x = random_tensor(3, 5, 2, 41);
  const Tensor same = nn::bilinear_resize(x, 3, 5);
  CHECK((same.m - x.m).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // a ramp f(r, c) = c is reproduced exactly away from the clamped borders
  Tensor ramp{2, 4, 1, Mat(8, 1)};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) ramp.m(r * 4 + c, 0) = c;
  const Tensor up = nn::bilinear_resize(ramp, 2, 8);
  // half-pixel centers: out col 2 sits at in coord (2.5)/2 - 0.5 = 0.75
  CHECK(up.m(0 * 8 + 2, 0) == doctest::Approx(0.75));
  CHECK(up.m(0 * 8 + 5, 0) == doctest::Approx(2.25));
}

TEST_CASE("bilinear resize backward is the transpose of the forward map") {
  Tensor x = random_tensor(2, 3, 2, 51);
  const Mat probe = random_weights(4 * 7, 2, 52);
  auto loss = [&] { return weighted_sum(nn::bilinear_resize(x, 4, 7).m, probe); };
  Tensor dy{4, 7, 2, probe};
  Tensor dx = nn::bilinear_resize_backward(dy, 2, 3);
  check_grad(x.m, dx.m, loss);
}

TEST_CASE("backbone forward shapes and pyramid sizes") {
  BackboneConfig cfg;
  cfg.height = 8;
  cfg.width = 16;
  cfg.n_classes = 4;
  cfg.widths = {4, 6, 8};
  ToyBackbone net(cfg, 3);

  RangeImage img(8, 16);
  for (int p = 0; p < 128; ++p) {
    img.valid[p] = 1;
    img.channels[p * 5 + 0] = 5.0f;
  }
  FeaturePyramid pyr;
  ToyBackbone::Cache cache;
  const Tensor logits = net.forward(img, pyr, cache);
  CHECK(logits.h == 8);
  CHECK(logits.w == 16);
  CHECK(logits.c == 4);
  REQUIRE(pyr.levels.size() == 3);
  CHECK(pyr.levels[0].h == 8);
  CHECK(pyr.levels[0].c == 4);
  CHECK(pyr.levels[1].h == 4);
  CHECK(pyr.levels[2].h == 2);
  CHECK(pyr.levels[2].w == 4);
  CHECK(pyr.levels[2].c == 8);
}

TEST_CASE("backbone backward passes a finite-difference check on every parameter") {
  BackboneConfig cfg;
  cfg.height = 4;
  cfg.width = 8;
  cfg.n_classes = 3;
  cfg.widths = {3, 4};
  ToyBackbone net(cfg, 5);

  RangeImage img(4, 8);
  Rng rng(6);
  for (int p = 0; p < 32; ++p) {
    img.valid[p] = rng.uniform() < 0.8 ? 1 : 0;
    for (int c = 0; c < 5; ++c)
      img.channels[p * 5 + c] = static_cast<float>(rng.uniform(0.0, 10.0));
  }
  const Mat probe = random_weights(32, 3, 7);

  auto loss = [&] {
    FeaturePyramid pyr;
    ToyBackbone::Cache cache;
    return weighted_sum(net.forward(img, pyr, cache).m, probe);
  };

  FeaturePyramid pyr;
  ToyBackbone::Cache cache;
  const Tensor logits = net.forward(img, pyr, cache);
  for (Param* p : net.params()) p->zero_grad();
  Tensor d_logits{4, 8, 3, probe};
  net.backward(cache, d_logits, std::vector<Tensor>(net.stages()));

  for (Param* p : net.params()) check_grad(p->value, p->grad, loss, 1e-5, 1e-4);
}

TEST_CASE("projection head emits unit-norm embeddings") {
  HeadConfig hcfg;
  hcfg.embed_dim = 8;
  ProjectionHead head(hcfg, {3, 5}, 9);

  FeaturePyramid pyr;
  pyr.levels.push_back(random_tensor(4, 6, 3, 61));
  pyr.levels.push_back(random_tensor(2, 3, 5, 62));
  ProjectionHead::Cache cache;
  const Tensor e = head.forward(pyr, cache);
  CHECK(e.h == 4);
  CHECK(e.w == 6);
  CHECK(e.c == 8);
  for (int p = 0; p < e.m.rows(); ++p)
    CHECK(e.m.row(p).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("head backward: parameters, pyramid inputs, and the tangent property") {
  HeadConfig hcfg;
  hcfg.embed_dim = 5;
  ProjectionHead head(hcfg, {2, 3}, 10);

  FeaturePyramid pyr;
  pyr.levels.push_back(random_tensor(2, 4, 2, 71));
  pyr.levels.push_back(random_tensor(1, 2, 3, 72));
  const Mat probe = random_weights(8, 5, 73);

  auto loss = [&] {
    ProjectionHead::Cache cache;
    return weighted_sum(head.forward(pyr, cache).m, probe);
  };

  ProjectionHead::Cache cache;
  const Tensor e = head.forward(pyr, cache);
  for (Param* p : head.params()) p->zero_grad();
  Tensor d_embed{e.h, e.w, e.c, probe};
  const std::vector<Tensor> d_pyr = head.backward(cache, d_embed);

  for (Param* p : head.params()) check_grad(p->value, p->grad, loss, 1e-6, 1e-4);
  REQUIRE(d_pyr.size() == 2);
  for (std::size_t lv = 0; lv < 2; ++lv)
    check_grad(pyr.levels[lv].m, d_pyr[lv].m, loss, 1e-6, 1e-4);
}

TEST_CASE("normalized output matches the pre-normalization direction") {
  HeadConfig hcfg;
  hcfg.embed_dim = 6;
  ProjectionHead head(hcfg, {3}, 12);
  FeaturePyramid pyr;
  pyr.levels.push_back(random_tensor(2, 2, 3, 81));

  ProjectionHead::Cache cache;
  const Tensor e = head.forward(pyr, cache);
  for (int p = 0; p < 4; ++p) {
    const Vec dir = cache.pre_norm.m.row(p).normalized();
    CHECK((dir.transpose() - e.m.row(p)).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("disabling the head bias removes it from the parameter list") {
  HeadConfig with;
  with.embed_dim = 4;
  HeadConfig without = with;
  without.use_bias = false;
  ProjectionHead a(with, {2}, 1), b(without, {2}, 1);
  CHECK(a.params().size() == 4);
  CHECK(b.params().size() == 2);
}
