#include <benchmark/benchmark.h>

#include "coarse3d/backbone.hpp"
#include "coarse3d/pointcloud.hpp"
#include "coarse3d/prototype_bank.hpp"
#include "coarse3d/rng.hpp"
#include "coarse3d/synthetic.hpp"

using namespace coarse3d;

namespace {

Mat unit_rows(int n, int d, std::uint64_t seed) {
  Mat m(n, d);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
    m.row(i).normalize();
  }
  return m;
}

void bm_spherical_project(benchmark::State& state) {
  SceneSpec spec;
  spec.seed = 1;
  spec.min_points_per_class = 2000;
  spec.max_points_per_class = 2000;
  const LabelledScene scene = generate_scene(spec);
  const ProjectionConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(spherical_project(scene.cloud, cfg));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(scene.cloud.size()));
}
BENCHMARK(bm_spherical_project);

void bm_sinkhorn(benchmark::State& state) {
  const int n_k = static_cast<int>(state.range(0));
  const Mat cost = cost_matrix(unit_rows(n_k, 64, 2), unit_rows(20, 64, 3));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sinkhorn_assign(cost, 3, 0.05));
  }
}
BENCHMARK(bm_sinkhorn)->Arg(64)->Arg(512)->Arg(4096);

void bm_prototype_update(benchmark::State& state) {
  PrototypeBank bank(5, 20, 64);
  bank.random_init(4);
  const Mat e = unit_rows(256, 64, 5);
  std::vector<int> assign(256);
  for (std::size_t i = 0; i < assign.size(); ++i) assign[i] = static_cast<int>(i % 20);
  for (auto _ : state) {
    bank.update(0, e, assign);
  }
}
BENCHMARK(bm_prototype_update);

void bm_backbone_forward(benchmark::State& state) {
  BackboneConfig cfg;
  cfg.height = 32;
  cfg.width = 128;
  cfg.widths = {8, 16, 24};
  ToyBackbone net(cfg, 6);
  RangeImage img(cfg.height, cfg.width);
  Rng rng(7);
  for (int p = 0; p < cfg.height * cfg.width; ++p) {
    img.valid[p] = 1;
    for (int c = 0; c < 5; ++c)
      img.channels[p * 5 + c] = static_cast<float>(rng.uniform(0.0, 10.0));
  }
  for (auto _ : state) {
    FeaturePyramid pyr;
    ToyBackbone::Cache cache;
    benchmark::DoNotOptimize(net.forward(img, pyr, cache));
  }
}
BENCHMARK(bm_backbone_forward);

}  // namespace

BENCHMARK_MAIN();
