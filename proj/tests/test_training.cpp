#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "coarse3d/dataset.hpp"
#include "coarse3d/rng.hpp"
#include "coarse3d/synthetic.hpp"
#include "coarse3d/trainer.hpp"

namespace fs = std::filesystem;
using namespace coarse3d;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// a tiny dataset + config sized for unit-test turnaround
ExperimentConfig tiny_config(const fs::path& data_dir, const fs::path& out_dir) {
  ExperimentConfig cfg;
  cfg.set("data.train", data_dir.string());
  cfg.set("data.val", data_dir.string());
  cfg.set("out.dir", out_dir.string());
  cfg.set("n_classes", "3");
  cfg.set("proj.height", "16");
  cfg.set("proj.width", "64");
  cfg.set("proj.fov_up", "15");
  cfg.set("proj.fov_down", "-15");
  cfg.set("backbone.widths", "4,6");
  cfg.set("head.dim", "8");
  cfg.set("bank.n_protos", "3");
  cfg.set("train.epochs", "8");
  cfg.set("train.warmup_epochs", "2");
  cfg.set("train.batch_size", "2");
  cfg.set("train.seed", "3");
  cfg.set("train.annotation_ratio", "0.05");
  cfg.set("train.eval_every", "4");
  return cfg;
}

void write_tiny_dataset(const fs::path& dir, int scenes, std::uint64_t seed) {
  SceneSpec spec;
  spec.n_classes = 3;
  spec.min_points_per_class = 60;
  spec.max_points_per_class = 120;
  spec.sensor_height = 0.0;
  spec.ground_radius_min = 3.0;
  spec.ground_radius_max = 12.0;
  spec.noise_sigma = 0.01;
  std::vector<LabelledScene> out;
  for (int i = 0; i < scenes; ++i) {
    spec.seed = derive_seed(seed, 0xdd, i);
    out.push_back(generate_scene(spec));
  }
  export_scenes(dir.string(), out);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pseudo labels: argmax, smallest-id ties, invalid pixels") {
  Mat logits(3, 3);
  logits << 0, 2, 1, 5, 5, 1, 0, 0, 9;
  const std::vector<std::uint8_t> valid = {1, 1, 0};
  const auto out = pseudo_labels(logits, valid);
  CHECK(out == std::vector<int>{1, 0, kUnlabelled});
  CHECK_THROWS_AS(pseudo_labels(logits, {1, 1}), std::invalid_argument);
}

TEST_CASE("dataset export and reload round trip") {
  TempDir dir("c3d_ds_roundtrip");
  write_tiny_dataset(dir.path, 2, 5);
  Dataset ds = Dataset::open(dir.path.string(), identity_remap(3));
  REQUIRE(ds.size() == 2);
  SceneSpec spec;
  spec.n_classes = 3;
  spec.min_points_per_class = 60;
  spec.max_points_per_class = 120;
  spec.sensor_height = 0.0;
  spec.ground_radius_min = 3.0;
  spec.ground_radius_max = 12.0;
  spec.noise_sigma = 0.01;
  spec.seed = derive_seed(5, 0xdd, 0);
  const LabelledScene orig = generate_scene(spec);
  const LabelledScene back = ds.load(0);
  REQUIRE(back.cloud.size() == orig.cloud.size());
  CHECK(back.labels == orig.labels);
  for (std::size_t i = 0; i < orig.cloud.size(); ++i)
    CHECK(back.cloud.xs[i] == orig.cloud.xs[i]);
}

TEST_CASE("training is deterministic: identical seeds give identical step traces") {
  TempDir data("c3d_train_det_data");
  TempDir out_a("c3d_train_det_a");
  TempDir out_b("c3d_train_det_b");
  write_tiny_dataset(data.path, 4, 9);
  const ExperimentConfig cfg = tiny_config(data.path, out_a.path);

  Trainer a(cfg), b(cfg);
  a.load_data();
  b.load_data();
  for (int epoch = 0; epoch < 4; ++epoch) {
    const StepMetrics ma = a.train_step({0, 1}, epoch, 0);
    const StepMetrics mb = b.train_step({0, 1}, epoch, 0);
    CHECK(ma.total == mb.total);
    CHECK(ma.foc == mb.foc);
    CHECK(ma.nce == mb.nce);
    CHECK(ma.anchors == mb.anchors);
  }
}

TEST_CASE("warm-up isolation: lambda_nce has no effect before the contrastive epoch") {
  TempDir data("c3d_warmup_data");
  TempDir out("c3d_warmup_out");
  write_tiny_dataset(data.path, 2, 11);
  ExperimentConfig with = tiny_config(data.path, out.path);
  ExperimentConfig without = with;
  without.set("loss.lambda_nce", "0");

  Trainer a(with), b(without);
  a.load_data();
  b.load_data();
  for (int epoch = 0; epoch < 2; ++epoch) {  // warmup = 2
    const StepMetrics ma = a.train_step({0, 1}, epoch, 0);
    const StepMetrics mb = b.train_step({0, 1}, epoch, 0);
    CHECK(ma.nce == 0.0);
    CHECK(ma.anchors == 0);
    CHECK(ma.foc == mb.foc);
    CHECK(ma.lov == mb.lov);
    CHECK(ma.total == doctest::Approx(mb.total));
  }
  // parameter trajectories stayed identical through warm-up
  auto pa = a.backbone().params();
  auto pb = b.backbone().params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK((pa[i]->value - pb[i]->value).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bank updates consume only truly labelled pixels") {
  TempDir data("c3d_bank_data");
  TempDir out("c3d_bank_out");
  write_tiny_dataset(data.path, 2, 13);
  ExperimentConfig cfg = tiny_config(data.path, out.path);
  Trainer t(cfg);
  t.load_data();
  for (int epoch = 0; epoch < 4; ++epoch) {
    int labelled = 0;
    for (const Frame& f : t.train_frames())
      for (std::size_t p = 0; p < f.pixel_labels.size(); ++p)
        if (f.image.valid[p] && f.pixel_labels[p] >= 0) ++labelled;
    const StepMetrics m = t.train_step({0, 1}, epoch, 0);
    // augmentation permutes pixels, so the per-frame labelled count is
    // preserved; the bank never sees more pixels than carry labels
    CHECK(m.labelled_pixels == labelled);
    CHECK(m.bank_pixels == m.labelled_pixels);
  }
}

TEST_CASE("augmentation consistency: losses are invariant when logits and labels move together") {
  TempDir data("c3d_aug_data");
  TempDir out("c3d_aug_out");
  write_tiny_dataset(data.path, 1, 17);
  ExperimentConfig cfg = tiny_config(data.path, out.path);
  Trainer t(cfg);
  t.load_data();
  const Frame& f = t.train_frames()[0];
  const int h = 16, w = 64;

  Rng rng(99);
  Mat logits(h * w, 3);
  for (int p = 0; p < h * w; ++p)
    for (int k = 0; k < 3; ++k) logits(p, k) = rng.normal();
  std::vector<int> labels(f.pixel_labels.begin(), f.pixel_labels.end());

  // flip + circular column shift applied to logits and labels identically
  const int shift = 13;
  Mat moved(h * w, 3);
  std::vector<int> moved_labels(h * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int src = ((w - 1 - c) + shift) % w;
      moved.row(r * w + c) = logits.row(r * w + src);
      moved_labels[r * w + c] = labels[r * w + src];
    }

  const std::vector<double> wts(3, 1.0);
  CHECK(focal_loss(moved, moved_labels, wts, 2.0).value ==
        doctest::Approx(focal_loss(logits, labels, wts, 2.0).value));
  CHECK(lovasz_softmax(row_softmax(moved), moved_labels).value ==
        doctest::Approx(lovasz_softmax(row_softmax(logits), labels).value));
}

TEST_CASE("run() writes config echo, metrics, checkpoint, and final report") {
  TempDir data("c3d_run_data");
  TempDir out("c3d_run_out");
  write_tiny_dataset(data.path, 2, 19);
  ExperimentConfig cfg = tiny_config(data.path, out.path);
  cfg.set("train.epochs", "4");
  cfg.set("train.eval_every", "2");
  Trainer t(cfg);
  t.load_data();
  t.run();

  CHECK(fs::exists(out.path / "config.txt"));
  CHECK(fs::exists(out.path / "checkpoint.bin"));
  CHECK(fs::exists(out.path / "final_report.txt"));
  const std::string metrics = slurp(out.path / "metrics.txt");
  CHECK(metrics.find("train,1,") != std::string::npos);
  CHECK(metrics.find("train,4,") != std::string::npos);
  CHECK(metrics.find("val,2,") != std::string::npos);
  CHECK(metrics.find("val,4,") != std::string::npos);
  const std::string echoed = slurp(out.path / "config.txt");
  CHECK(echoed.find("train.epochs = 4") != std::string::npos);
}

TEST_CASE("rerunning the same config and seed is byte-identical") {
  TempDir data("c3d_rerun_data");
  TempDir out_a("c3d_rerun_a");
  TempDir out_b("c3d_rerun_b");
  write_tiny_dataset(data.path, 3, 23);
  ExperimentConfig cfg_a = tiny_config(data.path, out_a.path);
  cfg_a.set("train.epochs", "4");
  ExperimentConfig cfg_b = cfg_a;
  cfg_b.set("out.dir", out_b.path.string());

  Trainer a(cfg_a);
  a.load_data();
  a.run();
  Trainer b(cfg_b);
  b.load_data();
  b.run();
  CHECK(slurp(out_a.path / "metrics.txt") == slurp(out_b.path / "metrics.txt"));
  CHECK(slurp(out_a.path / "checkpoint.bin") == slurp(out_b.path / "checkpoint.bin"));
}

TEST_CASE("epochs=0 evaluates the freshly initialized model") {
  TempDir data("c3d_zero_data");
  TempDir out("c3d_zero_out");
  write_tiny_dataset(data.path, 2, 29);
  ExperimentConfig cfg = tiny_config(data.path, out.path);
  cfg.set("train.epochs", "0");
  cfg.set("train.warmup_epochs", "0");
  Trainer t(cfg);
  t.load_data();
  t.run();
  const std::string metrics = slurp(out.path / "metrics.txt");
  CHECK(metrics.find("val,0,") != std::string::npos);
}

TEST_CASE("checkpoint round trip restores parameters and the bank") {
  TempDir data("c3d_ckpt_data");
  TempDir out("c3d_ckpt_out");
  write_tiny_dataset(data.path, 2, 31);
  ExperimentConfig cfg = tiny_config(data.path, out.path);
  Trainer t(cfg);
  t.load_data();
  for (int epoch = 0; epoch < 3; ++epoch) t.train_step({0, 1}, epoch, 0);
  const fs::path ckpt = out.path / "ckpt.bin";
  t.save_checkpoint(ckpt.string());

  Trainer fresh(cfg);
  fresh.load_data();
  fresh.load_checkpoint(ckpt.string());
  auto pa = t.backbone().params();
  auto pb = fresh.backbone().params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK((pa[i]->value - pb[i]->value).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < 3; ++k) {
    CHECK(fresh.bank().initialized(k) == t.bank().initialized(k));
    if (t.bank().initialized(k))
      CHECK((fresh.bank().prototypes(k) - t.bank().prototypes(k)).cwiseAbs().maxCoeff() < 1e-6);
  }

  // evaluation after reload matches the source trainer bit for bit
  const EvalReport ra = t.evaluate_split(true, false);
  const EvalReport rb = fresh.evaluate_split(true, false);
  CHECK(ra.miou == rb.miou);

  // corrupted magic is refused
  std::ofstream(ckpt, std::ios::binary) << "BADMAGIC rest";
  CHECK_THROWS_AS(fresh.load_checkpoint(ckpt.string()), std::runtime_error);
}

TEST_CASE("evaluation IoU arithmetic on a synthetic confusion case") {
  // exercised through the public report: perfect predictions give mIoU 1
  TempDir data("c3d_eval_data");
  TempDir out("c3d_eval_out");
  write_tiny_dataset(data.path, 1, 37);
  ExperimentConfig cfg = tiny_config(data.path, out.path);
  Trainer t(cfg);
  t.load_data();
  const EvalReport r = t.evaluate_split(true, false);
  // an untrained model still produces a well-formed report
  CHECK(r.confusion.size() == 9);
  CHECK(r.miou >= 0.0);
  CHECK(r.miou <= 1.0);
  std::int64_t counted = r.missed[0] + r.missed[1] + r.missed[2];
  for (auto v : r.confusion) counted += v;
  CHECK(counted == static_cast<std::int64_t>(t.train_frames()[0].cloud.size()));
}

TEST_CASE("soft assignment and random bank init run end to end") {
  TempDir data("c3d_soft_data");
  TempDir out("c3d_soft_out");
  write_tiny_dataset(data.path, 2, 41);
  ExperimentConfig cfg = tiny_config(data.path, out.path);
  cfg.set("bank.soft_assign", "1");
  cfg.set("bank.init", "random");
  Trainer t(cfg);
  t.load_data();
  for (int k = 0; k < 3; ++k) CHECK(t.bank().initialized(k));
  const StepMetrics m = t.train_step({0, 1}, 3, 0);
  CHECK(std::isfinite(m.total));
  CHECK(m.anchors > 0);
}

TEST_CASE("anchor strategies are all accepted; unknown ones are rejected") {
  TempDir data("c3d_strat_data");
  TempDir out("c3d_strat_out");
  write_tiny_dataset(data.path, 1, 43);
  for (const std::string strategy : {"entropy_prob", "softmax_prob", "all"}) {
    ExperimentConfig cfg = tiny_config(data.path, out.path);
    cfg.set("anchor.strategy", strategy);
    Trainer t(cfg);
    t.load_data();
    const StepMetrics m = t.train_step({0}, 3, 0);
    CHECK(std::isfinite(m.total));
    if (strategy == "all") CHECK(m.anchors > 1);
  }
  ExperimentConfig bad = tiny_config(data.path, out.path);
  bad.set("anchor.strategy", "nope");
  Trainer t(bad);
  t.load_data();
  CHECK_THROWS_AS(t.train_step({0}, 3, 0), std::runtime_error);
}
