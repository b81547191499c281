#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coarse3d/anchor_sampler.hpp"
#include "coarse3d/backbone.hpp"
#include "coarse3d/config.hpp"
#include "coarse3d/dataset.hpp"
#include "coarse3d/embedding_head.hpp"
#include "coarse3d/losses.hpp"
#include "coarse3d/prototype_bank.hpp"
#include "coarse3d/weak_labels.hpp"

namespace coarse3d {

struct EvalReport {
  std::vector<double> iou;          // per class; NaN where absent from ground truth
  double miou = 0.0;                // mean over classes present in ground truth
  std::vector<std::int64_t> confusion;  // K x K row-major, [gt * K + pred]
  std::vector<std::int64_t> missed;     // per gt class, points with no prediction
};

struct StepMetrics {
  double foc = 0.0, lov = 0.0, nce = 0.0, total = 0.0;
  int labelled_pixels = 0;
  int bank_pixels = 0;  // pixels consumed by prototype updates
  int anchors = 0;
  int budget = 0;
};

// argmax over valid pixels, ties to the smallest class id; invalid pixels
// get kUnlabelled
std::vector<int> pseudo_labels(const Mat& logits, const std::vector<std::uint8_t>& valid);

class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  void step(std::vector<Param*>& params);

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

struct Frame {
  PointCloud cloud;
  std::vector<int> dense_labels;
  LabelMask mask;                // subsampled + voxel-propagated, per point
  RangeImage image;
  std::vector<int> pixel_labels;  // per pixel, from the retained point's mask
};

class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& cfg);

  void load_data();
  StepMetrics train_step(const std::vector<int>& frame_ids, int epoch, int step);
  EvalReport evaluate_split(bool validation, bool use_knn) const;
  // full run: trains, periodically evaluates, writes metrics / checkpoint /
  // effective config under out.dir
  void run();

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  const std::vector<Frame>& train_frames() const { return train_frames_; }
  const PrototypeBank& bank() const { return *bank_; }
  ToyBackbone& backbone() { return *backbone_; }
  ProjectionHead& head() { return *head_; }
  int epochs() const { return epochs_; }
  int warmup_epochs() const { return warmup_; }
  int batch_size() const { return batch_size_; }
  const std::vector<double>& focal_class_weights() const { return focal_w_; }

 private:
  Frame prepare_frame(const LabelledScene& scene, std::uint64_t frame_seed) const;
  Frame augment_frame(const Frame& frame, std::uint64_t seed) const;
  EvalReport evaluate_frames(const std::vector<Frame>& frames, bool use_knn) const;

  ExperimentConfig cfg_;
  ProjectionConfig proj_;
  int n_classes_ = 0;
  int epochs_ = 0, warmup_ = 0, batch_size_ = 1;
  std::uint64_t seed_ = 0;
  LossWeights loss_w_;
  double voxel_size_ = 0.06, ratio_ = 0.001;
  int sinkhorn_iters_ = 3;
  double sinkhorn_eps_ = 0.05, gumbel_tau_ = 0.5;
  std::string anchor_strategy_ = "entropy_prob";
  bool soft_assign_ = false;
  bool augment_ = true;

  std::optional<ToyBackbone> backbone_;
  std::optional<ProjectionHead> head_;
  std::optional<PrototypeBank> bank_;
  std::optional<AdamW> optim_;
  std::vector<double> focal_w_;
  std::vector<Frame> train_frames_, val_frames_;
};

}  // namespace coarse3d
