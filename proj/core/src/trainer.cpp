#include "coarse3d/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "coarse3d/rng.hpp"

namespace fs = std::filesystem;

namespace coarse3d {

namespace {

// fixed stream tags for derived seeds
enum : std::uint64_t {
  kSeedSubsample = 0x51,
  kSeedVoxel = 0x52,
  kSeedAugment = 0x53,
  kSeedShuffle = 0x54,
  kSeedGumbel = 0x55,
  kSeedAnchors = 0x56,
  kSeedModel = 0x57,
};

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

}  // namespace

std::vector<int> pseudo_labels(const Mat& logits, const std::vector<std::uint8_t>& valid) {
  if (logits.rows() != static_cast<Eigen::Index>(valid.size()))
    throw std::invalid_argument("pseudo_labels: shape mismatch");
  std::vector<int> out(valid.size(), kUnlabelled);
  for (Eigen::Index p = 0; p < logits.rows(); ++p) {
    if (!valid[p]) continue;
    int best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k)
      if (logits(p, k) > logits(p, best)) best = static_cast<int>(k);
    out[p] = best;
  }
  return out;
}

AdamW::AdamW(double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(std::vector<Param*>& params) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    const Mat mhat = m_[i] / bc1;
    const Mat vhat = v_[i] / bc2;
    p.value -= lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    p.value *= (1.0 - lr_ * wd_);  // decoupled weight decay
  }
}

Trainer::Trainer(const ExperimentConfig& cfg) : cfg_(cfg) {
  n_classes_ = cfg.get_int("n_classes");
  proj_.height = cfg.get_int("proj.height");
  proj_.width = cfg.get_int("proj.width");
  proj_.fov_up_deg = cfg.get_double("proj.fov_up");
  proj_.fov_down_deg = cfg.get_double("proj.fov_down");
  epochs_ = cfg.get_int("train.epochs");
  warmup_ = cfg.get_int("train.warmup_epochs");
  if (epochs_ > 0 && warmup_ >= epochs_)
    throw std::runtime_error("train.warmup_epochs must be < train.epochs");
  batch_size_ = std::max(1, cfg.get_int("train.batch_size"));
  seed_ = cfg.get_seed("train.seed");
  loss_w_.lambda_foc = cfg.get_double("loss.lambda_foc");
  loss_w_.lambda_lov = cfg.get_double("loss.lambda_lov");
  loss_w_.lambda_nce = cfg.get_double("loss.lambda_nce");
  loss_w_.temperature = cfg.get_double("loss.temperature");
  loss_w_.gamma = cfg.get_double("loss.gamma");
  voxel_size_ = cfg.get_double("train.voxel_size");
  ratio_ = cfg.get_double("train.annotation_ratio");
  sinkhorn_iters_ = cfg.get_int("sinkhorn.iterations");
  sinkhorn_eps_ = cfg.get_double("sinkhorn.epsilon");
  gumbel_tau_ = cfg.get_double("gumbel.tau");
  anchor_strategy_ = cfg.get("anchor.strategy");
  soft_assign_ = cfg.get_bool("bank.soft_assign");
  augment_ = cfg.get_bool("train.augment");

  if (cfg.get("backbone") != "toy")
    throw std::runtime_error("unknown backbone: " + cfg.get("backbone"));
  BackboneConfig bcfg;
  bcfg.height = proj_.height;
  bcfg.width = proj_.width;
  bcfg.n_classes = n_classes_;
  bcfg.widths = cfg.get_int_list("backbone.widths");
  bcfg.leaky_slope = cfg.get_double("backbone.leaky_slope");
  backbone_.emplace(bcfg, derive_seed(seed_, kSeedModel, 1));

  HeadConfig hcfg;
  hcfg.embed_dim = cfg.get_int("head.dim");
  hcfg.leaky_slope = cfg.get_double("head.leaky_slope");
  hcfg.use_bias = cfg.get_bool("head.bias");
  head_.emplace(hcfg, bcfg.widths, derive_seed(seed_, kSeedModel, 2));

  bank_.emplace(n_classes_, cfg.get_int("bank.n_protos"), hcfg.embed_dim,
                cfg.get_double("bank.sigma"));
  if (cfg.get("bank.init") == "random")
    bank_->random_init(derive_seed(seed_, kSeedModel, 3));
  else if (cfg.get("bank.init") != "means")
    throw std::runtime_error("bank.init must be 'means' or 'random'");

  optim_.emplace(cfg.get_double("train.lr"), cfg.get_double("train.weight_decay"));
}

Frame Trainer::prepare_frame(const LabelledScene& scene, std::uint64_t frame_seed) const {
  Frame f;
  f.cloud = scene.cloud;
  f.dense_labels = scene.labels;
  LabelMask sparse =
      subsample_labels(scene.labels, ratio_, derive_seed(frame_seed, kSeedSubsample));
  f.mask = propagate_voxel_labels(f.cloud, sparse, voxel_size_,
                                  derive_seed(frame_seed, kSeedVoxel));
  f.image = spherical_project(f.cloud, proj_);
  f.pixel_labels.assign(static_cast<std::size_t>(proj_.height) * proj_.width, kUnlabelled);
  for (int p = 0; p < proj_.height * proj_.width; ++p) {
    const int idx = f.image.point_index[p];
    if (idx >= 0) f.pixel_labels[p] = f.mask.labels[idx];
  }
  return f;
}

void Trainer::load_data() {
  const std::string remap_path = cfg_.get("data.remap");
  const ClassRemap remap =
      remap_path.empty() ? identity_remap(n_classes_) : load_remap_table(remap_path);

  auto build = [&](const std::string& root, std::vector<Frame>& out) {
    if (root.empty()) return;
    Dataset ds = Dataset::open(root, remap);
    for (std::size_t i = 0; i < ds.size(); ++i)
      out.push_back(prepare_frame(ds.load(i), derive_seed(seed_, 0xf0a3e, i)));
  };
  build(cfg_.get("data.train"), train_frames_);
  build(cfg_.get("data.val"), val_frames_);
  if (train_frames_.empty()) throw std::runtime_error("no training frames under data.train");

  // focal weights come from the ORIGINAL label frequencies across the
  // training set, before voxel propagation
  ClassStats stats;
  stats.counts.assign(n_classes_, 0);
  stats.freq.assign(n_classes_, 0.0);
  std::int64_t total = 0;
  for (const auto& f : train_frames_) {
    for (std::size_t i = 0; i < f.mask.size(); ++i) {
      if (f.mask.provenance[i] != Provenance::ORIGINAL) continue;
      ++stats.counts[f.mask.labels[i]];
      ++total;
    }
  }
  if (total == 0) throw std::runtime_error("no ORIGINAL labels in the training set");
  for (int k = 0; k < n_classes_; ++k)
    stats.freq[k] = static_cast<double>(stats.counts[k]) / static_cast<double>(total);
  focal_w_ = focal_weights(stats, cfg_.get_double("loss.focal_eps"));
}

Frame Trainer::augment_frame(const Frame& frame, std::uint64_t seed) const {
  Rng rng(seed);
  const bool flip = rng.uniform() < 0.5;
  const int shift = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(proj_.width)));
  if (!flip && shift == 0) return frame;

  Frame out = frame;
  const int h = proj_.height, w = proj_.width;
  for (int c = 0; c < w; ++c) {
    int src = flip ? (w - 1 - c) : c;
    src = (src + shift) % w;
    if (src == c) continue;
    for (int r = 0; r < h; ++r) {
      const int dst_p = r * w + c, src_p = r * w + src;
      out.image.valid[dst_p] = frame.image.valid[src_p];
      out.image.point_index[dst_p] = frame.image.point_index[src_p];
      std::memcpy(&out.image.channels[dst_p * 5], &frame.image.channels[src_p * 5],
                  5 * sizeof(float));
      out.pixel_labels[dst_p] = frame.pixel_labels[src_p];
    }
  }
  return out;
}

StepMetrics Trainer::train_step(const std::vector<int>& frame_ids, int epoch, int step) {
  StepMetrics metrics;
  metrics.anchors = 0;
  auto bparams = backbone_->params();
  auto hparams = head_->params();
  for (auto* p : bparams) p->zero_grad();
  for (auto* p : hparams) p->zero_grad();

  const bool contrast = loss_w_.lambda_nce != 0.0;
  const int n_frames = static_cast<int>(frame_ids.size());

  for (int slot = 0; slot < n_frames; ++slot) {
    const int fid = frame_ids[slot];
    const Frame* frame = &train_frames_[fid];
    Frame augmented;
    if (augment_) {
      augmented = augment_frame(*frame, derive_seed(seed_, kSeedAugment, epoch,
                                                    static_cast<std::uint64_t>(step) * 64 + slot));
      frame = &augmented;
    }

    ToyBackbone::Cache bcache;
    ProjectionHead::Cache hcache;
    FeaturePyramid pyramid;
    Tensor logits = backbone_->forward(frame->image, pyramid, bcache);
    Tensor embed = head_->forward(pyramid, hcache);

    std::vector<int> labels(frame->pixel_labels.size(), kUnlabelled);
    int labelled = 0;
    for (std::size_t p = 0; p < labels.size(); ++p) {
      if (frame->image.valid[p] && frame->pixel_labels[p] >= 0) {
        labels[p] = frame->pixel_labels[p];
        ++labelled;
      }
    }
    metrics.labelled_pixels += labelled;

    // prototype updates from labelled-pixel embeddings only
    if (contrast && labelled > 0) {
      for (int k = 0; k < n_classes_; ++k) {
        std::vector<int> rows;
        for (std::size_t p = 0; p < labels.size(); ++p)
          if (labels[p] == k) rows.push_back(static_cast<int>(p));
        if (rows.empty()) continue;
        Mat class_embed(rows.size(), embed.c);
        for (std::size_t i = 0; i < rows.size(); ++i) class_embed.row(i) = embed.m.row(rows[i]);
        metrics.bank_pixels += static_cast<int>(rows.size());

        if (!bank_->initialized(k)) {
          // first touch: spread pixels round-robin, update adopts the means
          std::vector<int> assign(rows.size());
          for (std::size_t i = 0; i < rows.size(); ++i)
            assign[i] = static_cast<int>(i) % bank_->n_protos();
          bank_->update(k, class_embed, assign);
        } else {
          const Mat cost = cost_matrix(class_embed, bank_->prototypes(k));
          const TransportPlan plan = sinkhorn_assign(cost, sinkhorn_iters_, sinkhorn_eps_);
          if (soft_assign_) {
            bank_->update_soft(k, class_embed, plan);
          } else {
            const auto assign = map_pixels(
                plan, gumbel_tau_, derive_seed(seed_, kSeedGumbel, epoch,
                                               (static_cast<std::uint64_t>(step) * 64 + slot) *
                                                       64 + k));
            bank_->update(k, class_embed, assign);
          }
        }
      }
    }

    const Mat probs = row_softmax(logits.m);
    const LossValue foc = focal_loss(logits.m, labels, focal_w_, loss_w_.gamma);
    const LossValue lov = lovasz_softmax(probs, labels);

    // anchors and contrastive term, skipped during warm-up
    LossValue nce;
    nce.grad = Mat::Zero(0, embed.c);
    AnchorSet anchors;
    if (contrast && epoch >= warmup_) {
      const std::vector<int> pseudo = pseudo_labels(logits.m, frame->image.valid);
      int pseudo_count = 0;
      for (int v : pseudo)
        if (v >= 0) ++pseudo_count;
      const int budget = anchor_budget(epoch, warmup_, epochs_, pseudo_count);
      metrics.budget = budget;
      if (anchor_strategy_ == "all") {
        for (std::size_t p = 0; p < pseudo.size(); ++p)
          if (pseudo[p] >= 0)
            anchors.anchors.push_back({static_cast<int>(p) / proj_.width,
                                       static_cast<int>(p) % proj_.width, pseudo[p]});
      } else if (budget > 0) {
        SamplingTables tables;
        if (anchor_strategy_ == "softmax_prob") {
          for (std::size_t p = 0; p < pseudo.size(); ++p) {
            if (pseudo[p] < 0) continue;
            auto& t = tables[pseudo[p]];
            t.pixels.push_back(static_cast<int>(p));
            t.prob.push_back(probs(static_cast<Eigen::Index>(p), pseudo[p]));
          }
          for (auto& [cls, t] : tables) {
            const double total = std::accumulate(t.prob.begin(), t.prob.end(), 0.0);
            for (auto& v : t.prob) v /= total;
          }
        } else if (anchor_strategy_ == "entropy_prob") {
          const EntropyMap ent = shannon_entropy(probs, proj_.height, proj_.width);
          tables = sampling_probabilities(ent, pseudo, frame->image.valid);
        } else {
          throw std::runtime_error("unknown anchor.strategy: " + anchor_strategy_);
        }
        anchors = sample_anchors(tables, budget,
                                 derive_seed(seed_, kSeedAnchors, epoch,
                                             static_cast<std::uint64_t>(step) * 64 + slot),
                                 proj_.width);
      }
      // only classes with initialized prototypes can serve as anchors
      std::erase_if(anchors.anchors,
                    [&](const Anchor& a) { return !bank_->initialized(a.class_id); });
      metrics.anchors += static_cast<int>(anchors.anchors.size());

      if (!anchors.anchors.empty()) {
        Mat anchor_embed(anchors.anchors.size(), embed.c);
        std::vector<int> anchor_cls(anchors.anchors.size());
        for (std::size_t a = 0; a < anchors.anchors.size(); ++a) {
          const int p = anchors.anchors[a].row * proj_.width + anchors.anchors[a].col;
          anchor_embed.row(a) = embed.m.row(p);
          anchor_cls[a] = anchors.anchors[a].class_id;
        }
        nce = info_nce_pix2proto(anchor_embed, anchor_cls, *bank_, loss_w_.temperature);
      }
    }

    metrics.foc += foc.value;
    metrics.lov += lov.value;
    metrics.nce += nce.value;

    // backward
    Tensor d_logits(proj_.height, proj_.width, n_classes_);
    d_logits.m = loss_w_.lambda_foc * foc.grad +
                 loss_w_.lambda_lov * softmax_backward(probs, lov.grad);
    std::vector<Tensor> d_pyramid;
    if (nce.grad.rows() > 0) {
      Tensor d_embed(proj_.height, proj_.width, embed.c);
      for (std::size_t a = 0; a < anchors.anchors.size(); ++a) {
        const int p = anchors.anchors[a].row * proj_.width + anchors.anchors[a].col;
        d_embed.m.row(p) += loss_w_.lambda_nce * nce.grad.row(a);
      }
      d_pyramid = head_->backward(hcache, d_embed);
    }
    backbone_->backward(bcache, d_logits, d_pyramid);
  }

  const double inv = 1.0 / n_frames;
  for (auto* p : bparams) p->grad *= inv;
  for (auto* p : hparams) p->grad *= inv;
  metrics.foc *= inv;
  metrics.lov *= inv;
  metrics.nce *= inv;
  metrics.total = total_loss(metrics.foc, metrics.lov, metrics.nce, loss_w_);
  if (!std::isfinite(metrics.total))
    throw std::runtime_error("NaN loss at epoch " + std::to_string(epoch) + " step " +
                             std::to_string(step) + " (foc=" + fmt(metrics.foc) +
                             " lov=" + fmt(metrics.lov) + " nce=" + fmt(metrics.nce) + ")");

  std::vector<Param*> all = bparams;
  all.insert(all.end(), hparams.begin(), hparams.end());
  optim_->step(all);
  return metrics;
}

EvalReport Trainer::evaluate_frames(const std::vector<Frame>& frames, bool use_knn) const {
  EvalReport report;
  report.confusion.assign(static_cast<std::size_t>(n_classes_) * n_classes_, 0);
  report.missed.assign(n_classes_, 0);
  for (const auto& frame : frames) {
    ToyBackbone::Cache bcache;
    FeaturePyramid pyramid;
    Tensor logits = backbone_->forward(frame.image, pyramid, bcache);
    const std::vector<int> pixel_pred = pseudo_labels(logits.m, frame.image.valid);
    std::vector<int> point_pred = backproject(pixel_pred, frame.image, frame.cloud, proj_);
    if (use_knn)
      point_pred = knn_postprocess(point_pred, frame.cloud, frame.image, proj_,
                                   cfg_.get_int("eval.knn_k"), cfg_.get_int("eval.knn_window"));
    for (std::size_t i = 0; i < frame.cloud.size(); ++i) {
      const int gt = frame.dense_labels[i];
      if (gt < 0 || gt >= n_classes_) continue;
      const int pred = point_pred[i];
      if (pred < 0)
        ++report.missed[gt];
      else
        ++report.confusion[static_cast<std::size_t>(gt) * n_classes_ + pred];
    }
  }

  report.iou.assign(n_classes_, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < n_classes_; ++k) {
    std::int64_t tp = report.confusion[static_cast<std::size_t>(k) * n_classes_ + k];
    std::int64_t gt_total = report.missed[k];
    std::int64_t pred_total = 0;
    for (int j = 0; j < n_classes_; ++j) {
      gt_total += report.confusion[static_cast<std::size_t>(k) * n_classes_ + j];
      pred_total += report.confusion[static_cast<std::size_t>(j) * n_classes_ + k];
    }
    if (gt_total == 0) continue;
    const std::int64_t denom = gt_total + pred_total - tp;
    report.iou[k] = denom > 0 ? static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    sum += report.iou[k];
    ++present;
  }
  report.miou = present > 0 ? sum / present : 0.0;
  return report;
}

EvalReport Trainer::evaluate_split(bool validation, bool use_knn) const {
  const auto& frames = validation && !val_frames_.empty() ? val_frames_ : train_frames_;
  return evaluate_frames(frames, use_knn);
}

void Trainer::run() {
  const std::string out_dir = cfg_.get("out.dir");
  ensure_dir(out_dir);
  {
    std::ofstream cfg_out((fs::path(out_dir) / "config.txt").string());
    if (!cfg_out) throw std::runtime_error("cannot write to " + out_dir);
    cfg_out << cfg_.echo();
  }
  std::ofstream metrics_out((fs::path(out_dir) / "metrics.txt").string());
  if (!metrics_out) throw std::runtime_error("cannot write metrics under " + out_dir);
  metrics_out << "# split,epoch,loss_foc,loss_lov,loss_nce,loss_total,miou,labelled_px,"
                 "bank_px,anchors\n";

  const bool use_knn = cfg_.get_bool("eval.knn");
  const int eval_every = std::max(1, cfg_.get_int("train.eval_every"));
  const int n = static_cast<int>(train_frames_.size());

  EvalReport last_report = evaluate_split(true, use_knn);
  if (epochs_ == 0)
    metrics_out << "val,0,0,0,0,0," << fmt(last_report.miou) << ",0,0,0\n";

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < epochs_; ++epoch) {
    Rng shuffle_rng(derive_seed(seed_, kSeedShuffle, epoch));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[i], order[j]);
    }
    StepMetrics epoch_metrics;
    int steps = 0;
    for (int start = 0; start < n; start += batch_size_, ++steps) {
      const int end = std::min(n, start + batch_size_);
      std::vector<int> batch(order.begin() + start, order.begin() + end);
      const StepMetrics m = train_step(batch, epoch, steps);
      epoch_metrics.foc += m.foc;
      epoch_metrics.lov += m.lov;
      epoch_metrics.nce += m.nce;
      epoch_metrics.total += m.total;
      epoch_metrics.labelled_pixels += m.labelled_pixels;
      epoch_metrics.bank_pixels += m.bank_pixels;
      epoch_metrics.anchors += m.anchors;
    }
    const double inv_steps = 1.0 / steps;
    metrics_out << "train," << epoch + 1 << "," << fmt(epoch_metrics.foc * inv_steps) << ","
                << fmt(epoch_metrics.lov * inv_steps) << "," << fmt(epoch_metrics.nce * inv_steps)
                << "," << fmt(epoch_metrics.total * inv_steps) << ",nan,"
                << epoch_metrics.labelled_pixels << "," << epoch_metrics.bank_pixels << ","
                << epoch_metrics.anchors << "\n";
    if ((epoch + 1) % eval_every == 0 || epoch == epochs_ - 1) {
      last_report = evaluate_split(true, use_knn);
      metrics_out << "val," << epoch + 1 << ",0,0,0,0," << fmt(last_report.miou) << ",0,0,0\n";
    }
    metrics_out.flush();
  }

  save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string());
  std::ofstream report_out((fs::path(out_dir) / "final_report.txt").string());
  report_out << "mIoU " << fmt(last_report.miou) << "\n";
  for (int k = 0; k < n_classes_; ++k)
    report_out << "class " << k << " IoU "
               << (std::isnan(last_report.iou[k]) ? std::string("absent")
                                                  : fmt(last_report.iou[k]))
               << "\n";
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  const char magic[8] = {'C', '3', 'D', 'C', 'K', 'P', 'T', '1'};
  out.write(magic, 8);
  auto bparams = const_cast<Trainer*>(this)->backbone_->params();
  auto hparams = const_cast<Trainer*>(this)->head_->params();
  std::vector<Param*> all = bparams;
  all.insert(all.end(), hparams.begin(), hparams.end());
  const std::int32_t count = static_cast<std::int32_t>(all.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto* p : all) {
    const std::uint32_t len = static_cast<std::uint32_t>(p->name.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(p->name.data(), len);
    const std::int32_t shape[2] = {static_cast<std::int32_t>(p->value.rows()),
                                   static_cast<std::int32_t>(p->value.cols())};
    out.write(reinterpret_cast<const char*>(shape), 8);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  bank_->serialize(out);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void Trainer::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "C3DCKPT1")
    throw std::runtime_error("checkpoint magic mismatch: " + path);
  auto bparams = backbone_->params();
  auto hparams = head_->params();
  std::vector<Param*> all = bparams;
  all.insert(all.end(), hparams.begin(), hparams.end());
  std::int32_t count;
  in.read(reinterpret_cast<char*>(&count), 4);
  for (std::int32_t i = 0; i < count; ++i) {
    std::uint32_t len;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string name(len, '\0');
    in.read(name.data(), len);
    std::int32_t shape[2];
    in.read(reinterpret_cast<char*>(shape), 8);
    auto it = std::find_if(all.begin(), all.end(),
                           [&](const Param* p) { return p->name == name; });
    if (it == all.end())
      throw std::runtime_error("checkpoint parameter " + name + " unknown to this model");
    if ((*it)->value.rows() != shape[0] || (*it)->value.cols() != shape[1])
      throw std::runtime_error("checkpoint parameter " + name + " shape mismatch");
    in.read(reinterpret_cast<char*>((*it)->value.data()),
            static_cast<std::streamsize>((*it)->value.size() * sizeof(double)));
  }
  bank_ = PrototypeBank::deserialize(in);
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
}

}  // namespace coarse3d
