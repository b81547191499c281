#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "coarse3d/config.hpp"
#include "coarse3d/dataset.hpp"
#include "coarse3d/rng.hpp"
#include "coarse3d/synthetic.hpp"
#include "coarse3d/trainer.hpp"

namespace fs = std::filesystem;
using namespace coarse3d;

namespace {

int cmd_generate(int scenes, std::uint64_t seed, const std::string& out, int classes,
                 double noise, int points_min, int points_max) {
  SceneSpec spec;
  spec.n_classes = classes;
  spec.noise_sigma = noise;
  spec.min_points_per_class = points_min;
  spec.max_points_per_class = points_max;
  std::vector<LabelledScene> generated;
  for (int i = 0; i < scenes; ++i) {
    spec.seed = derive_seed(seed, 0x9e4e, i);
    generated.push_back(generate_scene(spec));
  }
  export_scenes(out, generated);
  std::cout << "wrote " << scenes << " scenes to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              double ratio, bool no_contrast) {
  ExperimentConfig cfg =
      config_path.empty() ? ExperimentConfig() : ExperimentConfig::from_file(config_path);
  for (const auto& kv : overrides) cfg.apply_override(kv);
  if (ratio > 0.0) {
    std::ostringstream ss;
    ss << ratio;
    cfg.set("train.annotation_ratio", ss.str());
  }
  if (no_contrast) cfg.set("loss.lambda_nce", "0");

  Trainer trainer(cfg);
  trainer.load_data();
  trainer.run();
  std::cout << "run complete: " << cfg.get("out.dir") << "\n";
  return 0;
}

int cmd_eval(const std::string& run_dir, bool knn_flag, bool knn_set) {
  const fs::path run(run_dir);
  ExperimentConfig cfg = ExperimentConfig::from_file((run / "config.txt").string());
  if (knn_set) cfg.set("eval.knn", knn_flag ? "1" : "0");

  Trainer trainer(cfg);
  trainer.load_data();
  trainer.load_checkpoint((run / "checkpoint.bin").string());
  const EvalReport report = trainer.evaluate_split(true, cfg.get_bool("eval.knn"));

  std::ofstream table((run / "eval_report.txt").string());
  table << "mIoU " << report.miou << "\n";
  for (std::size_t k = 0; k < report.iou.size(); ++k) {
    table << "class " << k << " IoU ";
    if (std::isnan(report.iou[k]))
      table << "absent\n";
    else
      table << report.iou[k] << "\n";
  }

  // plot-ready curves out of the metrics series
  std::ifstream metrics((run / "metrics.txt").string());
  std::ofstream loss_curve((run / "curves_loss.csv").string());
  std::ofstream miou_curve((run / "curves_miou.csv").string());
  loss_curve << "epoch,loss_foc,loss_lov,loss_nce,loss_total\n";
  miou_curve << "epoch,miou\n";
  std::string line;
  while (std::getline(metrics, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string split, field;
    std::getline(ss, split, ',');
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (split == "train" && fields.size() >= 5)
      loss_curve << fields[0] << "," << fields[1] << "," << fields[2] << "," << fields[3] << ","
                 << fields[4] << "\n";
    else if (split == "val" && fields.size() >= 6)
      miou_curve << fields[0] << "," << fields[5] << "\n";
  }

  std::cout << "mIoU " << report.miou << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"COARSE3D weak-supervision training toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset on disk");
  int scenes = 8, classes = 5, points_min = 200, points_max = 600;
  std::uint64_t gen_seed = 1;
  double noise = 0.02;
  std::string gen_out = "data/synthetic";
  gen->add_option("--scenes", scenes, "number of scenes")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen->add_option("--classes", classes, "number of classes (>= 2)")->capture_default_str();
  gen->add_option("--noise", noise, "coordinate noise sigma, meters")->capture_default_str();
  gen->add_option("--points-min", points_min, "min points per class")->capture_default_str();
  gen->add_option("--points-max", points_max, "max points per class")->capture_default_str();

  auto* train = app.add_subcommand("train", "train a model from a config");
  std::string config_path;
  std::vector<std::string> overrides;
  double ratio = -1.0;
  bool no_contrast = false;
  train->add_option("--config", config_path, "flat key = value config file");
  train->add_option("--override", overrides, "key=value override, wins over the file");
  train->add_option("--ratio", ratio, "annotation ratio shortcut");
  train->add_flag("--no-contrast", no_contrast, "baseline: lambda_nce = 0");

  auto* eval = app.add_subcommand("eval", "evaluate a finished run directory");
  std::string run_dir;
  bool knn = false;
  eval->add_option("--run", run_dir, "run directory (config.txt + checkpoint.bin)")->required();
  auto* knn_opt = eval->add_flag("--knn", knn, "apply kNN post-processing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1
  }

  try {
    if (gen->parsed()) return cmd_generate(scenes, gen_seed, gen_out, classes, noise, points_min,
                                           points_max);
    if (train->parsed()) return cmd_train(config_path, overrides, ratio, no_contrast);
    if (eval->parsed()) return cmd_eval(run_dir, knn, knn_opt->count() > 0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
