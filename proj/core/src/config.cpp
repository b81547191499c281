#include "coarse3d/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coarse3d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::map<std::string, std::string>& ExperimentConfig::defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      {"data.train", ""},
      {"data.val", ""},
      {"data.remap", ""},          // optional class-remap table path
      {"out.dir", "runs/default"},
      {"n_classes", "5"},
      {"proj.height", "64"},
      {"proj.width", "2048"},
      {"proj.fov_up", "3.0"},
      {"proj.fov_down", "-25.0"},
      {"backbone", "toy"},
      {"backbone.widths", "16,32,64"},
      {"backbone.leaky_slope", "0.1"},
      {"head.dim", "256"},
      {"head.leaky_slope", "0.1"},
      {"head.bias", "1"},
      {"bank.n_protos", "20"},
      {"bank.sigma", "0.999"},
      {"bank.init", "means"},      // means | random
      {"bank.soft_assign", "0"},
      {"sinkhorn.iterations", "3"},
      {"sinkhorn.epsilon", "0.05"},
      {"gumbel.tau", "0.5"},
      {"anchor.strategy", "entropy_prob"},  // entropy_prob | softmax_prob | all
      {"loss.lambda_foc", "1.0"},
      {"loss.lambda_lov", "1.0"},
      {"loss.lambda_nce", "0.1"},
      {"loss.temperature", "0.1"},
      {"loss.gamma", "2.0"},
      {"loss.focal_eps", "1e-6"},
      {"train.epochs", "100"},
      {"train.warmup_epochs", "5"},
      {"train.lr", "0.01"},
      {"train.weight_decay", "1e-4"},
      {"train.batch_size", "4"},
      {"train.seed", ""},  // empty: fall back to COARSE3D_SEED, then 1
      {"train.annotation_ratio", "0.001"},
      {"train.voxel_size", "0.06"},
      {"train.eval_every", "5"},
      {"train.augment", "1"},
      {"eval.knn", "0"},
      {"eval.knn_k", "5"},
      {"eval.knn_window", "5"},
  };
  return kDefaults;
}

ExperimentConfig::ExperimentConfig() : values_(defaults()) {}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  ExperimentConfig cfg;
  cfg.apply_file(path);
  return cfg;
}

void ExperimentConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    set(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
  }
}

void ExperimentConfig::apply_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override must be key=value, got: " + kv);
  set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (defaults().find(key) == defaults().end())
    throw std::runtime_error("unknown config key: " + key);
  values_[key] = value;
}

std::string ExperimentConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("unknown config key: " + key);
  return it->second;
}

int ExperimentConfig::get_int(const std::string& key) const {
  return std::stoi(get(key));
}

double ExperimentConfig::get_double(const std::string& key) const {
  return std::stod(get(key));
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const auto v = get(key);
  return v == "1" || v == "true" || v == "yes";
}

std::uint64_t ExperimentConfig::get_seed(const std::string& key) const {
  const auto v = get(key);
  if (!v.empty()) return std::stoull(v);
  if (const char* env = std::getenv("COARSE3D_SEED")) return std::stoull(env);
  return 1;
}

std::vector<int> ExperimentConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  std::istringstream ss(get(key));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

std::string ExperimentConfig::echo() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

}  // namespace coarse3d
