#include "coarse3d/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace coarse3d {

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

Dataset Dataset::open(const std::string& root, const ClassRemap& remap) {
  Dataset ds;
  ds.remap_ = remap;
  const fs::path base(root);
  const fs::path manifest = base / "manifest.txt";
  if (!fs::exists(manifest))
    throw std::runtime_error("dataset manifest not found: " + manifest.string());
  std::ifstream in(manifest);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const fs::path scan = base / "velodyne" / line;
    fs::path label = base / "labels" / line;
    label.replace_extension(".label");
    if (!fs::exists(scan)) throw std::runtime_error("missing scan: " + scan.string());
    if (!fs::exists(label)) throw std::runtime_error("missing labels: " + label.string());
    ds.scans_.push_back(scan.string());
    ds.labels_.push_back(label.string());
  }
  return ds;
}

LabelledScene Dataset::load(std::size_t index) const {
  LabelledScene scene;
  scene.cloud = load_scan(scans_.at(index));
  scene.labels = load_labels(labels_.at(index), scene.cloud.size(), remap_);
  return scene;
}

void export_scenes(const std::string& root, const std::vector<LabelledScene>& scenes) {
  ensure_dir((fs::path(root) / "velodyne").string());
  ensure_dir((fs::path(root) / "labels").string());
  std::ofstream manifest((fs::path(root) / "manifest.txt").string());
  if (!manifest) throw std::runtime_error("cannot write manifest under " + root);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::ostringstream name;
    name << std::setw(6) << std::setfill('0') << i;
    save_scan((fs::path(root) / "velodyne" / (name.str() + ".bin")).string(), scenes[i].cloud);
    save_labels((fs::path(root) / "labels" / (name.str() + ".label")).string(),
                scenes[i].labels);
    manifest << name.str() << ".bin\n";
  }
}

}  // namespace coarse3d
