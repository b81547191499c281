#pragma once

#include <string>
#include <vector>

#include "coarse3d/pointcloud.hpp"
#include "coarse3d/synthetic.hpp"

namespace coarse3d {

// Directory layout: <root>/velodyne/NNNNNN.bin, <root>/labels/NNNNNN.label,
// plus a manifest.txt listing the scan files one per line.
class Dataset {
 public:
  static Dataset open(const std::string& root, const ClassRemap& remap);

  std::size_t size() const { return scans_.size(); }
  LabelledScene load(std::size_t index) const;
  const std::string& scan_path(std::size_t index) const { return scans_[index]; }

 private:
  std::vector<std::string> scans_, labels_;
  ClassRemap remap_;
};

// Exports scenes in the SemKITTI binary formats and writes the manifest.
void export_scenes(const std::string& root, const std::vector<LabelledScene>& scenes);

void ensure_dir(const std::string& path);

}  // namespace coarse3d
