#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace coarse3d {

constexpr int kUnlabelled = -1;

struct PointCloud {
  std::vector<float> xs, ys, zs, intensity;

  std::size_t size() const { return xs.size(); }
  bool empty() const { return xs.empty(); }
  void push_back(float x, float y, float z, float i) {
    xs.push_back(x);
    ys.push_back(y);
    zs.push_back(z);
    intensity.push_back(i);
  }
};

struct ProjectionConfig {
  int height = 64;
  int width = 2048;
  double fov_up_deg = 3.0;
  double fov_down_deg = -25.0;
};

// 5 channels: range, x, y, z, intensity
struct RangeImage {
  int h = 0, w = 0;
  std::vector<float> channels;     // h*w*5, pixel-major
  std::vector<std::uint8_t> valid;  // h*w
  std::vector<int> point_index;     // h*w, -1 where invalid

  RangeImage() = default;
  RangeImage(int h_, int w_)
      : h(h_), w(w_), channels(h_ * w_ * 5, 0.f), valid(h_ * w_, 0), point_index(h_ * w_, -1) {}

  float& chan(int r, int c, int k) { return channels[(r * w + c) * 5 + k]; }
  float chan(int r, int c, int k) const { return channels[(r * w + c) * 5 + k]; }
};

// SemKITTI on-disk formats: .bin scans of float32 (x,y,z,intensity) records,
// .label files of uint32 with the semantic class in the low 16 bits.
PointCloud load_scan(const std::string& path);
void save_scan(const std::string& path, const PointCloud& cloud);

using ClassRemap = std::map<std::uint16_t, int>;
std::vector<int> load_labels(const std::string& path, std::size_t n_points,
                             const ClassRemap& remap);
void save_labels(const std::string& path, const std::vector<int>& labels);

// one "raw_id mapped_id" pair per line, '#' comments
ClassRemap load_remap_table(const std::string& path);
ClassRemap identity_remap(int n_classes);

// Returns false when the point falls outside the vertical fov. Row/col are
// clamped to the image border otherwise.
bool project_point(double x, double y, double z, const ProjectionConfig& cfg, int& row, int& col,
                   double& range);

RangeImage spherical_project(const PointCloud& cloud, const ProjectionConfig& cfg);

std::vector<int> backproject(const std::vector<int>& range_pred, const RangeImage& image,
                             const PointCloud& cloud, const ProjectionConfig& cfg);

std::vector<int> knn_postprocess(const std::vector<int>& point_preds, const PointCloud& cloud,
                                 const RangeImage& image, const ProjectionConfig& cfg, int k = 5,
                                 int window = 5);

}  // namespace coarse3d
