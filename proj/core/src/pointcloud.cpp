#include "coarse3d/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coarse3d {

namespace {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<char> buf(size);
  if (size > 0) in.read(buf.data(), static_cast<std::streamsize>(size));
  if (!in) throw std::runtime_error("short read: " + path);
  return buf;
}

}  // namespace

PointCloud load_scan(const std::string& path) {
  const auto buf = read_file(path);
  if (buf.size() % 16 != 0) {
    throw std::runtime_error("truncated scan " + path + ": " + std::to_string(buf.size()) +
                             " bytes, record boundary broken at offset " +
                             std::to_string(buf.size() - buf.size() % 16));
  }
  const std::size_t n = buf.size() / 16;
  PointCloud cloud;
  cloud.xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float rec[4];
    std::memcpy(rec, buf.data() + i * 16, 16);
    for (float v : rec) {
      if (!std::isfinite(v))
        throw std::runtime_error("non-finite value in scan " + path + " at point " +
                                 std::to_string(i));
    }
    cloud.push_back(rec[0], rec[1], rec[2], std::clamp(rec[3], 0.f, 1.f));
  }
  return cloud;
}

void save_scan(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float rec[4] = {cloud.xs[i], cloud.ys[i], cloud.zs[i], cloud.intensity[i]};
    out.write(reinterpret_cast<const char*>(rec), 16);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<int> load_labels(const std::string& path, std::size_t n_points,
                             const ClassRemap& remap) {
  const auto buf = read_file(path);
  if (buf.size() != n_points * 4) {
    throw std::runtime_error("label count mismatch in " + path + ": expected " +
                             std::to_string(n_points) + " records, got " +
                             std::to_string(buf.size() / 4));
  }
  std::vector<int> labels(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    std::uint32_t rec;
    std::memcpy(&rec, buf.data() + i * 4, 4);
    const auto sem = static_cast<std::uint16_t>(rec & 0xFFFFu);  // upper 16 bits are instance id
    auto it = remap.find(sem);
    if (it == remap.end())
      throw std::runtime_error("label id " + std::to_string(sem) + " not in remap table (" + path +
                               ")");
    labels[i] = it->second;
  }
  return labels;
}

void save_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (int l : labels) {
    const std::uint32_t rec = static_cast<std::uint32_t>(l) & 0xFFFFu;
    out.write(reinterpret_cast<const char*>(&rec), 4);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ClassRemap load_remap_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open remap table: " + path);
  ClassRemap remap;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    long raw, mapped;
    if (ss >> raw >> mapped) remap[static_cast<std::uint16_t>(raw)] = static_cast<int>(mapped);
  }
  return remap;
}

ClassRemap identity_remap(int n_classes) {
  ClassRemap remap;
  for (int k = 0; k < n_classes; ++k) remap[static_cast<std::uint16_t>(k)] = k;
  return remap;
}

bool project_point(double x, double y, double z, const ProjectionConfig& cfg, int& row, int& col,
                   double& range) {
  range = std::sqrt(x * x + y * y + z * z);
  if (range <= 0.0) return false;
  const double fov_up = cfg.fov_up_deg * M_PI / 180.0;
  const double fov_down = cfg.fov_down_deg * M_PI / 180.0;
  const double pitch = std::asin(std::clamp(z / range, -1.0, 1.0));
  if (pitch > fov_up || pitch < fov_down) return false;
  // row 0 at fov_up, azimuth column 0 at -pi (atan2 convention)
  const double v = (fov_up - pitch) / (fov_up - fov_down);
  const double yaw = std::atan2(y, x);
  const double u = (yaw + M_PI) / (2.0 * M_PI);
  row = std::clamp(static_cast<int>(std::floor(v * cfg.height)), 0, cfg.height - 1);
  col = std::clamp(static_cast<int>(std::floor(u * cfg.width)), 0, cfg.width - 1);
  return true;
}

RangeImage spherical_project(const PointCloud& cloud, const ProjectionConfig& cfg) {
  if (cfg.height < 1 || cfg.width < 1 || cfg.fov_up_deg <= cfg.fov_down_deg)
    throw std::invalid_argument("invalid projection config");
  RangeImage img(cfg.height, cfg.width);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    int r, c;
    double range;
    if (!project_point(cloud.xs[i], cloud.ys[i], cloud.zs[i], cfg, r, c, range)) continue;
    const int p = r * cfg.width + c;
    if (img.valid[p] && img.chan(r, c, 0) <= range) continue;  // nearest point wins
    img.valid[p] = 1;
    img.point_index[p] = static_cast<int>(i);
    img.chan(r, c, 0) = static_cast<float>(range);
    img.chan(r, c, 1) = cloud.xs[i];
    img.chan(r, c, 2) = cloud.ys[i];
    img.chan(r, c, 3) = cloud.zs[i];
    img.chan(r, c, 4) = cloud.intensity[i];
  }
  return img;
}

std::vector<int> backproject(const std::vector<int>& range_pred, const RangeImage& image,
                             const PointCloud& cloud, const ProjectionConfig& cfg) {
  if (range_pred.size() != static_cast<std::size_t>(image.h * image.w))
    throw std::invalid_argument("backproject: prediction/image shape mismatch");
  std::vector<int> out(cloud.size(), kUnlabelled);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    int r, c;
    double range;
    if (!project_point(cloud.xs[i], cloud.ys[i], cloud.zs[i], cfg, r, c, range)) continue;
    out[i] = range_pred[r * image.w + c];
  }
  return out;
}

std::vector<int> knn_postprocess(const std::vector<int>& point_preds, const PointCloud& cloud,
                                 const RangeImage& image, const ProjectionConfig& cfg, int k,
                                 int window) {
  if (k < 1) throw std::invalid_argument("knn_postprocess: k must be >= 1");
  if (window % 2 == 0) throw std::invalid_argument("knn_postprocess: window must be odd");
  std::vector<int> out = point_preds;
  const int half = window / 2;
  std::vector<std::pair<double, int>> cand;  // (range diff, label)
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    int r, c;
    double range;
    if (!project_point(cloud.xs[i], cloud.ys[i], cloud.zs[i], cfg, r, c, range)) continue;
    cand.clear();
    for (int dr = -half; dr <= half; ++dr) {
      for (int dc = -half; dc <= half; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= image.h || cc < 0 || cc >= image.w) continue;
        const int p = rr * image.w + cc;
        if (!image.valid[p]) continue;
        const double diff = std::abs(static_cast<double>(image.channels[p * 5]) - range);
        cand.emplace_back(diff, point_preds[image.point_index[p]]);
      }
    }
    if (cand.empty()) continue;
    std::sort(cand.begin(), cand.end());
    const int kk = std::min<int>(k, static_cast<int>(cand.size()));
    // majority vote; ties by smallest range difference, then smallest class id
    std::map<int, std::pair<int, double>> votes;  // label -> (count, best diff)
    for (int j = 0; j < kk; ++j) {
      auto& v = votes[cand[j].second];
      if (v.first == 0) v.second = cand[j].first;
      v.first += 1;
      v.second = std::min(v.second, cand[j].first);
    }
    int best = kUnlabelled;
    int best_count = -1;
    double best_diff = 0.0;
    for (const auto& [label, v] : votes) {
      if (v.first > best_count || (v.first == best_count && v.second < best_diff)) {
        best = label;
        best_count = v.first;
        best_diff = v.second;
      }
    }
    out[i] = best;
  }
  return out;
}

}  // namespace coarse3d
