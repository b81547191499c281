#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coarse3d/pointcloud.hpp"

namespace coarse3d {

struct SceneSpec {
  std::uint64_t seed = 0;
  int n_classes = 5;                 // class 0 is the ground plane
  int min_points_per_class = 200;
  int max_points_per_class = 600;
  double ground_radius_min = 4.0;    // annulus around the sensor, meters
  double ground_radius_max = 35.0;
  int min_objects = 4;
  int max_objects = 10;
  double min_object_size = 0.8;      // meters
  double max_object_size = 3.0;
  double sensor_height = 1.7;        // ground plane sits at z = -sensor_height
  double noise_sigma = 0.0;
};

struct LabelledScene {
  PointCloud cloud;
  std::vector<int> labels;  // dense, one class id per point
};

// Deterministic given spec.seed: a ground annulus (class 0) plus boxes and
// cylinders carrying classes 1..n_classes-1, each class present at least once.
LabelledScene generate_scene(const SceneSpec& spec);

}  // namespace coarse3d
