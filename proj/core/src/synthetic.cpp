#include "coarse3d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coarse3d/rng.hpp"

namespace coarse3d {

namespace {

void add_point(LabelledScene& scene, Rng& rng, const SceneSpec& spec, double x, double y, double z,
               double intensity, int label) {
  if (spec.noise_sigma > 0.0) {
    x += rng.normal(0.0, spec.noise_sigma);
    y += rng.normal(0.0, spec.noise_sigma);
    z += rng.normal(0.0, spec.noise_sigma);
  }
  scene.cloud.push_back(static_cast<float>(x), static_cast<float>(y), static_cast<float>(z),
                        static_cast<float>(std::clamp(intensity, 0.0, 1.0)));
  scene.labels.push_back(label);
}

// classes get distinct reflectance bands so intensity carries a weak cue
double class_intensity(int k, int n_classes, Rng& rng) {
  const double base = (k + 0.5) / n_classes;
  return base + 0.08 * (rng.uniform() - 0.5);
}

void sample_box(LabelledScene& scene, Rng& rng, const SceneSpec& spec, double cx, double cy,
                double yaw, double sx, double sy, double height, int label, int n_points) {
  const double z0 = -spec.sensor_height;
  const double cy_ = std::cos(yaw), sy_ = std::sin(yaw);
  const double a_side_x = 2.0 * (2.0 * sx) * height;  // two faces normal to local y
  const double a_side_y = 2.0 * (2.0 * sy) * height;
  const double a_top = (2.0 * sx) * (2.0 * sy);
  const double total = a_side_x + a_side_y + a_top;
  for (int i = 0; i < n_points; ++i) {
    double lx, ly, lz;
    const double pick = rng.uniform() * total;
    if (pick < a_side_x) {
      lx = rng.uniform(-sx, sx);
      ly = (rng.uniform() < 0.5) ? -sy : sy;
      lz = rng.uniform(0.0, height);
    } else if (pick < a_side_x + a_side_y) {
      lx = (rng.uniform() < 0.5) ? -sx : sx;
      ly = rng.uniform(-sy, sy);
      lz = rng.uniform(0.0, height);
    } else {
      lx = rng.uniform(-sx, sx);
      ly = rng.uniform(-sy, sy);
      lz = height;
    }
    const double x = cx + cy_ * lx - sy_ * ly;
    const double y = cy + sy_ * lx + cy_ * ly;
    add_point(scene, rng, spec, x, y, z0 + lz, class_intensity(label, spec.n_classes, rng), label);
  }
}

void sample_cylinder(LabelledScene& scene, Rng& rng, const SceneSpec& spec, double cx, double cy,
                     double radius, double height, int label, int n_points) {
  const double z0 = -spec.sensor_height;
  const double a_side = 2.0 * M_PI * radius * height;
  const double a_top = M_PI * radius * radius;
  for (int i = 0; i < n_points; ++i) {
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    double x, y, z;
    if (rng.uniform() * (a_side + a_top) < a_side) {
      x = cx + radius * std::cos(ang);
      y = cy + radius * std::sin(ang);
      z = z0 + rng.uniform(0.0, height);
    } else {
      const double r = radius * std::sqrt(rng.uniform());
      x = cx + r * std::cos(ang);
      y = cy + r * std::sin(ang);
      z = z0 + height;
    }
    add_point(scene, rng, spec, x, y, z, class_intensity(label, spec.n_classes, rng), label);
  }
}

}  // namespace

LabelledScene generate_scene(const SceneSpec& spec) {
  if (spec.n_classes < 2) throw std::invalid_argument("generate_scene: need n_classes >= 2");
  if (spec.min_points_per_class < 1 || spec.max_points_per_class < spec.min_points_per_class)
    throw std::invalid_argument("generate_scene: empty points_per_class range");
  if (spec.ground_radius_max <= spec.ground_radius_min)
    throw std::invalid_argument("generate_scene: ground annulus has zero area");
  if (spec.max_objects < spec.min_objects || spec.min_object_size <= 0.0 ||
      spec.max_object_size < spec.min_object_size)
    throw std::invalid_argument("generate_scene: empty object range");

  Rng rng(derive_seed(spec.seed, 0x5ce7eULL));
  LabelledScene scene;

  // ground annulus, class 0
  const int n_ground =
      rng.uniform_int(spec.min_points_per_class, spec.max_points_per_class) * spec.n_classes;
  const double r2min = spec.ground_radius_min * spec.ground_radius_min;
  const double r2max = spec.ground_radius_max * spec.ground_radius_max;
  for (int i = 0; i < n_ground; ++i) {
    const double r = std::sqrt(rng.uniform(r2min, r2max));  // area-uniform
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    add_point(scene, rng, spec, r * std::cos(ang), r * std::sin(ang), -spec.sensor_height,
              class_intensity(0, spec.n_classes, rng), 0);
  }

  int n_objects = rng.uniform_int(spec.min_objects, spec.max_objects);
  n_objects = std::max(n_objects, spec.n_classes - 1);  // every class at least once
  for (int obj = 0; obj < n_objects; ++obj) {
    const int label =
        (obj < spec.n_classes - 1) ? obj + 1 : rng.uniform_int(1, spec.n_classes - 1);
    const double radius =
        rng.uniform(spec.ground_radius_min + 1.0, spec.ground_radius_max - 2.0);
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double cx = radius * std::cos(ang), cy = radius * std::sin(ang);
    const double size = rng.uniform(spec.min_object_size, spec.max_object_size);
    // heights stay below the horizon so objects remain inside the vertical fov
    const double height = 0.4 + 0.25 * label;
    const int n_points = rng.uniform_int(spec.min_points_per_class, spec.max_points_per_class);
    if (label % 2 == 1) {
      sample_box(scene, rng, spec, cx, cy, rng.uniform(0.0, M_PI), size * 0.5,
                 size * rng.uniform(0.3, 0.5), height, label, n_points);
    } else {
      sample_cylinder(scene, rng, spec, cx, cy, size * 0.4, height, label, n_points);
    }
  }
  return scene;
}

}  // namespace coarse3d
