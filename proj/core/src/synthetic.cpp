// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/synthetic.h"

#include <cmath>
#include <fstream>

#include "nrr/dataset.h"
#include "nrr/image.h"
#include "nrr/transforms.h"

namespace nrr {

namespace fs = std::filesystem;

ShapeKind parse_shape(const std::string& name) {
  if (name == "sphere") return ShapeKind::kSphere;
  if (name == "ellipsoid") return ShapeKind::kEllipsoid;
  if (name == "capsule") return ShapeKind::kCapsule;
  throw GenerationError("unknown scene '" + name + "' (valid scenes: " + shape_names() + ")");
}

std::string shape_names() { return "sphere, ellipsoid, capsule"; }

double scene_sdf(const SyntheticScene& scene, const Eigen::Vector3d& x) {
  switch (scene.shape) {
    case ShapeKind::kSphere:
      return x.norm() - scene.sphere_radius;
    case ShapeKind::kEllipsoid: {
      const Eigen::Vector3d r(0.35, 0.2, 0.2);
      const double k0 = (x.array() / r.array()).matrix().norm();
      const double k1 = (x.array() / (r.array() * r.array())).matrix().norm();
      return k1 > 1e-12 ? k0 * (k0 - 1.0) / k1 : -r.minCoeff();
    }
    case ShapeKind::kCapsule: {
      const double half = 0.22, radius = 0.13;
      const double cx = std::min(std::max(x.x(), -half), half);
      return (x - Eigen::Vector3d(cx, 0, 0)).norm() - radius;
    }
  }
  return 0.0;
}

namespace {

double bend_angle(const SyntheticScene& s, double time) {
  return s.bend_amplitude * std::sin(2.0 * M_PI * time / s.motion_period);
}

double bulge_factor(const SyntheticScene& s, double time) {
  return s.bulge_amplitude * std::cos(2.0 * M_PI * time / s.motion_period);
}

// Cross-section scaling, quadratic along the main axis; the axial coordinate
// is unchanged, so this factors out of the inverse in closed form.
Eigen::Vector3d bulge(const SyntheticScene& s, double time, const Eigen::Vector3d& x) {
  const double q = std::max(0.0, 1.0 - (x.x() / 0.4) * (x.x() / 0.4));
  const double scale = 1.0 + bulge_factor(s, time) * q;
  return {x.x(), scale * x.y(), scale * x.z()};
}

Eigen::Vector3d bulge_inverse(const SyntheticScene& s, double time, const Eigen::Vector3d& y) {
  const double q = std::max(0.0, 1.0 - (y.x() / 0.4) * (y.x() / 0.4));
  const double scale = 1.0 + bulge_factor(s, time) * q;
  return {y.x(), y.y() / scale, y.z() / scale};
}

// Two-bone blend: the halves counter-rotate about z through the origin.
Eigen::Vector3d bend(const SyntheticScene& s, double time, const Eigen::Vector3d& x) {
  const double theta = bend_angle(s, time);
  const Eigen::Matrix3d r1 = rodrigues(Eigen::Vector3d(0, 0, -0.5 * theta));
  const Eigen::Matrix3d r2 = rodrigues(Eigen::Vector3d(0, 0, 0.5 * theta));
  const double w2 = 1.0 / (1.0 + std::exp(-x.x() / 0.06));
  return (1.0 - w2) * (r1 * x) + w2 * (r2 * x);
}

Eigen::Vector3d bend_inverse(const SyntheticScene& s, double time, const Eigen::Vector3d& y) {
  Eigen::Vector3d x = y;
  for (int i = 0; i < 40; ++i) {
    const Eigen::Vector3d residual = bend(s, time, x) - y;
    x -= residual;
    if (residual.squaredNorm() < 1e-26) break;
  }
  return x;
}

Eigen::Vector3d shade(const Eigen::Vector3d& x_canonical, const Eigen::Vector3d& normal_world,
                      int light_index) {
  const Eigen::Vector3d albedo(0.5 + 0.45 * std::sin(6.0 * x_canonical.x() + 0.1),
                               0.5 + 0.45 * std::sin(5.0 * x_canonical.y() + 2.0),
                               0.5 + 0.45 * std::sin(7.0 * x_canonical.z() + 4.0));
  const Eigen::Vector3d light = light_index == 0
                                    ? Eigen::Vector3d(0.3, -0.8, -0.5).normalized()
                                    : Eigen::Vector3d(-0.6, -0.4, 0.4).normalized();
  const double diffuse = std::max(0.0, normal_world.dot(-light));
  return (0.35 + 0.65 * diffuse) * albedo;
}

}  // namespace

Eigen::Vector3d scene_deform(const SyntheticScene& scene, double time, const Eigen::Vector3d& x) {
  return bend(scene, time, bulge(scene, time, x));
}

Eigen::Vector3d scene_deform_inverse(const SyntheticScene& scene, double time,
                                     const Eigen::Vector3d& y) {
  return bulge_inverse(scene, time, bend_inverse(scene, time, y));
}

double scene_focal(const SyntheticScene& scene) {
  if (scene.focal > 0.0) return scene.focal;
  // Frame the deformed object at roughly 70% of the image height.
  return 0.35 * scene.image_size * scene.camera_radius / 0.45;
}

RigidTransform scene_camera(const SyntheticScene& scene, int video, double time) {
  Eigen::Vector3d center;
  Eigen::Vector3d target(0, 0, 0);
  const double progress =
      scene.frames_per_video > 1 ? time / (scene.frames_per_video - 1) : 0.0;
  switch (scene.camera_path) {
    case CameraPath::kOrbit: {
      const double elevation = (video % 3 == 0) ? 0.25 : (video % 3 == 1 ? -0.2 : 0.55);
      const double az0 = 2.0 * M_PI * video / std::max(1, scene.videos);
      const double az = az0 + progress * scene.orbit_degrees * M_PI / 180.0;
      center = scene.camera_radius * Eigen::Vector3d(std::cos(elevation) * std::cos(az),
                                                     std::sin(elevation),
                                                     std::cos(elevation) * std::sin(az));
      break;
    }
    case CameraPath::kTranslate:
    case CameraPath::kStatic:
      center = Eigen::Vector3d(0, 0, -scene.camera_radius);
      break;
  }

  const Eigen::Vector3d forward = (target - center).normalized();
  const Eigen::Vector3d down(0, -1, 0);
  Eigen::Vector3d x_axis = down.cross(forward);
  if (x_axis.norm() < 1e-9) x_axis = Eigen::Vector3d(1, 0, 0);
  x_axis.normalize();
  const Eigen::Vector3d y_axis = forward.cross(x_axis);

  if (scene.camera_path == CameraPath::kTranslate)
    center += scene.translate_step * time * x_axis;

  RigidTransform g;
  g.rotation.row(0) = x_axis;
  g.rotation.row(1) = y_axis;
  g.rotation.row(2) = forward;
  g.translation = -(g.rotation * center);
  return g;
}

SyntheticSummary generate_synthetic(const SyntheticScene& scene, const fs::path& out_root) {
  if (scene.videos < 1 || scene.frames_per_video < 1 || scene.image_size < 8)
    throw GenerationError("invalid scene dimensions");
  if (scene.lights < 1 || scene.lights > 2)
    throw GenerationError("light setup supports at most 2 illumination states");

  const int size = scene.image_size;
  const double focal = scene_focal(scene);
  const double cx = size / 2.0, cy = size / 2.0;

  CameraModel cam;
  cam.fx = cam.fy = focal;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = cam.height = size;

  // Canonical rest mesh once; per-frame ground truth deforms its vertices.
  const TriMesh canonical_mesh = marching_cubes(
      [&](const Eigen::Vector3d& p) { return scene_sdf(scene, p); }, scene.gt_mesh_resolution,
      GridBounds{Eigen::Vector3d::Constant(-0.55), Eigen::Vector3d::Constant(0.55)});
  if (canonical_mesh.empty()) throw GenerationError("canonical shape produced an empty mesh");

  double object_radius = 0.0;
  for (const auto& v : canonical_mesh.vertices) object_radius = std::max(object_radius, v.norm());
  object_radius *= 1.0 + scene.bulge_amplitude + 0.15;  // deformation margin

  SyntheticSummary summary;
  summary.videos = scene.videos;
  summary.root = out_root;

  for (int v = 0; v < scene.videos; ++v) {
    char vname[16];
    std::snprintf(vname, sizeof(vname), "video%02d", v);
    const fs::path vdir = out_root / vname;
    for (const char* sub : {"rgb", "mask", "flow", "cse", "gt"})
      fs::create_directories(vdir / sub);

    std::ofstream camera_file(vdir / "camera.txt");
    camera_file.precision(17);
    camera_file << cam.fx << " " << cam.fy << " " << cam.cx << " " << cam.cy << "\n";

    const int light_index = scene.lights > 1 ? v % 2 : 0;

    for (int f = 0; f < scene.frames_per_video; ++f) {
      const double time = scene_time(scene, f);
      const RigidTransform extr = scene_camera(scene, v, time);
      const RigidTransform extr_next = scene_camera(scene, v, time + 1.0);

      // Frustum sanity: the object center must project inside the image.
      const Eigen::Vector3d center_cam = extr.apply(Eigen::Vector3d::Zero());
      if (center_cam.z() <= 2.0 * object_radius)
        throw GenerationError("camera too close to the object (video " + std::string(vname) + ")");
      const Eigen::Vector2d center_px = cam.project_cam(center_cam);
      if (center_px.x() < 0 || center_px.x() >= size || center_px.y() < 0 ||
          center_px.y() >= size)
        throw GenerationError("object outside the camera frustum (video " + std::string(vname) +
                              ")");

      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) camera_file << extr.rotation(r, c) << " ";
      for (int r = 0; r < 3; ++r) camera_file << extr.translation(r) << (r == 2 ? "" : " ");
      camera_file << "\n";

      const RigidTransform cam_to_world = extr.inverse();
      auto world_sdf = [&](const Eigen::Vector3d& w) {
        return scene_sdf(scene, scene_deform_inverse(scene, time, w));
      };

      ImageRGB rgb(size, size);
      ImageGray mask(size, size);
      ImageFlow flow(size, size);
      CseMap cse(size, size);

      const double depth0 = center_cam.z();
      const double near = std::max(0.05, depth0 - 1.5 * object_radius);
      const double far = depth0 + 1.5 * object_radius;
      const int march_steps = 192;

      for (int py = 0; py < size; ++py) {
        for (int px = 0; px < size; ++px) {
          const Eigen::Vector2d pixel(px + 0.5, py + 0.5);
          const Eigen::Vector3d dir = cam.ray_dir(pixel);

          double t_hit = -1.0, prev_t = near;
          double prev_val = world_sdf(cam_to_world.apply(near * dir));
          for (int s = 1; s <= march_steps; ++s) {
            const double tcur = near + (far - near) * s / march_steps;
            const double val = world_sdf(cam_to_world.apply(tcur * dir));
            if (prev_val > 0.0 && val <= 0.0) {
              double lo = prev_t, hi = tcur;
              for (int b = 0; b < 40; ++b) {
                const double mid = 0.5 * (lo + hi);
                if (world_sdf(cam_to_world.apply(mid * dir)) > 0.0)
                  lo = mid;
                else
                  hi = mid;
              }
              t_hit = 0.5 * (lo + hi);
              break;
            }
            prev_val = val;
            prev_t = tcur;
          }

          if (t_hit < 0.0) continue;

          const Eigen::Vector3d hit_world = cam_to_world.apply(t_hit * dir);
          const Eigen::Vector3d x_c = scene_deform_inverse(scene, time, hit_world);

          const double h = 1e-4;
          Eigen::Vector3d normal;
          for (int axis = 0; axis < 3; ++axis) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e(axis) = h;
            normal(axis) = world_sdf(hit_world + e) - world_sdf(hit_world - e);
          }
          normal.normalize();

          rgb.set(px, py, shade(x_c, normal, light_index));
          mask.px(px, py)[0] = 1.0;
          cse.set(px, py, x_c, true);

          if (f + 1 < scene.frames_per_video) {
            const Eigen::Vector3d next_world = scene_deform(scene, time + 1.0, x_c);
            const Eigen::Vector2d next_px = cam.project_cam(extr_next.apply(next_world));
            flow.set(px, py, next_px - pixel);
          }
        }
      }

      char fname[32];
      std::snprintf(fname, sizeof(fname), "%05d", f);
      write_png_rgb(vdir / "rgb" / (std::string(fname) + ".png"), rgb);
      write_png_gray(vdir / "mask" / (std::string(fname) + ".png"), mask);
      if (f + 1 < scene.frames_per_video)
        write_flow(vdir / "flow" / (std::string(fname) + ".bin"), flow);
      write_cse(vdir / "cse" / (std::string(fname) + ".bin"), cse);

      TriMesh gt = canonical_mesh;
      for (auto& vertex : gt.vertices) vertex = scene_deform(scene, time, vertex);
      save_obj(vdir / "gt" / (std::string(fname) + ".obj"), gt);

      ++summary.total_frames;
    }
  }
  return summary;
}

}  // namespace nrr
