// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nrr/dataset.h"
#include "nrr/rng.h"
#include "nrr/synthetic.h"

using namespace nrr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nrr_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_frame(const fs::path& vdir, int index, int size, bool with_flow) {
  char name[16];
  std::snprintf(name, sizeof(name), "%05d", index);
  ImageRGB rgb(size, size);
  for (double& v : rgb.data) v = 0.25;
  ImageGray mask(size, size);
  for (double& v : mask.data) v = 1.0;
  write_png_rgb(vdir / "rgb" / (std::string(name) + ".png"), rgb);
  write_png_gray(vdir / "mask" / (std::string(name) + ".png"), mask);
  if (with_flow) {
    ImageFlow flow(size, size);
    write_flow(vdir / "flow" / (std::string(name) + ".bin"), flow);
  }
}

void write_camera(const fs::path& vdir, int frames) {
  std::ofstream cam(vdir / "camera.txt");
  cam << "8 8 2 2\n";
  for (int f = 0; f < frames; ++f) cam << "1 0 0 0 1 0 0 0 1 0 0 2\n";
}

void make_video(const fs::path& root, const std::string& name, int frames, int size = 4) {
  const fs::path vdir = root / name;
  for (const char* sub : {"rgb", "mask", "flow"}) fs::create_directories(vdir / sub);
  for (int f = 0; f < frames; ++f) write_frame(vdir, f, size, f + 1 < frames);
  write_camera(vdir, frames);
}

}  // namespace

TEST_CASE("two-video fixture: global indexing and the final-frame flow rule") {
  TempDir dir("load2");
  make_video(dir.path, "a", 3);
  make_video(dir.path, "b", 2);
  const VideoCollection data = load_dataset(dir.path);
  CHECK(data.total_frames == 5);
  REQUIRE(data.videos.size() == 2);
  CHECK(data.frame(2).flow_to_next.has_value() == false);  // final frame of video a
  CHECK(data.frame(4).flow_to_next.has_value() == false);  // final frame of video b
  for (int t : {0, 1, 3}) CHECK(data.frame(t).flow_to_next.has_value());
  CHECK(data.frame(3).video == 1);
  CHECK(data.frame(3).frame_in_video == 0);
  CHECK(data.next_in_video(2) == -1);
  CHECK(data.next_in_video(3) == 4);
  CHECK(data.frame(0).init_root_pose.has_value());
}

TEST_CASE("load errors name the offending file") {
  TempDir dir("loaderr");
  CHECK_THROWS_AS(load_dataset(dir.path / "missing"), DataError);
  CHECK_THROWS_AS(load_dataset(dir.path), DataError);  // empty directory

  make_video(dir.path, "v", 2);
  fs::remove(dir.path / "v" / "mask" / "00001.png");
  CHECK_THROWS_AS(load_dataset(dir.path), DataError);
}

TEST_CASE("non-contiguous frame numbering is rejected") {
  TempDir dir("gap");
  make_video(dir.path, "v", 2);
  fs::rename(dir.path / "v" / "rgb" / "00001.png", dir.path / "v" / "rgb" / "00002.png");
  try {
    load_dataset(dir.path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("non-contiguous") != std::string::npos);
  }
}

TEST_CASE("flow present on a final frame is rejected") {
  TempDir dir("flowend");
  make_video(dir.path, "v", 2);
  ImageFlow flow(4, 4);
  write_flow(dir.path / "v" / "flow" / "00001.bin", flow);
  CHECK_THROWS_AS(load_dataset(dir.path), DataError);
}

TEST_CASE("raster round trips: flow and cse are bit exact, png within quantization") {
  TempDir dir("raster");
  RngStream rng(3);
  ImageFlow flow(6, 5);
  for (double& v : flow.data) v = rng.uniform(-3.0, 3.0);
  write_flow(dir.path / "f.bin", flow);
  const ImageFlow flow2 = read_flow(dir.path / "f.bin");
  for (size_t i = 0; i < flow.data.size(); ++i)
    CHECK(static_cast<float>(flow.data[i]) == static_cast<float>(flow2.data[i]));

  CseMap cse(6, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x)
      cse.set(x, y, Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()), (x + y) % 2 == 0);
  write_cse(dir.path / "c.bin", cse);
  const CseMap cse2 = read_cse(dir.path / "c.bin");
  CHECK(cse.points == cse2.points);
  CHECK(cse.valid == cse2.valid);

  ImageRGB img(7, 4);
  for (double& v : img.data) v = rng.uniform();
  write_png_rgb(dir.path / "i.png", img);
  const ImageRGB img2 = read_png_rgb(dir.path / "i.png");
  double worst = 0.0;
  for (size_t i = 0; i < img.data.size(); ++i)
    worst = std::max(worst, std::abs(img.data[i] - img2.data[i]));
  CHECK(worst <= 0.5 / 255.0 + 1e-12);
  // A second write/read cycle reproduces the quantized raster bit-exactly.
  write_png_rgb(dir.path / "i2.png", img2);
  const ImageRGB img3 = read_png_rgb(dir.path / "i2.png");
  CHECK(img2.data == img3.data);
}

TEST_CASE("bilinear lookups interpolate between pixel centers") {
  ImageGray img(2, 1);
  img.px(0, 0)[0] = 0.0;
  img.px(1, 0)[0] = 1.0;
  CHECK(img.bilinear(0.5, 0.5)(0) == doctest::Approx(0.0));
  CHECK(img.bilinear(1.0, 0.5)(0) == doctest::Approx(0.5));
  CHECK(img.bilinear(1.5, 0.5)(0) == doctest::Approx(1.0));
}

TEST_CASE("project: closed forms and the homogeneous-matrix oracle") {
  CameraModel cam;
  cam.fx = cam.fy = 1.0;
  cam.cx = cam.cy = 0.0;
  cam.width = cam.height = 2;
  cam.extrinsics = {RigidTransform::identity()};
  CHECK((project(cam, 0, Eigen::Vector3d(0, 0, 1)) - Eigen::Vector2d(0, 0)).norm() == 0.0);
  CHECK((project(cam, 0, Eigen::Vector3d(1, 0, 1)) - Eigen::Vector2d(1, 0)).norm() == 0.0);
  CHECK_THROWS_AS(project(cam, 0, Eigen::Vector3d(0, 0, -1)), BehindCameraError);
  CHECK_THROWS_AS(project(cam, 3, Eigen::Vector3d(0, 0, 1)), std::invalid_argument);

  RngStream rng(9);
  CameraModel random_cam;
  random_cam.fx = 37.0;
  random_cam.fy = 41.0;
  random_cam.cx = 15.5;
  random_cam.cy = 16.5;
  random_cam.extrinsics = {RigidTransform::from_axis_angle(
      Eigen::Vector3d(0.2, -0.4, 0.1), Eigen::Vector3d(0.1, 0.2, 2.0))};
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = random_cam.extrinsics[0].rotation;
    p.col(3) = random_cam.extrinsics[0].translation;
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    k(0, 0) = random_cam.fx;
    k(1, 1) = random_cam.fy;
    k(0, 2) = random_cam.cx;
    k(1, 2) = random_cam.cy;
    const Eigen::Vector3d h = k * (p * x.homogeneous());
    if (h.z() <= 0) continue;
    const Eigen::Vector2d expect(h.x() / h.z(), h.y() / h.z());
    CHECK((project(random_cam, 0, x) - expect).norm() < 1e-10);
  }
}

TEST_CASE("project/unproject round trip") {
  CameraModel cam;
  cam.fx = 20.0;
  cam.fy = 22.0;
  cam.cx = 8.0;
  cam.cy = 8.5;
  RngStream rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d x(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                            rng.uniform(0.5, 3.0));
    const Eigen::Vector2d px = cam.project_cam(x);
    const Eigen::Vector3d dir = cam.ray_dir(px);
    const Eigen::Vector3d back = dir * (x.z() / dir.z());
    CHECK((back - x).norm() < 1e-10);
  }
}

TEST_CASE("static sphere, static camera: flow rasters are exactly zero") {
  TempDir dir("static");
  SyntheticScene scene;
  scene.shape = ShapeKind::kSphere;
  scene.videos = 1;
  scene.frames_per_video = 3;
  scene.image_size = 16;
  scene.bend_amplitude = 0.0;
  scene.bulge_amplitude = 0.0;
  scene.camera_path = CameraPath::kStatic;
  scene.camera_radius = 2.0;
  scene.lights = 1;
  generate_synthetic(scene, dir.path);
  const VideoCollection data = load_dataset(dir.path);
  for (int t = 0; t < 2; ++t) {
    REQUIRE(data.frame(t).flow_to_next.has_value());
    for (double v : data.frame(t).flow_to_next->data) CHECK(v == 0.0);
  }
  // Masks are nonempty and the init poses are present.
  double mask_sum = 0.0;
  for (double v : data.frame(0).mask.data) mask_sum += v;
  CHECK(mask_sum > 10.0);
  CHECK(data.frame(0).init_root_pose.has_value());
}

TEST_CASE("camera translation at unit depth: flow matches the pinhole oracle") {
  TempDir dir("translate");
  SyntheticScene scene;
  scene.shape = ShapeKind::kSphere;
  scene.sphere_radius = 0.06;
  scene.videos = 1;
  scene.frames_per_video = 2;
  scene.image_size = 32;
  scene.bend_amplitude = 0.0;
  scene.bulge_amplitude = 0.0;
  scene.camera_path = CameraPath::kTranslate;
  scene.camera_radius = 1.0;
  scene.translate_step = 0.01;
  scene.focal = 64.0;
  scene.lights = 1;
  generate_synthetic(scene, dir.path);
  const VideoCollection data = load_dataset(dir.path);
  const FrameObservation& obs = data.frame(0);
  REQUIRE(obs.flow_to_next.has_value());

  int checked = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (obs.mask.px(x, y)[0] < 0.5) continue;
      const Eigen::Vector2d flow = obs.flow_to_next->at(x, y);
      // Per-pixel depth via the ray through the hit point: flow_x = -f*dx/z.
      const Eigen::Vector3d x_c = obs.cse->point(x, y);
      const Eigen::Vector3d cam_pt =
          obs.init_root_pose->apply(scene_deform(scene, 0.0, x_c));
      const double expect = -scene.focal * scene.translate_step / cam_pt.z();
      CHECK(flow.x() == doctest::Approx(expect).epsilon(0.02));
      CHECK(std::abs(flow.y()) < 0.05);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("bending capsule: flow matches central finite differences of the track") {
  TempDir dir("capflow");
  SyntheticScene scene;
  scene.shape = ShapeKind::kCapsule;
  scene.videos = 1;
  scene.frames_per_video = 3;
  scene.image_size = 24;
  scene.bend_amplitude = 0.25;
  scene.bulge_amplitude = 0.02;
  scene.motion_period = 40.0;
  scene.camera_path = CameraPath::kStatic;
  scene.camera_radius = 2.0;
  scene.lights = 1;
  generate_synthetic(scene, dir.path);
  const VideoCollection data = load_dataset(dir.path);
  const FrameObservation& obs = data.frame(1);  // mid frame, time 1 -> 2
  REQUIRE(obs.flow_to_next.has_value());
  const CameraModel& cam = data.videos[0].camera;

  int checked = 0;
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) {
      if (obs.mask.px(x, y)[0] < 0.5 || !obs.cse->is_valid(x, y)) continue;
      const Eigen::Vector3d x_c = obs.cse->point(x, y);
      // Central finite difference of the projected track about t + 1/2.
      const double h = 1e-3;
      auto track = [&](double time) {
        return cam.project_cam(
            scene_camera(scene, 0, time).apply(scene_deform(scene, time, x_c)));
      };
      const Eigen::Vector2d fd = (track(1.5 + h) - track(1.5 - h)) / (2.0 * h);
      const Eigen::Vector2d flow = obs.flow_to_next->at(x, y);
      CHECK((flow - fd).norm() < 0.05);
      ++checked;
    }
  }
  CHECK(checked > 30);
}

TEST_CASE("generated CSE points lie on the canonical surface") {
  TempDir dir("cse");
  SyntheticScene scene;
  scene.shape = ShapeKind::kCapsule;
  scene.videos = 1;
  scene.frames_per_video = 2;
  scene.image_size = 16;
  scene.bend_amplitude = 0.3;
  scene.camera_radius = 2.0;
  scene.lights = 1;
  generate_synthetic(scene, dir.path);
  const VideoCollection data = load_dataset(dir.path);
  const FrameObservation& obs = data.frame(0);
  REQUIRE(obs.cse.has_value());
  int checked = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (obs.cse->is_valid(x, y)) {
        CHECK(std::abs(scene_sdf(scene, obs.cse->point(x, y))) < 1e-5);
        ++checked;
      }
  CHECK(checked > 5);
}

TEST_CASE("ground-truth deformation inverts on the object") {
  SyntheticScene scene;
  scene.bend_amplitude = 0.5;
  scene.bulge_amplitude = 0.05;
  RngStream rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Vector3d x(rng.uniform(-0.35, 0.35), rng.uniform(-0.15, 0.15),
                      rng.uniform(-0.15, 0.15));
    const double time = rng.uniform(0.0, 30.0);
    const Eigen::Vector3d y = scene_deform(scene, time, x);
    CHECK((scene_deform_inverse(scene, time, y) - x).norm() < 1e-9);
  }
}

TEST_CASE("invalid scene names and degenerate cameras fail loudly") {
  CHECK_THROWS_AS(parse_shape("torus"), GenerationError);
  try {
    parse_shape("torus");
  } catch (const GenerationError& e) {
    CHECK(std::string(e.what()).find("capsule") != std::string::npos);
  }
  SyntheticScene close_cam;
  close_cam.camera_radius = 0.3;  // object fills the frustum
  close_cam.videos = 1;
  close_cam.frames_per_video = 1;
  close_cam.image_size = 8;
  TempDir dir("degenerate");
  CHECK_THROWS_AS(generate_synthetic(close_cam, dir.path), GenerationError);
}
