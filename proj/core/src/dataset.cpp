// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/dataset.h"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace nrr {

namespace fs = std::filesystem;

const FrameObservation& VideoCollection::frame(int global_index) const {
  return const_cast<VideoCollection*>(this)->frame(global_index);
}

FrameObservation& VideoCollection::frame(int global_index) {
  for (auto& v : videos) {
    if (global_index < static_cast<int>(v.frames.size())) return v.frames[global_index];
    global_index -= static_cast<int>(v.frames.size());
  }
  throw std::invalid_argument("VideoCollection::frame: index out of range");
}

const Video& VideoCollection::video_of(int global_index) const {
  for (const auto& v : videos) {
    if (global_index < static_cast<int>(v.frames.size())) return v;
    global_index -= static_cast<int>(v.frames.size());
  }
  throw std::invalid_argument("VideoCollection::video_of: index out of range");
}

int VideoCollection::next_in_video(int global_index) const {
  const FrameObservation& f = frame(global_index);
  const Video& v = videos[f.video];
  if (f.frame_in_video + 1 >= static_cast<int>(v.frames.size())) return -1;
  return global_index + 1;
}

namespace {

std::string frame_name(int i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d%s", i, ext);
  return buf;
}

int count_contiguous_frames(const fs::path& rgb_dir) {
  if (!fs::is_directory(rgb_dir)) throw DataError("missing rgb directory: " + rgb_dir.string());
  std::vector<int> indices;
  for (const auto& e : fs::directory_iterator(rgb_dir)) {
    if (e.path().extension() != ".png") continue;
    try {
      indices.push_back(std::stoi(e.path().stem().string()));
    } catch (...) {
      throw DataError("unparsable frame name: " + e.path().string());
    }
  }
  if (indices.empty()) throw DataError("no frames in " + rgb_dir.string());
  std::sort(indices.begin(), indices.end());
  for (size_t i = 0; i < indices.size(); ++i)
    if (indices[i] != static_cast<int>(i))
      throw DataError("non-contiguous frame numbering in " + rgb_dir.string() + " (expected " +
                      frame_name(static_cast<int>(i), ".png") + ")");
  return static_cast<int>(indices.size());
}

void parse_camera_file(const fs::path& path, int frames, CameraModel* cam,
                       std::vector<RigidTransform>* poses) {
  std::ifstream in(path);
  if (!in) throw DataError("missing camera file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty camera file: " + path.string());
  {
    std::istringstream ss(line);
    if (!(ss >> cam->fx >> cam->fy >> cam->cx >> cam->cy))
      throw DataError("bad intrinsics line in " + path.string());
  }
  if (cam->fx <= 0.0 || cam->fy <= 0.0)
    throw DataError("nonpositive focal length in " + path.string());
  int read = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ss(line);
    RigidTransform g;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (!(ss >> g.rotation(r, c))) throw DataError("bad pose line in " + path.string());
    for (int r = 0; r < 3; ++r)
      if (!(ss >> g.translation(r))) throw DataError("bad pose line in " + path.string());
    poses->push_back(g);
    ++read;
  }
  if (read != 0 && read != frames)
    throw DataError("camera file " + path.string() + " has " + std::to_string(read) +
                    " pose lines for " + std::to_string(frames) + " frames");
}

}  // namespace

VideoCollection load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());

  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw DataError("no videos under " + root.string());

  VideoCollection collection;
  int global = 0;
  for (size_t vi = 0; vi < names.size(); ++vi) {
    const fs::path vdir = root / names[vi];
    Video video;
    video.name = names[vi];
    const int frames = count_contiguous_frames(vdir / "rgb");

    std::vector<RigidTransform> poses;
    parse_camera_file(vdir / "camera.txt", frames, &video.camera, &poses);

    for (int f = 0; f < frames; ++f) {
      FrameObservation obs;
      obs.video = static_cast<int>(vi);
      obs.frame_in_video = f;
      obs.global_index = global++;
      obs.rgb = read_png_rgb(vdir / "rgb" / frame_name(f, ".png"));

      const fs::path mask_path = vdir / "mask" / frame_name(f, ".png");
      if (!fs::exists(mask_path)) throw DataError("missing mask: " + mask_path.string());
      obs.mask = read_png_gray(mask_path);
      for (double& v : obs.mask.data) v = v >= 0.5 ? 1.0 : 0.0;

      if (obs.mask.width != obs.rgb.width || obs.mask.height != obs.rgb.height)
        throw DataError("raster dimension mismatch: " + mask_path.string());

      const bool final_frame = (f + 1 == frames);
      const fs::path flow_path = vdir / "flow" / frame_name(f, ".bin");
      if (final_frame) {
        if (fs::exists(flow_path))
          throw DataError("unexpected flow for final frame: " + flow_path.string());
      } else {
        if (!fs::exists(flow_path)) throw DataError("missing flow: " + flow_path.string());
        obs.flow_to_next = read_flow(flow_path);
        if (obs.flow_to_next->width != obs.rgb.width || obs.flow_to_next->height != obs.rgb.height)
          throw DataError("raster dimension mismatch: " + flow_path.string());
      }

      const fs::path cse_path = vdir / "cse" / frame_name(f, ".bin");
      if (fs::exists(cse_path)) {
        obs.cse = read_cse(cse_path);
        if (obs.cse->width != obs.rgb.width || obs.cse->height != obs.rgb.height)
          throw DataError("raster dimension mismatch: " + cse_path.string());
      }

      if (!poses.empty()) obs.init_root_pose = poses[f];
      video.frames.push_back(std::move(obs));
    }

    video.camera.width = video.frames[0].rgb.width;
    video.camera.height = video.frames[0].rgb.height;
    if (video.camera.cx < 0 || video.camera.cx > video.camera.width || video.camera.cy < 0 ||
        video.camera.cy > video.camera.height)
      throw DataError("principal point outside image for video " + video.name);
    video.camera.extrinsics = poses;
    collection.videos.push_back(std::move(video));
  }
  collection.total_frames = global;
  return collection;
}

}  // namespace nrr
