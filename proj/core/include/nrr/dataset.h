// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrr/camera.h"
#include "nrr/image.h"

namespace nrr {

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct FrameObservation {
  ImageRGB rgb;
  ImageGray mask;  // thresholded at 0.5 on load
  std::optional<ImageFlow> flow_to_next;
  std::optional<CseMap> cse;
  std::optional<RigidTransform> init_root_pose;
  int video = 0;
  int frame_in_video = 0;
  int global_index = 0;
};

struct Video {
  std::string name;
  CameraModel camera;
  std::vector<FrameObservation> frames;
};

struct VideoCollection {
  std::vector<Video> videos;
  int total_frames = 0;

  const FrameObservation& frame(int global_index) const;
  FrameObservation& frame(int global_index);
  const Video& video_of(int global_index) const;
  // Global index of the next frame in the same video, or -1 at video ends.
  int next_in_video(int global_index) const;
};

// Layout: root/<video>/rgb/%05d.png, mask/%05d.png, flow/%05d.bin,
// cse/%05d.bin, camera.txt, gt/%05d.obj. Frame numbering must be contiguous
// from 0; flow must be present exactly on non-final frames; cse is optional
// per frame. camera.txt holds "fx fy cx cy" on the first line, then
// optionally one line per frame with the init root pose (9 rotation entries
// row-major + 3 translation entries).
VideoCollection load_dataset(const std::filesystem::path& root);

}  // namespace nrr
