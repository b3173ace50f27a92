// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <functional>
#include <vector>

namespace nrr {

struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Eigen::Vector3d> colors;          // optional, per vertex
  std::vector<Eigen::VectorXd> embeddings;      // optional, per vertex

  bool empty() const { return faces.empty(); }
  Eigen::AlignedBox3d bounds() const;
  double area() const;
  // V - E + F with edges counted once per undirected pair.
  int euler_characteristic() const;
};

struct GridBounds {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(-0.6);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(0.6);
};

// Zero level set of a scalar field sampled on an (r+1)^3 lattice over
// `bounds` (index order x fastest, then y, then z), with linear interpolation
// along cell edges. A sign-constant field yields an empty mesh.
TriMesh marching_cubes_grid(const std::vector<double>& values, int resolution,
                            const GridBounds& bounds);

// Convenience wrapper that samples `sdf` on the lattice first.
TriMesh marching_cubes(const std::function<double(const Eigen::Vector3d&)>& sdf, int resolution,
                       const GridBounds& bounds);

// ASCII OBJ. Vertex colors, when present, are written as the common
// "v x y z r g b" extension and read back if found.
void save_obj(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh load_obj(const std::filesystem::path& path);

}  // namespace nrr
