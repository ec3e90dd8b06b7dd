#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "isoret/mesh.hpp"

namespace isoret {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// L = I - D^-1 A over the one-ring adjacency. Throws ValidationError for
/// isolated vertices.
SparseMatrix uniform_laplacian(const TriMesh& mesh);

/// delta = L V.
Coords laplacian_coords(const TriMesh& mesh);

Coords to_coords(std::span<const Vec3> v);
std::vector<Vec3> from_coords(const Coords& c);

/// Anchors used when none are given: every boundary-loop vertex plus a
/// farthest-point sample of `fraction` of the vertices (Euclidean, ties to the
/// smaller index). Returned sorted.
std::vector<Index> default_anchors(const TriMesh& mesh, double fraction = 0.05);

/// One vertex index per line.
std::vector<Index> load_anchor_list(const std::filesystem::path& path, std::size_t vertex_count);
void save_anchor_list(std::span<const Index> anchors, const std::filesystem::path& path);

struct DetailResult {
  TriMesh mesh;
  double normal_residual = 0.0;  // ||Lh^T (Lh V - dh)||_F
  double rhs_norm = 0.0;         // ||dh||_F
};

/// Least-squares solve of [L; w*1_anchors] V = [delta_source; w*anchor positions],
/// with L and delta from `source` and anchor positions taken from
/// `retargeted`. Both meshes must share faces. Throws ValidationError when a
/// connected component has no anchor.
DetailResult detail_integrate(const TriMesh& source, const TriMesh& retargeted, std::span<const Index> anchors,
                              double anchor_weight = 1.0);

}  // namespace isoret
