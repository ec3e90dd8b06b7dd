#pragma once

#include <filesystem>
#include <vector>

#include "isoret/mesh.hpp"

namespace isoret {

/// Dense symmetric all-pairs distance matrix (meters).
///
/// Held in double precision; the on-disk cache stores 32-bit values.
class GeodesicMatrix {
 public:
  GeodesicMatrix() = default;
  GeodesicMatrix(std::size_t n, std::vector<double> data);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  const double* row(std::size_t i) const { return d_.data() + i * n_; }
  const std::vector<double>& data() const { return d_; }

  /// Rounds every entry to the nearest 32-bit float, the precision of the cache.
  GeodesicMatrix quantized() const;

  friend bool operator==(const GeodesicMatrix&, const GeodesicMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

/// Compressed adjacency over mesh edges with Euclidean edge weights.
class EdgeGraph {
 public:
  EdgeGraph(std::size_t num_vertices, const EdgeSet& edges);

  std::size_t size() const { return offsets_.size() - 1; }
  /// Dijkstra; ties in the queue break by smaller vertex index. Unreachable
  /// vertices get +infinity.
  std::vector<double> distances_from(Index src) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Index> targets_;
  std::vector<double> weights_;
};

std::vector<double> single_source(const TriMesh& mesh, const EdgeSet& edges, Index src);

/// All-pairs edge-graph geodesics. `threads` > 1 splits sources across worker
/// threads; the result does not depend on the thread count. Throws
/// ValidationError for disconnected meshes.
GeodesicMatrix geodesic_matrix(const TriMesh& mesh, unsigned threads = 1);

/// Euclidean distance matrix of a point set (used to feed MDS with realizable input).
GeodesicMatrix euclidean_matrix(std::span<const Vec3> points);

/// Cache layout: "GEOD01\0\0", u32 n, n*n float32 row-major, all little-endian.
void save_geodesic_cache(const GeodesicMatrix& geo, const std::filesystem::path& path);
GeodesicMatrix load_geodesic_cache(const std::filesystem::path& path);

}  // namespace isoret
