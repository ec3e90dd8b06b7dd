#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isoret/geodesics.hpp"
#include "isoret/isomap.hpp"
#include "isoret/mesh.hpp"

namespace isoret {

/// Mean per-vertex L2 distance between index-corresponding vertices.
double euclidean_distance(const TriMesh& pred, const TriMesh& gt);

struct NormalConsistency {
  double value = 0.0;         // mean of n_i . n^_i over counted vertices
  std::size_t excluded = 0;   // vertices with a zero normal on either side
};
NormalConsistency normal_consistency(const TriMesh& pred, const TriMesh& gt);

/// Generalized winding number of `body` around `p` (1 inside a closed,
/// outward-oriented surface, 0 outside).
double winding_number(const TriMesh& body, const Vec3& p);

/// Area fraction of garment faces whose centroid has winding number > 0.5
/// with respect to the body.
double interpenetration_ratio(const TriMesh& garment, const TriMesh& body);

struct ChamferResult {
  double sum = 0.0;   // sum of squared nearest distances, both directions
  double mean = 0.0;  // each direction averaged over its own set, then added
};
ChamferResult chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Mean distance from garment vertices to the closest point on the body surface.
double point_to_surface(const TriMesh& garment, const TriMesh& body);

struct RichnessResult {
  double score = 0.0;  // mean over vertices of (near + far) / 2
  double near = 0.0;
  double far = 0.0;
  std::vector<double> per_vertex;
};

/// Rank agreement between geodesic and feature-space neighborhoods.
///
/// For vertex i every other vertex is ranked by geodesic distance and by
/// feature distance (ties to the smaller index). For the k geodesically
/// nearest vertices the rank differences are clamped at k and summed, then
/// divided by k^2; the k geodesically farthest are handled the same way with
/// both rankings counted from the far end. 0 is perfect agreement, 1 the worst.
RichnessResult richness_score(const GeodesicMatrix& geo, const VertexEmbedding& emb, int k);

struct MetricsReport {
  std::optional<double> ed;
  std::optional<double> nc;
  std::optional<double> ir;
  std::optional<double> cd;
  std::optional<double> cd_mean;
  std::optional<double> p2s;
  std::size_t nc_excluded = 0;

  /// Single line of space-separated key=value pairs; missing metrics print NA.
  std::string record() const;
  /// Multi-line aligned table for humans.
  std::string table() const;
};

/// Fills the metrics that the given inputs allow: ED/NC/CD need `gt`,
/// IR/P2S need `body`.
MetricsReport evaluate_metrics(const TriMesh& pred, const TriMesh* gt, const TriMesh* body);

}  // namespace isoret
