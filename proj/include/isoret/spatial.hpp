#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "isoret/mesh.hpp"

namespace isoret {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Neighbor {
  Index index = 0;
  double dist2 = 0.0;

  friend bool operator<(const Neighbor& x, const Neighbor& y) {
    return x.dist2 < y.dist2 || (x.dist2 == y.dist2 && x.index < y.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Squared distance accumulated in coordinate order; the KNN structures and
/// their brute-force references all use this exact expression.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

inline double squared_distance(const double* a, const double* b, Eigen::Index d) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < d; ++c) {
    const double t = a[c] - b[c];
    s += t * t;
  }
  return s;
}

/// Static 3D KD-tree. k-nearest queries return neighbors ordered by
/// (distance, index), identical to a full scan with the same ordering.
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(std::span<const Vec3> points);

  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;
  Neighbor nearest(const Vec3& query) const { return knn(query, 1).front(); }
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t begin = 0, end = 0;  // range into order_ for leaves
    std::int32_t left = -1, right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, std::size_t k, std::vector<Neighbor>& best) const;

  std::vector<Vec3> points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

/// Exact k-nearest neighbors in R^d (L2), for embedding rows.
///
/// Candidate distances come from a blocked Gram-matrix expansion; every
/// candidate within a rigorous rounding bound of the k-th is then re-scored with
/// squared_distance(), so results match a brute-force scan exactly.
class EmbeddingKnn {
 public:
  explicit EmbeddingKnn(const RowMatrix& points);

  std::vector<std::vector<Neighbor>> query(const RowMatrix& queries, std::size_t k) const;
  std::vector<Neighbor> query_one(const double* row, std::size_t k) const;

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  const RowMatrix& points() const { return points_; }

 private:
  RowMatrix points_;
  Eigen::VectorXd sq_norms_;
  double max_sq_norm_ = 0.0;
};

/// Closest point to p on triangle (a, b, c).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct SurfaceHit {
  Index face = 0;
  double dist2 = 0.0;
  Vec3 point = Vec3::Zero();
};

/// AABB hierarchy over mesh triangles for closest-point queries.
class TriangleBvh {
 public:
  explicit TriangleBvh(const TriMesh& mesh);

  SurfaceHit closest(const Vec3& p) const;

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& p, SurfaceHit& best) const;

  std::vector<std::array<Vec3, 3>> tris_;
  std::vector<Index> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

}  // namespace isoret
