#include "isoret/spatial.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "isoret/errors.hpp"

namespace isoret {

namespace {

constexpr std::uint32_t kLeafSize = 8;

double box_distance2(const Vec3& q, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double t = q[c] < lo[c] ? q[c] - lo[c] : (q[c] > hi[c] ? q[c] - hi[c] : 0.0);
    s += t * t;
  }
  return s;
}

void insert_bounded(std::vector<Neighbor>& best, std::size_t k, const Neighbor& cand) {
  if (best.size() == k && !(cand < best.back())) return;
  auto pos = std::upper_bound(best.begin(), best.end(), cand);
  best.insert(pos, cand);
  if (best.size() > k) best.pop_back();
}

}  // namespace

KdTree3::KdTree3(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), Index{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree3::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.lo = points_[order_[begin]];
  node.hi = node.lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_[order_[i]]);
    node.hi = node.hi.cwiseMax(points_[order_[i]]);
  }
  node.begin = begin;
  node.end = end;
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
  });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree3::search(std::int32_t id, const Vec3& q, std::size_t k, std::vector<Neighbor>& best) const {
  const Node& node = nodes_[id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Index p = order_[i];
      insert_bounded(best, k, {p, squared_distance(q, points_[p])});
    }
    return;
  }
  const double dl = box_distance2(q, nodes_[node.left].lo, nodes_[node.left].hi);
  const double dr = box_distance2(q, nodes_[node.right].lo, nodes_[node.right].hi);
  const std::int32_t first = dl <= dr ? node.left : node.right;
  const std::int32_t second = dl <= dr ? node.right : node.left;
  const double d_first = std::min(dl, dr);
  const double d_second = std::max(dl, dr);
  // Boxes at exactly the current worst distance are still visited so that
  // equal-distance points with smaller indices win.
  if (best.size() < k || d_first <= best.back().dist2) search(first, q, k, best);
  if (best.size() < k || d_second <= best.back().dist2) search(second, q, k, best);
}

std::vector<Neighbor> KdTree3::knn(const Vec3& query, std::size_t k) const {
  if (k == 0 || k > points_.size()) {
    throw ArgumentError("knn: k=" + std::to_string(k) + " must be in [1, " + std::to_string(points_.size()) + "]");
  }
  std::vector<Neighbor> best;
  best.reserve(k + 1);
  search(0, query, k, best);
  return best;
}

EmbeddingKnn::EmbeddingKnn(const RowMatrix& points) : points_(points) {
  sq_norms_ = points_.rowwise().squaredNorm();
  max_sq_norm_ = sq_norms_.size() > 0 ? sq_norms_.maxCoeff() : 0.0;
}

std::vector<Neighbor> EmbeddingKnn::query_one(const double* row, std::size_t k) const {
  RowMatrix q = Eigen::Map<const RowMatrix>(row, 1, points_.cols());
  return std::move(query(q, k).front());
}

std::vector<std::vector<Neighbor>> EmbeddingKnn::query(const RowMatrix& queries, std::size_t k) const {
  const Eigen::Index n = points_.rows();
  const Eigen::Index d = points_.cols();
  if (queries.cols() != d) {
    throw ArgumentError("embedding knn: query dimension " + std::to_string(queries.cols()) +
                        " != index dimension " + std::to_string(d));
  }
  if (k == 0 || static_cast<Eigen::Index>(k) > n) {
    throw ArgumentError("embedding knn: k=" + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");
  }

  constexpr double kEps = std::numeric_limits<double>::epsilon();
  const double slack = 8.0 * static_cast<double>(d + 4) * kEps;
  constexpr Eigen::Index kChunk = 256;

  std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(queries.rows()));
  std::vector<double> approx(static_cast<std::size_t>(n));
  std::vector<double> sorted(static_cast<std::size_t>(n));
  std::vector<Neighbor> cand;

  for (Eigen::Index start = 0; start < queries.rows(); start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, queries.rows() - start);
    const Eigen::MatrixXd gram = queries.middleRows(start, rows) * points_.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double* q = queries.row(start + r).data();
      const double qn = queries.row(start + r).squaredNorm();
      for (Eigen::Index j = 0; j < n; ++j) approx[j] = qn + sq_norms_[j] - 2.0 * gram(r, j);
      sorted = approx;
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
      const double bound = slack * (qn + max_sq_norm_);
      const double cutoff = sorted[k - 1] + 2.0 * bound;
      cand.clear();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (approx[j] <= cutoff) {
          cand.push_back({static_cast<Index>(j), squared_distance(q, points_.row(j).data(), d)});
        }
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
      out[static_cast<std::size_t>(start + r)].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  return out;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk over vertices, edges, then face interior.
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

TriangleBvh::TriangleBvh(const TriMesh& mesh) {
  if (mesh.faces.empty()) throw ArgumentError("closest-point query needs a mesh with faces");
  tris_.reserve(mesh.num_faces());
  centroids_.reserve(mesh.num_faces());
  for (const Face& f : mesh.faces) {
    tris_.push_back({mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]});
    centroids_.push_back(face_centroid(mesh, f));
  }
  order_.resize(tris_.size());
  std::iota(order_.begin(), order_.end(), Index{0});
  nodes_.reserve(tris_.size());
  build(0, static_cast<std::uint32_t>(tris_.size()));
}

std::int32_t TriangleBvh::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.lo = tris_[order_[begin]][0];
  node.hi = node.lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    for (const Vec3& v : tris_[order_[i]]) {
      node.lo = node.lo.cwiseMin(v);
      node.hi = node.hi.cwiseMax(v);
    }
  }
  node.begin = begin;
  node.end = end;
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 4) return id;

  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    return centroids_[a][axis] < centroids_[b][axis] || (centroids_[a][axis] == centroids_[b][axis] && a < b);
  });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void TriangleBvh::search(std::int32_t id, const Vec3& p, SurfaceHit& best) const {
  const Node& node = nodes_[id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Index f = order_[i];
      const auto& t = tris_[f];
      const Vec3 q = closest_point_on_triangle(p, t[0], t[1], t[2]);
      const double d2 = squared_distance(p, q);
      if (d2 < best.dist2 || (d2 == best.dist2 && f < best.face)) best = {f, d2, q};
    }
    return;
  }
  const double dl = box_distance2(p, nodes_[node.left].lo, nodes_[node.left].hi);
  const double dr = box_distance2(p, nodes_[node.right].lo, nodes_[node.right].hi);
  const std::int32_t first = dl <= dr ? node.left : node.right;
  const std::int32_t second = dl <= dr ? node.right : node.left;
  if (std::min(dl, dr) <= best.dist2) search(first, p, best);
  if (std::max(dl, dr) <= best.dist2) search(second, p, best);
}

SurfaceHit TriangleBvh::closest(const Vec3& p) const {
  SurfaceHit best;
  best.dist2 = std::numeric_limits<double>::infinity();
  best.face = std::numeric_limits<Index>::max();
  search(0, p, best);
  return best;
}

}  // namespace isoret
