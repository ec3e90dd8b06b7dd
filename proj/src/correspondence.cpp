#include "isoret/correspondence.hpp"

#include <cmath>

#include "isoret/errors.hpp"
#include "isoret/spatial.hpp"

namespace isoret {

void inverse_distance_weights(std::span<const double> distances, std::span<double> weights) {
  if (distances.empty() || distances.size() != weights.size()) {
    throw ArgumentError("inverse_distance_weights: size mismatch");
  }
  if (distances[0] < kSnapDistance) {
    std::fill(weights.begin(), weights.end(), 0.0);
    weights[0] = 1.0;
    return;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < distances.size(); ++j) {
    weights[j] = 1.0 / distances[j];
    total += weights[j];
  }
  for (double& w : weights) w /= total;
}

RegisteredPair::RegisteredPair(const TriMesh& surface, const TriMesh& template_instance,
                               const VertexEmbedding& template_embedding)
    : surface_(&surface), instance_(&template_instance), embedding_(&template_embedding) {
  require_template_match(template_embedding, template_instance, "registered template instance");
}

VertexEmbedding extrapolate_embedding(const RegisteredPair& pair, int k, ExtrapolationStats* stats) {
  const TriMesh& inst = pair.template_instance();
  const VertexEmbedding& src = pair.template_embedding();
  if (k <= 0 || static_cast<std::size_t>(k) > inst.num_vertices()) {
    throw ArgumentError("extrapolation k=" + std::to_string(k) + " must be in [1, " +
                        std::to_string(inst.num_vertices()) + "]");
  }
  const KdTree3 tree(inst.vertices);
  const auto& verts = pair.surface().vertices;

  VertexEmbedding out;
  out.template_hash = src.template_hash;
  out.phi.setZero(static_cast<Eigen::Index>(verts.size()), src.d());
  ExtrapolationStats local;
  std::vector<double> dist(static_cast<std::size_t>(k)), w(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const auto nn = tree.knn(verts[i], static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) dist[j] = std::sqrt(nn[j].dist2);
    inverse_distance_weights(dist, w);
    local.max_neighbor_distance = std::max(local.max_neighbor_distance, dist.back());
    if (w[0] == 1.0 && dist[0] < kSnapDistance) ++local.snapped;
    auto row = out.phi.row(static_cast<Eigen::Index>(i));
    for (int j = 0; j < k; ++j) {
      if (w[j] != 0.0) row += w[j] * src.phi.row(nn[j].index);
    }
  }
  if (stats) *stats = local;
  return out;
}

CorrespondenceMap correspond(const VertexEmbedding& garment_emb, const VertexEmbedding& target_emb,
                             std::span<const Vec3> target_vertices, int k) {
  if (garment_emb.d() != target_emb.d()) {
    throw ArgumentError("feature dimension mismatch: garment " + std::to_string(garment_emb.d()) + " vs target " +
                        std::to_string(target_emb.d()));
  }
  if (static_cast<Eigen::Index>(target_vertices.size()) != target_emb.n()) {
    throw ArgumentError("target has " + std::to_string(target_vertices.size()) + " vertices but " +
                        std::to_string(target_emb.n()) + " feature rows");
  }
  if (k <= 0 || k > target_emb.n()) {
    throw ArgumentError("correspondence k=" + std::to_string(k) + " must be in [1, " +
                        std::to_string(target_emb.n()) + "]");
  }
  const EmbeddingKnn index(target_emb.phi);
  const auto knn = index.query(garment_emb.phi, static_cast<std::size_t>(k));

  CorrespondenceMap corr;
  corr.k = static_cast<std::size_t>(k);
  const std::size_t n = knn.size();
  corr.points.assign(n, Vec3::Zero());
  corr.neighbors.resize(n * corr.k);
  corr.weights.resize(n * corr.k);
  std::vector<double> dist(corr.k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < corr.k; ++j) {
      dist[j] = std::sqrt(knn[i][j].dist2);
      corr.neighbors[i * corr.k + j] = knn[i][j].index;
    }
    std::span<double> w(corr.weights.data() + i * corr.k, corr.k);
    inverse_distance_weights(dist, w);
    Vec3 x = Vec3::Zero();
    for (std::size_t j = 0; j < corr.k; ++j) {
      if (w[j] != 0.0) x += w[j] * target_vertices[knn[i][j].index];
    }
    corr.points[i] = x;
  }
  return corr;
}

CoarseResult coarse_retarget(const TriMesh& garment, const CorrespondenceMap& corr) {
  if (corr.size() != garment.num_vertices()) {
    throw ArgumentError("correspondence covers " + std::to_string(corr.size()) + " vertices, garment has " +
                        std::to_string(garment.num_vertices()));
  }
  CoarseResult r;
  r.mesh.faces = garment.faces;
  r.mesh.vertices = corr.points;
  try {
    validate(r.mesh);
  } catch (const ValidationError& e) {
    r.warnings.push_back(std::string("coarse mesh is degenerate: ") + e.what());
  }
  return r;
}

void save_correspondence(const CorrespondenceMap& corr, const std::filesystem::path& path) {
  ByteWriter w;
  w.magic(std::string_view("CORR01\0\0", 8));
  w.u32(static_cast<std::uint32_t>(corr.size()));
  w.u32(static_cast<std::uint32_t>(corr.k));
  for (std::size_t i = 0; i < corr.size(); ++i) {
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(corr.points[i][c]));
    for (Index id : corr.neighbors_of(i)) w.u32(id);
    for (double x : corr.weights_of(i)) w.f32(static_cast<float>(x));
  }
  w.write_file(path);
}

CorrespondenceMap load_correspondence(const std::filesystem::path& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic(std::string_view("CORR01\0\0", 8));
  const std::size_t n = r.u32();
  CorrespondenceMap corr;
  corr.k = r.u32();
  if (corr.k == 0) throw FormatError(r.source() + ": k must be positive");
  const std::size_t per_vertex = 12 + corr.k * 8;
  if (r.remaining() != n * per_vertex) {
    throw FormatError(r.source() + ": expected " + std::to_string(n * per_vertex) + " payload bytes, found " +
                      std::to_string(r.remaining()));
  }
  corr.points.resize(n);
  corr.neighbors.resize(n * corr.k);
  corr.weights.resize(n * corr.k);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) corr.points[i][c] = r.f32();
    for (std::size_t j = 0; j < corr.k; ++j) corr.neighbors[i * corr.k + j] = r.u32();
    for (std::size_t j = 0; j < corr.k; ++j) corr.weights[i * corr.k + j] = r.f32();
  }
  return corr;
}

}  // namespace isoret
