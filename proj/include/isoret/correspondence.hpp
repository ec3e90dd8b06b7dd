#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "isoret/isomap.hpp"
#include "isoret/mesh.hpp"

namespace isoret {

inline constexpr int kDefaultNeighbors = 32;
/// Distances below this snap the inverse-distance average to the nearest sample.
inline constexpr double kSnapDistance = 1e-9;

/// Normalized inverse-distance weights for neighbors sorted by distance.
/// If the nearest distance is below kSnapDistance the weights are one-hot on it.
void inverse_distance_weights(std::span<const double> distances, std::span<double> weights);

/// A surface (garment or target) together with the template instance
/// registered to it and the canonical template embedding. Non-owning view:
/// the referenced objects must outlive it.
class RegisteredPair {
 public:
  RegisteredPair(const TriMesh& surface, const TriMesh& template_instance, const VertexEmbedding& template_embedding);

  const TriMesh& surface() const { return *surface_; }
  const TriMesh& template_instance() const { return *instance_; }
  const VertexEmbedding& template_embedding() const { return *embedding_; }

 private:
  const TriMesh* surface_;
  const TriMesh* instance_;
  const VertexEmbedding* embedding_;
};

struct ExtrapolationStats {
  double max_neighbor_distance = 0.0;  // farthest template vertex used, meters
  std::size_t snapped = 0;
};

/// Features for every surface vertex as the inverse-distance average of the
/// embeddings of its k Euclidean-nearest template-instance vertices.
VertexEmbedding extrapolate_embedding(const RegisteredPair& pair, int k, ExtrapolationStats* stats = nullptr);

/// Per garment vertex: the target point x_i and the k target vertices (with
/// weights) it was averaged from.
struct CorrespondenceMap {
  std::size_t k = 0;
  std::vector<Vec3> points;
  std::vector<Index> neighbors;  // size() * k, row-major
  std::vector<double> weights;   // size() * k

  std::size_t size() const { return points.size(); }
  std::span<const Index> neighbors_of(std::size_t i) const { return {neighbors.data() + i * k, k}; }
  std::span<const double> weights_of(std::size_t i) const { return {weights.data() + i * k, k}; }
};

/// Inverse-distance average of the target positions whose features are the k
/// nearest (L2 in feature space) to each garment feature row.
CorrespondenceMap correspond(const VertexEmbedding& garment_emb, const VertexEmbedding& target_emb,
                             std::span<const Vec3> target_vertices, int k);

struct CoarseResult {
  TriMesh mesh;
  std::vector<std::string> warnings;
};

/// Garment faces with every vertex replaced by its correspondence point.
CoarseResult coarse_retarget(const TriMesh& garment, const CorrespondenceMap& corr);

/// Sidecar layout: "CORR01\0\0", u32 n, u32 k, then per vertex 3 float32
/// position, k u32 neighbor ids, k float32 weights; little-endian.
void save_correspondence(const CorrespondenceMap& corr, const std::filesystem::path& path);
CorrespondenceMap load_correspondence(const std::filesystem::path& path);

}  // namespace isoret
