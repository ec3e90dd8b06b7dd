#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "isoret/binary_io.hpp"
#include "isoret/geodesics.hpp"
#include "isoret/spatial.hpp"

namespace isoret {

/// Per-vertex d-dimensional features, one row per vertex.
///
/// `template_hash` is the topology hash of the canonical template the features
/// were built from. Extrapolated embeddings (garment, target) keep the hash of
/// their source template.
struct VertexEmbedding {
  RowMatrix phi;
  Digest template_hash{};
  Eigen::VectorXd eigenvalues;         // empty when loaded from disk
  std::vector<std::string> warnings;

  Eigen::Index n() const { return phi.rows(); }
  Eigen::Index d() const { return phi.cols(); }
};

inline constexpr int kDefaultEmbeddingDim = 128;

/// Classical MDS of `geo`: top-d eigenpairs of B = -1/2 J (D o D) J, columns
/// scaled by sqrt(lambda). Non-positive eigenvalues yield zero columns and a
/// warning. Each column is sign-normalized so its largest-magnitude entry is
/// non-negative.
VertexEmbedding isomap(const GeodesicMatrix& geo, int d, const Digest& template_hash = {});

/// Cache layout: "ISOEMB01", u32 n, u32 d, 32-byte template hash,
/// n*d float32 row-major, all little-endian.
void save_embedding(const VertexEmbedding& e, const std::filesystem::path& path);
VertexEmbedding load_embedding(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_embedding(const VertexEmbedding& e);

/// Throws ValidationError unless `mesh` has the topology the embedding was built on.
void require_template_match(const VertexEmbedding& e, const TriMesh& mesh, std::string_view what);

}  // namespace isoret
