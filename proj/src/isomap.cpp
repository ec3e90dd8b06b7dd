#include "isoret/isomap.hpp"

#include <cmath>

#include "isoret/eigensolver.hpp"
#include "isoret/errors.hpp"

namespace isoret {

VertexEmbedding isomap(const GeodesicMatrix& geo, int d, const Digest& template_hash) {
  const auto n = static_cast<Eigen::Index>(geo.size());
  if (d <= 0) throw ArgumentError("embedding dimension must be positive, got " + std::to_string(d));
  if (d > n) {
    throw ArgumentError("embedding dimension " + std::to_string(d) + " exceeds vertex count " + std::to_string(n));
  }
  for (double v : geo.data()) {
    if (!std::isfinite(v)) throw ValidationError("distance matrix has non-finite entries");
  }

  // Double centering of squared distances.
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* row = geo.row(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = row[j] * row[j];
  }
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const double grand_mean = row_mean.mean();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      b(i, j) = -0.5 * (b(i, j) - row_mean[i] - row_mean[j] + grand_mean);
    }
  }

  const EigenResult eig = top_eigenpairs(b, d);

  VertexEmbedding e;
  e.template_hash = template_hash;
  e.eigenvalues = eig.values;
  e.phi.setZero(n, d);
  int dropped = 0;
  const double floor = 1e-12 * std::max(std::abs(eig.values[0]), 1e-300);
  for (int k = 0; k < d; ++k) {
    const double lambda = eig.values[k];
    if (!(lambda > floor)) {
      ++dropped;
      continue;
    }
    Eigen::VectorXd col = eig.vectors.col(k);
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0.0) col = -col;
    e.phi.col(k) = col * std::sqrt(lambda);
  }
  if (dropped > 0) {
    e.warnings.push_back("only " + std::to_string(d - dropped) + " of " + std::to_string(d) +
                         " requested eigenvalues are positive; remaining columns are zero");
  }
  return e;
}

std::vector<std::uint8_t> serialize_embedding(const VertexEmbedding& e) {
  ByteWriter w;
  w.magic("ISOEMB01");
  w.u32(static_cast<std::uint32_t>(e.n()));
  w.u32(static_cast<std::uint32_t>(e.d()));
  w.bytes(e.template_hash);
  for (Eigen::Index i = 0; i < e.n(); ++i)
    for (Eigen::Index j = 0; j < e.d(); ++j) w.f32(static_cast<float>(e.phi(i, j)));
  return w.data();
}

void save_embedding(const VertexEmbedding& e, const std::filesystem::path& path) {
  ByteWriter w;
  w.bytes(serialize_embedding(e));
  w.write_file(path);
}

VertexEmbedding load_embedding(const std::filesystem::path& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic("ISOEMB01");
  const std::size_t n = r.u32();
  const std::size_t d = r.u32();
  if (n == 0 || d == 0) throw FormatError(r.source() + ": embedding has zero size");
  VertexEmbedding e;
  r.bytes(e.template_hash);
  if (r.remaining() != n * d * 4) {
    throw FormatError(r.source() + ": expected " + std::to_string(n * d * 4) + " payload bytes, found " +
                      std::to_string(r.remaining()));
  }
  e.phi.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) e.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.f32();
  if (!e.phi.allFinite()) throw FormatError(r.source() + ": embedding contains non-finite values");
  return e;
}

void require_template_match(const VertexEmbedding& e, const TriMesh& mesh, std::string_view what) {
  if (static_cast<Eigen::Index>(mesh.num_vertices()) != e.n()) {
    throw ValidationError(std::string(what) + " has " + std::to_string(mesh.num_vertices()) +
                          " vertices but the embedding has " + std::to_string(e.n()) + " rows");
  }
  const Digest h = topology_hash(mesh);
  if (h != e.template_hash) {
    throw ValidationError(std::string(what) + " topology hash " + to_hex(h).substr(0, 16) +
                          " does not match embedding template hash " + to_hex(e.template_hash).substr(0, 16));
  }
}

}  // namespace isoret
