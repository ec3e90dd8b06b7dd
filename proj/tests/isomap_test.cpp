#include <gtest/gtest.h>

#include "isoret/errors.hpp"
#include "isoret/geodesics.hpp"
#include "isoret/isomap.hpp"
#include "testing.hpp"

namespace isoret {
namespace {

double row_distance(const RowMatrix& phi, Eigen::Index i, Eigen::Index j) { return (phi.row(i) - phi.row(j)).norm(); }

TEST(Isomap, ReproducesEuclideanDistances) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = testing::random_points(rng, 50);
    const VertexEmbedding e = isomap(euclidean_matrix(p), 3);
    ASSERT_EQ(e.d(), 3);
    for (Eigen::Index i = 0; i < 50; ++i)
      for (Eigen::Index j = 0; j < 50; ++j)
        EXPECT_NEAR(row_distance(e.phi, i, j), (p[i] - p[j]).norm(), 1e-6);
  }
}

TEST(Isomap, ColumnsCenteredAndSignNormalized) {
  const VertexEmbedding e = isomap(geodesic_matrix(testing::icosphere(2)), 8);
  for (Eigen::Index c = 0; c < e.d(); ++c) {
    EXPECT_NEAR(e.phi.col(c).sum(), 0.0, 1e-9);
    Eigen::Index arg = 0;
    e.phi.col(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GE(e.phi(arg, c), 0.0);
  }
  for (Eigen::Index c = 1; c < e.eigenvalues.size(); ++c) EXPECT_GE(e.eigenvalues(c - 1), e.eigenvalues(c));
}

TEST(Isomap, NonPositiveEigenvaluesGiveZeroColumnsAndWarning) {
  // Four points on a line are realizable in one dimension; the rest of the
  // spectrum is zero.
  std::vector<Vec3> p = {{0, 0, 0}, {1, 0, 0}, {3, 0, 0}, {7, 0, 0}};
  const VertexEmbedding e = isomap(euclidean_matrix(p), 3);
  EXPECT_GT(e.phi.col(0).norm(), 1.0);
  EXPECT_EQ(e.phi.col(1).norm(), 0.0);
  EXPECT_EQ(e.phi.col(2).norm(), 0.0);
  EXPECT_FALSE(e.warnings.empty());
}

TEST(Isomap, RejectsBadDimension) {
  const GeodesicMatrix g = geodesic_matrix(testing::tetrahedron());
  EXPECT_THROW(isomap(g, 0), ArgumentError);
  EXPECT_THROW(isomap(g, 5), ArgumentError);
}

TEST(EmbeddingFile, RoundTripKeepsFloat32AndHash) {
  testing::TempDir dir;
  const TriMesh m = testing::icosphere(1);
  const VertexEmbedding e = isomap(geodesic_matrix(m), 4, topology_hash(m));
  save_embedding(e, dir / "e.isoemb");
  const VertexEmbedding back = load_embedding(dir / "e.isoemb");
  EXPECT_EQ(back.template_hash, topology_hash(m));
  ASSERT_EQ(back.n(), e.n());
  ASSERT_EQ(back.d(), e.d());
  for (Eigen::Index i = 0; i < e.phi.size(); ++i)
    EXPECT_EQ(back.phi.data()[i], static_cast<double>(static_cast<float>(e.phi.data()[i])));
  EXPECT_EQ(serialize_embedding(back), serialize_embedding(e));
  EXPECT_EQ(testing::read_bytes(dir / "e.isoemb").size(), 8u + 8u + 32u + 4u * 42u * 4u);
}

TEST(EmbeddingFile, TemplateMismatchRejected) {
  const TriMesh m = testing::icosphere(1);
  const VertexEmbedding e = isomap(geodesic_matrix(m), 4, topology_hash(m));
  EXPECT_NO_THROW(require_template_match(e, m, "body"));
  EXPECT_THROW(require_template_match(e, testing::icosphere(2), "body"), ValidationError);
}

}  // namespace
}  // namespace isoret
