#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "isoret/correspondence.hpp"
#include "isoret/errors.hpp"
#include "isoret/geodesics.hpp"
#include "testing.hpp"

namespace isoret {
namespace {

// Reference inverse-distance average over a full sort.
template <class Dist>
Eigen::RowVectorXd brute_idw(std::size_t count, std::size_t k, Dist dist, const RowMatrix& values) {
  std::vector<std::pair<double, Index>> all;
  for (std::size_t i = 0; i < count; ++i) all.emplace_back(dist(i), static_cast<Index>(i));
  std::sort(all.begin(), all.end());
  if (std::sqrt(all[0].first) < kSnapDistance) return values.row(all[0].second);
  double total = 0.0;
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(values.cols());
  for (std::size_t j = 0; j < k; ++j) {
    const double w = 1.0 / std::sqrt(all[j].first);
    acc += w * values.row(all[j].second);
    total += w;
  }
  return acc / total;
}

struct Scene {
  TriMesh tmpl = testing::icosphere(2);
  VertexEmbedding emb;
  Scene() { emb = isomap(geodesic_matrix(tmpl), 6, topology_hash(tmpl)); }
};

TEST(InverseDistanceWeights, NormalizedAndSnapping) {
  std::vector<double> d{0.5, 1.0, 2.0}, w(3);
  inverse_distance_weights(d, w);
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
  EXPECT_NEAR(w[0] / w[1], 2.0, 1e-12);
  d[0] = 0.0;
  inverse_distance_weights(d, w);
  EXPECT_EQ(w, (std::vector<double>{1.0, 0.0, 0.0}));
  std::vector<double> bad(2);
  EXPECT_THROW(inverse_distance_weights(d, bad), ArgumentError);
}

TEST(Extrapolate, MatchesBruteForce) {
  const Scene s;
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const TriMesh inst = testing::jittered(s.tmpl, rng, 0.02);
    TriMesh surf = testing::icosphere(1, 1.05);
    surf = testing::jittered(surf, rng, 0.03);
    const RegisteredPair pair(surf, inst, s.emb);
    const int k = 1 + trial * 3;
    const VertexEmbedding e = extrapolate_embedding(pair, k);
    ASSERT_EQ(e.n(), static_cast<Eigen::Index>(surf.num_vertices()));
    EXPECT_EQ(e.template_hash, s.emb.template_hash);
    for (std::size_t i = 0; i < surf.num_vertices(); ++i) {
      const auto ref = brute_idw(
          inst.num_vertices(), static_cast<std::size_t>(k),
          [&](std::size_t j) { return squared_distance(surf.vertices[i], inst.vertices[j]); }, s.emb.phi);
      EXPECT_LE((e.phi.row(static_cast<Eigen::Index>(i)) - ref).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Extrapolate, SnapsOnTemplateVertices) {
  const Scene s;
  const RegisteredPair pair(s.tmpl, s.tmpl, s.emb);
  ExtrapolationStats stats;
  const VertexEmbedding e = extrapolate_embedding(pair, 8, &stats);
  EXPECT_EQ(stats.snapped, s.tmpl.num_vertices());
  EXPECT_EQ(e.phi, s.emb.phi);
}

TEST(Extrapolate, RejectsWrongTemplateOrK) {
  const Scene s;
  const TriMesh other = testing::icosphere(1);
  EXPECT_THROW(RegisteredPair(other, other, s.emb), ValidationError);
  const RegisteredPair pair(other, s.tmpl, s.emb);
  EXPECT_THROW(extrapolate_embedding(pair, 0), ArgumentError);
  EXPECT_THROW(extrapolate_embedding(pair, 10000), ArgumentError);
}

TEST(Correspond, MatchesBruteForce) {
  const Scene s;
  std::mt19937_64 rng(43);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    VertexEmbedding garment;
    garment.phi.resize(40, s.emb.d());
    for (Eigen::Index i = 0; i < garment.phi.size(); ++i) garment.phi.data()[i] = 0.3 * g(rng);
    garment.phi.row(0) = s.emb.phi.row(5);  // exact hit snaps
    const TriMesh target = testing::jittered(s.tmpl, rng, 0.05);
    RowMatrix positions(static_cast<Eigen::Index>(target.num_vertices()), 3);
    for (std::size_t i = 0; i < target.num_vertices(); ++i)
      positions.row(static_cast<Eigen::Index>(i)) = target.vertices[i].transpose();
    const int k = 1 + 4 * trial;
    const CorrespondenceMap c = correspond(garment, s.emb, target.vertices, k);
    ASSERT_EQ(c.size(), 40u);
    for (Eigen::Index i = 0; i < garment.phi.rows(); ++i) {
      const auto ref = brute_idw(
          target.num_vertices(), static_cast<std::size_t>(k),
          [&](std::size_t j) {
            return squared_distance(garment.phi.row(i).data(), s.emb.phi.row(static_cast<Eigen::Index>(j)).data(),
                                    s.emb.d());
          },
          positions);
      EXPECT_LE((c.points[static_cast<std::size_t>(i)] - ref.transpose()).cwiseAbs().maxCoeff(), 1e-9);
      double wsum = 0.0;
      for (double w : c.weights_of(static_cast<std::size_t>(i))) wsum += w;
      EXPECT_NEAR(wsum, 1.0, 1e-12);
    }
    EXPECT_EQ(c.points[0], target.vertices[5]);
  }
}

TEST(Correspond, SelfCorrespondenceIsIdentity) {
  const Scene s;
  const CorrespondenceMap c = correspond(s.emb, s.emb, s.tmpl.vertices, 32);
  for (std::size_t i = 0; i < s.tmpl.num_vertices(); ++i) EXPECT_EQ(c.points[i], s.tmpl.vertices[i]);
}

TEST(Correspond, RejectsMismatches) {
  const Scene s;
  VertexEmbedding small;
  small.phi = RowMatrix::Zero(3, 2);
  EXPECT_THROW(correspond(small, s.emb, s.tmpl.vertices, 4), ArgumentError);
  EXPECT_THROW(correspond(s.emb, s.emb, std::span(s.tmpl.vertices).first(5), 4), ArgumentError);
  EXPECT_THROW(correspond(s.emb, s.emb, s.tmpl.vertices, 0), ArgumentError);
}

TEST(Coarse, KeepsFacesAndFlagsCollapse) {
  const TriMesh g = testing::grid(2, 2);
  CorrespondenceMap c;
  c.k = 1;
  c.points = g.vertices;
  c.neighbors.assign(g.num_vertices(), 0);
  c.weights.assign(g.num_vertices(), 1.0);
  CoarseResult r = coarse_retarget(g, c);
  EXPECT_EQ(r.mesh.faces, g.faces);
  EXPECT_TRUE(r.warnings.empty());
  c.points.assign(g.num_vertices(), Vec3::Zero());
  r = coarse_retarget(g, c);
  EXPECT_FALSE(r.warnings.empty());
  c.points.pop_back();
  EXPECT_THROW(coarse_retarget(g, c), ArgumentError);
}

TEST(CorrespondenceFile, RoundTrip) {
  const Scene s;
  testing::TempDir dir;
  const CorrespondenceMap c = correspond(s.emb, s.emb, testing::icosphere(2, 1.3).vertices, 3);
  save_correspondence(c, dir / "c.corr");
  const CorrespondenceMap back = load_correspondence(dir / "c.corr");
  EXPECT_EQ(back.k, c.k);
  EXPECT_EQ(back.neighbors, c.neighbors);
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE((back.points[i] - c.points[i]).norm(), 1e-6);
  EXPECT_EQ(testing::read_bytes(dir / "c.corr").size(), 16u + c.size() * (12u + 8u * c.k));
  EXPECT_THROW(load_correspondence(dir / "missing.corr"), IoError);
}

}  // namespace
}  // namespace isoret
