#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isoret/correspondence.hpp"
#include "isoret/mesh.hpp"

namespace isoret {

/// Template vertices over the joints where garment edges may stretch freely.
struct JointMask {
  static constexpr std::array<std::string_view, 4> kRegionNames{"elbows", "armpits", "waist", "knees"};

  std::map<std::string, std::vector<Index>> regions;

  bool empty() const;
};

/// Plain text, one `region_name vertex_index` pair per line; '#' starts a comment.
JointMask load_joint_mask(const std::filesystem::path& path, std::size_t template_vertex_count);
JointMask parse_joint_mask(std::istream& in, std::string_view source, std::size_t template_vertex_count);
void save_joint_mask(const JointMask& mask, const std::filesystem::path& path);

struct EdgeWeights {
  std::vector<double> w;  // 0 over joints, 1 elsewhere
  std::vector<std::string> warnings;
};

/// w = 0 for an edge iff both endpoints' nearest template-instance vertices lie
/// in some joint region.
EdgeWeights joint_edge_weights(const TriMesh& garment, const EdgeSet& edges, const TriMesh& garment_template_instance,
                               const JointMask& mask);

struct LossValue {
  double value = 0.0;
  std::vector<Vec3> gradient;
};

/// (1/m) sum_i w_i | |e'_i| - |e_i| | over all m garment edges.
LossValue edge_length_loss(const EdgeSet& rest_edges, std::span<const Vec3> positions, std::span<const double> w);

struct BendLossValue : LossValue {
  std::size_t skipped = 0;  // interior edges next to a zero-area face
};

/// Mean over interior edges of 1 - n1.n2 for the unit normals of the two
/// incident faces. Edges next to degenerate faces contribute 0.
BendLossValue bend_loss(std::span<const Face> faces, const EdgeSet& edges, std::span<const Vec3> positions);

/// Mean distance between the frozen coarse targets x_i and the targets x'_i
/// re-derived from refined positions: features are re-extrapolated from the
/// target's template instance, then matched against the target features.
class CorrespondenceLoss {
 public:
  /// Neighbor sets held fixed while differentiating.
  struct Frozen {
    std::vector<Index> template_ids;  // n * k, Euclidean neighbors in the template instance
    std::vector<Index> target_ids;    // n * k, feature-space neighbors in the target
  };

  CorrespondenceLoss(const RegisteredPair& target, const VertexEmbedding& target_emb, std::span<const Vec3> coarse,
                     int k);

  Frozen freeze(std::span<const Vec3> positions) const;
  LossValue evaluate(std::span<const Vec3> positions, const Frozen& frozen) const;
  LossValue evaluate(std::span<const Vec3> positions) const { return evaluate(positions, freeze(positions)); }
  /// x'_i for each refined position.
  std::vector<Vec3> targets(std::span<const Vec3> positions, const Frozen& frozen) const;

  std::size_t k() const { return k_; }

 private:
  struct VertexTerm;
  VertexTerm vertex_term(std::size_t i, const Vec3& pos, const Frozen& frozen, bool with_gradient) const;

  std::vector<Vec3> instance_;
  RowMatrix template_phi_;
  RowMatrix target_phi_;
  std::vector<Vec3> target_vertices_;
  std::vector<Vec3> coarse_;
  std::size_t k_;
  KdTree3 instance_tree_;
  EmbeddingKnn target_index_;
};

struct RefineConfig {
  double lambda_length = 1.0;
  double lambda_corres = 1.0;
  double lambda_bend = 0.05;
  int k = kDefaultNeighbors;
  double step = 1.0;
  int max_iterations = 500;
  double tolerance = 1e-5;  // relative decrease over 10 accepted steps
  // Strength of the Sobolev smoothing applied to the gradient: the descent
  // direction is (I + smoothing * K)^-1 grad, K the garment's graph Laplacian.
  // 0 gives plain gradient descent.
  double smoothing = 100.0;

  void check() const;
};

struct LossBreakdown {
  double length = 0.0;
  double corres = 0.0;
  double bend = 0.0;
  double total = 0.0;
};

/// Weighted sum of the three refinement losses as a function of vertex positions.
class RefineObjective {
 public:
  struct Evaluation {
    LossBreakdown loss;
    std::vector<Vec3> gradient;
    std::size_t bend_skipped = 0;
  };

  /// `target`/`target_emb` may be null when lambda_corres is 0.
  RefineObjective(const TriMesh& garment, std::span<const Vec3> coarse, std::vector<double> edge_weights,
                  const RegisteredPair* target, const VertexEmbedding* target_emb, const RefineConfig& cfg);

  Evaluation evaluate(std::span<const Vec3> positions) const;
  const EdgeSet& edges() const { return edges_; }

 private:
  std::vector<Face> faces_;
  EdgeSet edges_;
  std::vector<double> weights_;
  RefineConfig cfg_;
  std::optional<CorrespondenceLoss> corres_;
};

struct RefineInputs {
  const TriMesh& garment;                    // source garment (rest edge lengths)
  const TriMesh& garment_template_instance;  // for the joint mask
  const TriMesh& coarse;                     // coarse retarget, same faces as garment
  const RegisteredPair& target;              // target body, its template instance, canonical features
  const VertexEmbedding& target_emb;         // features extrapolated onto the target body
  const JointMask& mask;
};

struct RefineResult {
  TriMesh mesh;
  std::vector<double> history;  // total loss: initial, then every accepted step
  LossBreakdown initial;
  LossBreakdown final;
  int iterations = 0;
  std::string stop_reason;
  std::vector<std::string> warnings;
};

/// Smoothed-gradient descent with backtracking (Armijo) line search over
/// displacements from the coarse positions. Stops at max_iterations, when the relative
/// decrease over the last 10 accepted steps drops below tolerance, or when the
/// line search cannot make progress. Non-finite gradients raise NumericError.
RefineResult refine(const RefineInputs& in, const RefineConfig& cfg);

/// Optimizer core, usable with any objective over the same vertex count.
RefineResult minimize(const RefineObjective& objective, const TriMesh& coarse, const RefineConfig& cfg);

}  // namespace isoret
