#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "isoret/mesh.hpp"
#include "isoret/refine.hpp"

namespace isoret::synth {

using Sdf = std::function<double(const Vec3&)>;

/// Naive surface nets over a regular grid: one vertex per sign-changing cell,
/// one quad per sign-changing grid edge, split along the shorter diagonal.
/// Faces are oriented with normals pointing toward positive SDF values.
TriMesh surface_nets(const Sdf& sdf, const Vec3& lo, const Vec3& hi, double cell);

/// True for a single closed, edge- and vertex-manifold surface of genus 0.
bool is_closed_manifold(const TriMesh& mesh);

/// Alternates umbrella smoothing with projection back onto the zero level set.
void relax_onto_level_set(TriMesh& mesh, const Sdf& sdf, int passes);

/// Straight bone segment with a radius that tapers linearly from `r0` to `r1`.
struct Bone {
  Vec3 head;
  Vec3 tail;
  double r0 = 0.0;
  double r1 = 0.0;
  int parent = -1;
};

enum BoneId : int { kRoot, kUpperArmL, kForearmL, kUpperArmR, kForearmR, kThighL, kShinL, kThighR, kShinR, kBoneCount };

/// Joint angles in radians, relative to the rest A-pose.
struct Pose {
  double shoulder = 0.0;  // abduction; negative brings the arms toward the torso
  double elbow = 0.0;     // flexion, forearm swings forward
  double hip = 0.0;       // abduction
  double knee = 0.0;      // flexion, shin swings backward
  double scale_xz = 1.0;  // girth scale about the vertical axis
};

/// Smooth-union humanoid in A-pose: 1.75 m tall, y up, z forward.
class Humanoid {
 public:
  Humanoid();

  double sdf(const Vec3& p) const;
  const std::array<Bone, kBoneCount>& bones() const { return bones_; }

  /// Rest-pose template mesh.
  TriMesh mesh(double cell = 0.025, int relax_passes = 6) const;

  /// Per-vertex skinning weights, row-major n x kBoneCount.
  std::vector<double> skinning_weights(std::span<const Vec3> rest) const;

  /// Rigid transform of every bone for `pose` (rotation, translation).
  std::array<std::pair<Eigen::Matrix3d, Vec3>, kBoneCount> bone_transforms(const Pose& pose) const;

  /// Linear blend skinning of `rest` points with precomputed weights.
  std::vector<Vec3> skin(std::span<const Vec3> rest, std::span<const double> weights, const Pose& pose) const;

  /// Joint regions over the template: vertices near the elbows, armpits,
  /// waist and knees in the rest pose.
  JointMask joint_regions(const TriMesh& rest) const;

 private:
  std::array<Bone, kBoneCount> bones_;
  std::array<double, 3> head_{};  // center height, radius, vertical stretch
};

/// Removes faces with two or more boundary edges until none remain, then keeps
/// the largest connected component and drops unreferenced vertices.
/// `kept` receives the source index of every output vertex.
TriMesh clean_patch(const TriMesh& mesh, std::vector<Index>* kept = nullptr);

/// Faces of `mesh` whose three vertices satisfy `keep`, compacted.
/// `kept` receives the source index of every output vertex.
TriMesh extract(const TriMesh& mesh, const std::function<bool(Index)>& keep, std::vector<Index>* kept = nullptr);

struct ShirtOptions {
  double offset = 0.02;       // ease between body and shirt, meters
  double pocket_height = 0.012;
  double pocket_radius = 0.05;
  double sleeve_fraction = 0.45;  // of the upper arm
};

/// Complete retargeting scenario on the synthetic humanoid.
struct Fixture {
  TriMesh template_mesh;  // canonical rest pose
  TriMesh body_a;         // source body, registered instance of the template
  TriMesh body_b;         // target body in a different pose and girth
  TriMesh shirt;          // garment fitted on body_a
  TriMesh shirt_on_b;     // shirt carried to body_b by the body's skinning (reference only)
  JointMask regions;
  Pose pose_a;
  Pose pose_b;
};

struct FixtureOptions {
  double cell = 0.025;
  Pose pose_a{0.09, 0.0, 0.0, 0.0, 1.0};
  Pose pose_b{-0.26, 0.52, 0.0, 0.35, 1.04};
  ShirtOptions shirt;
};

Fixture make_fixture(const FixtureOptions& opts = {});

/// The shirt uniformly scaled about its centroid.
TriMesh scaled(const TriMesh& mesh, double factor);

}  // namespace isoret::synth
