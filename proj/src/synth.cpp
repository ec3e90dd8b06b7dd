#include "isoret/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <tuple>

#include <Eigen/Geometry>

#include "isoret/errors.hpp"

namespace isoret::synth {

namespace {

double smin(double a, double b, double k) {
  const double h = std::max(k - std::abs(a - b), 0.0) / k;
  return std::min(a, b) - h * h * k * 0.25;
}

double segment_param(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  return std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
}

double tapered_capsule(const Vec3& p, const Vec3& a, const Vec3& b, double ra, double rb) {
  const double t = segment_param(p, a, b);
  return (p - (a + t * (b - a))).norm() - (ra + t * (rb - ra));
}

Vec3 scale_z(const Vec3& p, double s) { return {p.x(), p.y(), p.z() * s}; }

Vec3 sdf_gradient(const Sdf& sdf, const Vec3& p) {
  constexpr double h = 1e-5;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 d = Vec3::Zero();
    d[a] = h;
    g[a] = (sdf(p + d) - sdf(p - d)) / (2 * h);
  }
  return g;
}

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 limb_end(const Vec3& from, double length, double angle_from_down, double side) {
  return from + length * Vec3(side * std::sin(angle_from_down), -std::cos(angle_from_down), 0.0);
}

// Rotation by `angle` about `axis` through `center`, as (R, t) with p' = R p + t.
std::pair<Eigen::Matrix3d, Vec3> rotation_about(const Vec3& center, const Vec3& axis, double angle) {
  const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  return {r, center - r * center};
}

std::pair<Eigen::Matrix3d, Vec3> compose(const std::pair<Eigen::Matrix3d, Vec3>& outer,
                                         const std::pair<Eigen::Matrix3d, Vec3>& inner) {
  return {outer.first * inner.first, outer.first * inner.second + outer.second};
}

}  // namespace

TriMesh surface_nets(const Sdf& sdf, const Vec3& lo, const Vec3& hi, double cell) {
  if (!(cell > 0.0)) throw ArgumentError("surface nets: cell size must be positive");
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / cell)) + 1;
  const auto gidx = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  };
  std::vector<double> f(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) f[gidx(i, j, k)] = sdf(lo + cell * Vec3(i, j, k));

  const auto point = [&](int i, int j, int k) { return Vec3(lo + cell * Vec3(i, j, k)); };
  TriMesh mesh;
  std::vector<std::int64_t> cell_vertex(f.size(), -1);
  for (int k = 0; k + 1 < dims[2]; ++k) {
    for (int j = 0; j + 1 < dims[1]; ++j) {
      for (int i = 0; i + 1 < dims[0]; ++i) {
        int inside = 0;
        for (int c = 0; c < 8; ++c)
          if (f[gidx(i + (c & 1), j + ((c >> 1) & 1), k + (c >> 2))] < 0.0) ++inside;
        if (inside == 0 || inside == 8) continue;
        Vec3 sum = Vec3::Zero();
        int crossings = 0;
        for (int c = 0; c < 8; ++c) {
          const std::array<int, 3> u{c & 1, (c >> 1) & 1, c >> 2};
          for (int a = 0; a < 3; ++a) {
            if (u[a] == 1) continue;
            std::array<int, 3> v = u;
            v[a] = 1;
            const double f0 = f[gidx(i + u[0], j + u[1], k + u[2])];
            const double f1 = f[gidx(i + v[0], j + v[1], k + v[2])];
            if ((f0 < 0.0) == (f1 < 0.0)) continue;
            const double t = f0 / (f0 - f1);
            const Vec3 p0 = point(i + u[0], j + u[1], k + u[2]);
            const Vec3 p1 = point(i + v[0], j + v[1], k + v[2]);
            sum += p0 + t * (p1 - p0);
            ++crossings;
          }
        }
        cell_vertex[gidx(i, j, k)] = static_cast<std::int64_t>(mesh.vertices.size());
        mesh.vertices.push_back(sum / crossings);
      }
    }
  }

  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const std::array<int, 3> g{i, j, k};
        for (int a = 0; a < 3; ++a) {
          const int b = (a + 1) % 3;
          const int c = (a + 2) % 3;
          if (g[a] + 1 >= dims[a] || g[b] < 1 || g[c] < 1) continue;
          std::array<int, 3> h = g;
          h[a] += 1;
          const bool in0 = f[gidx(g[0], g[1], g[2])] < 0.0;
          const bool in1 = f[gidx(h[0], h[1], h[2])] < 0.0;
          if (in0 == in1) continue;
          auto cell_at = [&](int db, int dc) {
            std::array<int, 3> m = g;
            m[b] -= db;
            m[c] -= dc;
            const std::int64_t v = cell_vertex[gidx(m[0], m[1], m[2])];
            if (v < 0) throw NumericError("surface nets: missing cell vertex");
            return static_cast<Index>(v);
          };
          std::array<Index, 4> q{cell_at(1, 1), cell_at(0, 1), cell_at(0, 0), cell_at(1, 0)};
          if (!in0) std::swap(q[1], q[3]);
          const double d02 = (mesh.vertices[q[0]] - mesh.vertices[q[2]]).squaredNorm();
          const double d13 = (mesh.vertices[q[1]] - mesh.vertices[q[3]]).squaredNorm();
          if (d02 <= d13) {
            mesh.faces.push_back({q[0], q[1], q[2]});
            mesh.faces.push_back({q[0], q[2], q[3]});
          } else {
            mesh.faces.push_back({q[0], q[1], q[3]});
            mesh.faces.push_back({q[1], q[2], q[3]});
          }
        }
      }
    }
  }
  return mesh;
}

bool is_closed_manifold(const TriMesh& mesh) {
  const EdgeSet edges = build_edges(mesh);
  if (!edges.boundary.empty() || !edges.non_manifold.empty()) return false;
  // Every vertex link must be a single cycle: walk the fan around each vertex.
  std::vector<std::vector<std::pair<Index, Index>>> link(mesh.num_vertices());
  for (const Face& f : mesh.faces)
    for (int c = 0; c < 3; ++c) link[f[c]].emplace_back(f[(c + 1) % 3], f[(c + 2) % 3]);
  for (const auto& fan : link) {
    if (fan.size() < 3) return false;
    std::size_t steps = 0;
    Index at = fan.front().second;
    while (steps < fan.size()) {
      const auto next = std::find_if(fan.begin(), fan.end(), [&](const auto& e) { return e.first == at; });
      if (next == fan.end()) return false;
      at = next->second;
      ++steps;
      if (at == fan.front().second) break;
    }
    if (steps != fan.size()) return false;
  }
  const auto chi = static_cast<long>(mesh.num_vertices()) - static_cast<long>(edges.size()) +
                   static_cast<long>(mesh.num_faces());
  return chi == 2 && connected_components(mesh).second == 1;
}

void relax_onto_level_set(TriMesh& mesh, const Sdf& sdf, int passes) {
  const auto adj = vertex_adjacency(mesh);
  std::vector<Vec3> next(mesh.num_vertices());
  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
      Vec3 c = Vec3::Zero();
      for (Index j : adj[i]) c += mesh.vertices[j];
      next[i] = adj[i].empty() ? mesh.vertices[i] : Vec3(0.5 * mesh.vertices[i] + 0.5 * c / adj[i].size());
    }
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
      Vec3 p = next[i];
      for (int it = 0; it < 4; ++it) {
        const Vec3 g = sdf_gradient(sdf, p);
        const double g2 = g.squaredNorm();
        if (g2 < 1e-12) break;
        p -= sdf(p) * g / g2;
      }
      mesh.vertices[i] = p;
    }
  }
}

Humanoid::Humanoid() {
  const Vec3 pelvis(0.0, 0.90, 0.0);
  const Vec3 crown(0.0, 1.70, 0.0);
  bones_[kRoot] = {pelvis, crown, 0.13, 0.13, -1};
  for (double side : {1.0, -1.0}) {
    const Vec3 shoulder(side * 0.17, 1.38, 0.0);
    const Vec3 elbow = limb_end(shoulder, 0.28, 45 * kDeg, side);
    const Vec3 wrist = limb_end(elbow, 0.26, 45 * kDeg, side);
    const Vec3 hip(side * 0.085, 0.92, 0.0);
    const Vec3 knee = limb_end(hip, 0.43, 10 * kDeg, side);
    const Vec3 ankle = limb_end(knee, 0.42, 10 * kDeg, side);
    const bool left = side > 0;
    bones_[left ? kUpperArmL : kUpperArmR] = {shoulder, elbow, 0.06, 0.05, kRoot};
    bones_[left ? kForearmL : kForearmR] = {elbow, wrist, 0.05, 0.043, left ? kUpperArmL : kUpperArmR};
    bones_[left ? kThighL : kThighR] = {hip, knee, 0.082, 0.058, kRoot};
    bones_[left ? kShinL : kShinR] = {knee, ankle, 0.06, 0.05, left ? kThighL : kThighR};
  }
  head_ = {1.65, 0.095, 1.15};
}

double Humanoid::sdf(const Vec3& p) const {
  constexpr double k = 0.03;
  double d = tapered_capsule(scale_z(p, 1.45), {0.0, 1.0, 0.0}, {0.0, 1.33, 0.0}, 0.145, 0.15);
  d = smin(d, tapered_capsule(scale_z(p, 1.3), {-0.07, 0.95, 0.0}, {0.07, 0.95, 0.0}, 0.12, 0.12), k);
  d = smin(d, tapered_capsule(p, {0.0, 1.40, 0.0}, {0.0, 1.56, 0.0}, 0.055, 0.05), k);
  const Vec3 hq(p.x(), (p.y() - head_[0]) / head_[2] + head_[0], p.z());
  d = smin(d, (hq - Vec3(0.0, head_[0], 0.01)).norm() - head_[1], k);
  for (int b = kUpperArmL; b < kBoneCount; ++b) {
    const Bone& bone = bones_[b];
    d = smin(d, tapered_capsule(p, bone.head, bone.tail, bone.r0, bone.r1), k);
  }
  for (int b : {kForearmL, kForearmR}) {
    const Bone& bone = bones_[b];
    const Vec3 hand = bone.tail + 0.05 * (bone.tail - bone.head).normalized();
    d = smin(d, (p - hand).norm() - 0.05, k);
  }
  for (int b : {kShinL, kShinR}) {
    const Vec3 ankle = bones_[b].tail;
    d = smin(d, tapered_capsule(p, ankle + Vec3(0, -0.02, 0), ankle + Vec3(0, -0.04, 0.11), 0.045, 0.04), k);
  }
  return d;
}

TriMesh Humanoid::mesh(double cell, int relax_passes) const {
  const Sdf f = [this](const Vec3& p) { return sdf(p); };
  // Naive surface nets can pinch where the surface grazes a grid sample.
  // Shift the grid origin through a fixed low-discrepancy sequence until the
  // result is a closed 2-manifold sphere.
  for (int attempt = 0; attempt < 32; ++attempt) {
    const double u = std::fmod(0.37 + attempt * 0.6180339887, 1.0);
    const double v = std::fmod(0.21 + attempt * 0.7548776662, 1.0);
    const double w = std::fmod(0.13 + attempt * 0.5698402910, 1.0);
    const Vec3 lo(-0.75 + u * cell, -0.10 + v * cell, -0.25 + w * cell);
    TriMesh m = surface_nets(f, lo, Vec3(0.75, 1.82, 0.30), cell);
    if (!is_closed_manifold(m)) continue;
    relax_onto_level_set(m, f, relax_passes);
    return m;
  }
  throw NumericError("could not mesh the humanoid as a closed manifold at cell size " + std::to_string(cell));
}

std::vector<double> Humanoid::skinning_weights(std::span<const Vec3> rest) const {
  constexpr double sigma = 0.015;
  std::vector<double> w(rest.size() * kBoneCount);
  for (std::size_t i = 0; i < rest.size(); ++i) {
    std::array<double, kBoneCount> d{};
    for (int b = 0; b < kBoneCount; ++b) {
      const Bone& bone = bones_[b];
      d[b] = tapered_capsule(rest[i], bone.head, bone.tail, bone.r0, bone.r1);
    }
    const double dmin = *std::min_element(d.begin(), d.end());
    double total = 0.0;
    for (int b = 0; b < kBoneCount; ++b) total += (w[i * kBoneCount + b] = std::exp(-(d[b] - dmin) / sigma));
    for (int b = 0; b < kBoneCount; ++b) w[i * kBoneCount + b] /= total;
  }
  return w;
}

std::array<std::pair<Eigen::Matrix3d, Vec3>, kBoneCount> Humanoid::bone_transforms(const Pose& pose) const {
  std::array<std::pair<Eigen::Matrix3d, Vec3>, kBoneCount> t;
  t[kRoot] = {Eigen::Matrix3d::Identity(), Vec3::Zero()};
  const Vec3 z = Vec3::UnitZ();
  for (auto [upper, lower, abduct, flex, forward] :
       {std::tuple{kUpperArmL, kForearmL, pose.shoulder, pose.elbow, 1.0},
        std::tuple{kUpperArmR, kForearmR, pose.shoulder, pose.elbow, 1.0},
        std::tuple{kThighL, kShinL, pose.hip, pose.knee, -1.0}, std::tuple{kThighR, kShinR, pose.hip, pose.knee, -1.0}}) {
    const Bone& u = bones_[upper];
    const Bone& l = bones_[lower];
    const double side = u.tail.x() > u.head.x() ? 1.0 : -1.0;
    t[upper] = rotation_about(u.head, z, side * abduct);
    const Vec3 axis = forward * (l.tail - l.head).cross(z);
    t[lower] = compose(t[upper], rotation_about(l.head, axis, flex));
  }
  return t;
}

std::vector<Vec3> Humanoid::skin(std::span<const Vec3> rest, std::span<const double> weights, const Pose& pose) const {
  if (weights.size() != rest.size() * kBoneCount) throw ArgumentError("skinning weights do not match vertex count");
  const auto t = bone_transforms(pose);
  std::vector<Vec3> out(rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    Vec3 p = Vec3::Zero();
    for (int b = 0; b < kBoneCount; ++b) {
      const double w = weights[i * kBoneCount + b];
      if (w > 0.0) p += w * (t[b].first * rest[i] + t[b].second);
    }
    out[i] = Vec3(p.x() * pose.scale_xz, p.y(), p.z() * pose.scale_xz);
  }
  return out;
}

JointMask Humanoid::joint_regions(const TriMesh& rest) const {
  JointMask mask;
  for (std::size_t i = 0; i < rest.num_vertices(); ++i) {
    const Vec3& p = rest.vertices[i];
    const auto idx = static_cast<Index>(i);
    bool elbow = false, armpit = false, knee = false;
    for (int b : {kForearmL, kForearmR}) elbow |= (p - bones_[b].head).norm() < 0.075;
    for (int b : {kUpperArmL, kUpperArmR}) {
      const Vec3 pit = bones_[b].head + Vec3(-0.02 * (bones_[b].head.x() > 0 ? 1 : -1), -0.11, 0.0);
      armpit |= (p - pit).norm() < 0.09;
    }
    for (int b : {kShinL, kShinR}) knee |= (p - bones_[b].head).norm() < 0.09;
    const bool waist = p.y() >= 0.98 && p.y() <= 1.06 && std::abs(p.x()) < 0.22;
    if (elbow) mask.regions["elbows"].push_back(idx);
    if (armpit) mask.regions["armpits"].push_back(idx);
    if (waist) mask.regions["waist"].push_back(idx);
    if (knee) mask.regions["knees"].push_back(idx);
  }
  return mask;
}

TriMesh extract(const TriMesh& mesh, const std::function<bool(Index)>& keep, std::vector<Index>* kept) {
  std::vector<bool> face_kept(mesh.num_faces());
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& fc = mesh.faces[f];
    face_kept[f] = keep(fc[0]) && keep(fc[1]) && keep(fc[2]);
  }
  std::vector<std::int64_t> remap(mesh.num_vertices(), -1);
  TriMesh out;
  std::vector<Index> src;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    if (!face_kept[f]) continue;
    Face nf{};
    for (int c = 0; c < 3; ++c) {
      const Index v = mesh.faces[f][c];
      if (remap[v] < 0) {
        remap[v] = static_cast<std::int64_t>(src.size());
        src.push_back(v);
      }
      nf[c] = static_cast<Index>(remap[v]);
    }
    out.faces.push_back(nf);
  }
  // Renumber vertices in source order so output is independent of face order.
  std::vector<Index> order(src.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return src[a] < src[b]; });
  std::vector<Index> rank(src.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<Index>(r);
  for (Face& f : out.faces)
    for (Index& v : f) v = rank[v];
  out.vertices.resize(src.size());
  std::vector<Index> sorted_src(src.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    sorted_src[r] = src[order[r]];
    out.vertices[r] = mesh.vertices[sorted_src[r]];
  }
  if (kept) *kept = std::move(sorted_src);
  return out;
}

TriMesh clean_patch(const TriMesh& input, std::vector<Index>* kept) {
  std::vector<Face> faces = input.faces;
  for (;;) {
    TriMesh cur{input.vertices, faces};
    const EdgeSet edges = build_edges(cur);
    std::vector<int> boundary_at_vertex(input.num_vertices(), 0);
    std::vector<int> boundary_in_face(faces.size(), 0);
    for (std::uint32_t e : edges.boundary) {
      ++boundary_at_vertex[edges.edges[e].a];
      ++boundary_at_vertex[edges.edges[e].b];
      ++boundary_in_face[static_cast<std::size_t>(edges.edge_faces[e][0])];
    }
    std::vector<Face> next;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      bool drop = boundary_in_face[f] >= 2;
      for (Index v : faces[f]) drop |= boundary_at_vertex[v] > 2;
      if (!drop) next.push_back(faces[f]);
    }
    if (next.size() == faces.size() && edges.non_manifold.empty()) break;
    if (next.size() == faces.size()) throw ValidationError("patch has non-manifold edges");
    faces = std::move(next);
  }
  TriMesh cur{input.vertices, faces};
  const auto [comp, ncomp] = connected_components(cur);
  std::vector<std::size_t> face_count(ncomp, 0);
  for (const Face& f : faces) ++face_count[comp[f[0]]];
  const auto largest = static_cast<Index>(std::max_element(face_count.begin(), face_count.end()) - face_count.begin());
  return extract(cur, [&](Index v) { return comp[v] == largest; }, kept);
}

namespace {

// Dominant bone and position along it, per rest vertex.
struct Segmentation {
  std::vector<int> bone;
  std::vector<double> t;
};

Segmentation segment(const Humanoid& body, std::span<const Vec3> rest, std::span<const double> weights) {
  Segmentation s;
  s.bone.resize(rest.size());
  s.t.resize(rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const double* w = weights.data() + i * kBoneCount;
    s.bone[i] = static_cast<int>(std::max_element(w, w + kBoneCount) - w);
    const Bone& b = body.bones()[static_cast<std::size_t>(s.bone[i])];
    s.t[i] = segment_param(rest[i], b.head, b.tail);
  }
  return s;
}

TriMesh dress(const TriMesh& body, std::span<const Index> kept, const TriMesh& patch, const ShirtOptions& opts,
              const Vec3& pocket_center_rest, std::span<const Vec3> rest) {
  const VertexNormals normals = vertex_normals(body);
  TriMesh shirt = patch;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const Index v = kept[i];
    const double r = (rest[v] - pocket_center_rest).norm();
    double off = opts.offset;
    if (r < opts.pocket_radius) off += opts.pocket_height * 0.5 * (1.0 + std::cos(std::numbers::pi * r / opts.pocket_radius));
    shirt.vertices[i] = body.vertices[v] + off * normals.normals[v];
  }
  return shirt;
}

}  // namespace

Fixture make_fixture(const FixtureOptions& opts) {
  const Humanoid human;
  Fixture fx;
  fx.template_mesh = human.mesh(opts.cell);
  const auto& rest = fx.template_mesh.vertices;
  const std::vector<double> weights = human.skinning_weights(rest);
  fx.pose_a = opts.pose_a;
  fx.pose_b = opts.pose_b;
  fx.body_a = {human.skin(rest, weights, opts.pose_a), fx.template_mesh.faces};
  fx.body_b = {human.skin(rest, weights, opts.pose_b), fx.template_mesh.faces};
  fx.regions = human.joint_regions(fx.template_mesh);

  const Segmentation seg = segment(human, rest, weights);
  const auto in_shirt = [&](Index v) {
    const Vec3& p = rest[v];
    if (p.y() < 0.97) return false;
    const double r = std::hypot(p.x(), p.z());
    if (p.y() > 1.41 && r < 0.10) return false;
    switch (seg.bone[v]) {
      case kRoot:
      case kThighL:
      case kThighR:
        return p.y() < 1.52;
      case kUpperArmL:
      case kUpperArmR:
        return seg.t[v] <= opts.shirt.sleeve_fraction;
      default:
        return false;
    }
  };
  std::vector<Index> kept, kept_clean;
  const TriMesh rough = extract(fx.template_mesh, in_shirt, &kept);
  const TriMesh patch = clean_patch(rough, &kept_clean);
  std::vector<Index> patch_src(kept_clean.size());
  for (std::size_t i = 0; i < kept_clean.size(); ++i) patch_src[i] = kept[kept_clean[i]];
  const Vec3 pocket(0.07, 1.25, 0.14);
  Vec3 pocket_rest = pocket;
  {
    // Snap the pocket center to the closest front torso vertex.
    double best = std::numeric_limits<double>::infinity();
    for (Index v : patch_src) {
      const double d = (rest[v] - pocket).squaredNorm();
      if (d < best) {
        best = d;
        pocket_rest = rest[v];
      }
    }
  }
  fx.shirt = dress(fx.body_a, patch_src, patch, opts.shirt, pocket_rest, rest);
  fx.shirt_on_b = dress(fx.body_b, patch_src, patch, opts.shirt, pocket_rest, rest);
  return fx;
}

TriMesh scaled(const TriMesh& mesh, double factor) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& v : mesh.vertices) c += v;
  c /= static_cast<double>(std::max<std::size_t>(mesh.num_vertices(), 1));
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = c + factor * (v - c);
  return out;
}

}  // namespace isoret::synth
