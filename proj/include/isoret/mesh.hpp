#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "isoret/binary_io.hpp"

namespace isoret {

using Vec3 = Eigen::Vector3d;
using Index = std::uint32_t;
using Face = std::array<Index, 3>;

/// Indexed triangle mesh. Positions are in meters.
///
/// The struct itself does not enforce its invariants so that intermediate
/// results (e.g. a collapsed coarse retarget) can still be carried around;
/// call validate() where a well-formed mesh is required. load_mesh() always
/// validates.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }
};

inline constexpr double kMinEdgeLength = 1e-12;

/// Throws ValidationError naming the first offending face.
void validate(const TriMesh& mesh);

TriMesh parse_obj(std::istream& in, std::string_view source_name);
TriMesh load_mesh(const std::filesystem::path& path);
void write_obj(const TriMesh& mesh, std::ostream& out);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

struct Edge {
  Index a = 0;  // a < b
  Index b = 0;
  double rest_length = 0.0;
};

/// Undirected edges, sorted by (a, b). Interior edges are those with exactly
/// two incident faces; edges with more are non-manifold and kept out of
/// `interior`.
struct EdgeSet {
  static constexpr std::int32_t kNoFace = -1;

  std::vector<Edge> edges;
  std::vector<std::array<std::int32_t, 2>> edge_faces;
  std::vector<std::uint32_t> face_count;
  std::vector<std::uint32_t> interior;
  std::vector<std::uint32_t> boundary;
  std::vector<std::uint32_t> non_manifold;

  std::size_t size() const { return edges.size(); }
};

EdgeSet build_edges(const TriMesh& mesh);

/// Sorted one-ring neighbor lists.
std::vector<std::vector<Index>> vertex_adjacency(const TriMesh& mesh);

struct VertexNormals {
  std::vector<Vec3> normals;      // unit, or zero when flagged
  std::vector<bool> degenerate;   // true where no face area accumulated
  std::size_t degenerate_count = 0;
};

/// Area-weighted average of incident face normals.
VertexNormals vertex_normals(const TriMesh& mesh);

Vec3 face_normal_unnormalized(const TriMesh& mesh, const Face& f);
double face_area(const TriMesh& mesh, const Face& f);
Vec3 face_centroid(const TriMesh& mesh, const Face& f);

/// Connected components over faces and edges; isolated vertices form their
/// own components. Returns a component id per vertex and the component count.
std::pair<std::vector<Index>, std::size_t> connected_components(const TriMesh& mesh);

/// Digest over vertex count and face indices only. Registered instances of the
/// same template (posed or reshaped) share this hash.
Digest topology_hash(const TriMesh& mesh);

/// Digest over topology and exact vertex coordinates.
Digest content_hash(const TriMesh& mesh);

}  // namespace isoret
