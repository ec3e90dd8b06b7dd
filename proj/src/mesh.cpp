#include "isoret/mesh.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>

#include "isoret/errors.hpp"

namespace isoret {

namespace {

std::string at_line(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

bool parse_double(std::string_view tok, double& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_long(std::string_view tok, long& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

void append_double(std::string& s, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  s.append(buf, ptr);
}

}  // namespace

void validate(const TriMesh& mesh) {
  const std::size_t n = mesh.num_vertices();
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const Face& f = mesh.faces[fi];
    for (Index v : f) {
      if (v >= n) {
        throw ValidationError("face " + std::to_string(fi) + " references vertex " + std::to_string(v) +
                              " but mesh has " + std::to_string(n) + " vertices");
      }
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      throw ValidationError("degenerate face " + std::to_string(fi) + " (repeated vertex index)");
    }
    for (int k = 0; k < 3; ++k) {
      const double len = (mesh.vertices[f[k]] - mesh.vertices[f[(k + 1) % 3]]).norm();
      if (!(len > kMinEdgeLength)) {
        throw ValidationError("face " + std::to_string(fi) + " has a zero-length edge (" +
                              std::to_string(f[k]) + ", " + std::to_string(f[(k + 1) % 3]) + ")");
      }
    }
  }
  for (std::size_t vi = 0; vi < n; ++vi) {
    if (!mesh.vertices[vi].allFinite()) {
      throw ValidationError("vertex " + std::to_string(vi) + " is not finite");
    }
  }
}

TriMesh parse_obj(std::istream& in, std::string_view source_name) {
  TriMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::size_t> face_lines;
  std::vector<long> raw;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    if (toks[0] == "v") {
      if (toks.size() < 4) throw FormatError(at_line(source_name, lineno) + "vertex needs 3 coordinates");
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        if (!parse_double(toks[k + 1], p[k])) {
          throw FormatError(at_line(source_name, lineno) + "bad coordinate '" + std::string(toks[k + 1]) + "'");
        }
      }
      mesh.vertices.push_back(p);
    } else if (toks[0] == "f") {
      const std::size_t corners = toks.size() - 1;
      if (corners < 3) throw FormatError(at_line(source_name, lineno) + "face needs at least 3 vertices");
      if (corners > 4) {
        throw FormatError(at_line(source_name, lineno) + "polygons with more than 4 vertices are not supported");
      }
      raw.clear();
      for (std::size_t c = 1; c < toks.size(); ++c) {
        std::string_view t = toks[c];
        t = t.substr(0, t.find('/'));
        long idx = 0;
        if (!parse_long(t, idx)) {
          throw FormatError(at_line(source_name, lineno) + "bad face index '" + std::string(toks[c]) + "'");
        }
        if (idx == 0) throw FormatError(at_line(source_name, lineno) + "face index 0 is invalid (OBJ is 1-based)");
        // Negative indices are relative to the vertices read so far.
        long resolved = idx > 0 ? idx - 1 : static_cast<long>(mesh.vertices.size()) + idx;
        if (resolved < 0) throw FormatError(at_line(source_name, lineno) + "relative face index out of range");
        raw.push_back(resolved);
      }
      auto add = [&](long a, long b, long c) {
        mesh.faces.push_back({static_cast<Index>(a), static_cast<Index>(b), static_cast<Index>(c)});
        face_lines.push_back(lineno);
      };
      add(raw[0], raw[1], raw[2]);
      if (corners == 4) add(raw[0], raw[2], raw[3]);
    }
  }
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    for (Index v : mesh.faces[fi]) {
      if (v >= mesh.vertices.size()) {
        throw FormatError(at_line(source_name, face_lines[fi]) + "face index " + std::to_string(v + 1) +
                          " exceeds vertex count " + std::to_string(mesh.vertices.size()));
      }
    }
  }
  validate(mesh);
  return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh '" + path.string() + "'");
  return parse_obj(in, path.string());
}

void write_obj(const TriMesh& mesh, std::ostream& out) {
  std::string s;
  s.reserve(mesh.vertices.size() * 64 + mesh.faces.size() * 24);
  for (const Vec3& v : mesh.vertices) {
    s += "v ";
    append_double(s, v.x());
    s += ' ';
    append_double(s, v.y());
    s += ' ';
    append_double(s, v.z());
    s += '\n';
  }
  for (const Face& f : mesh.faces) {
    s += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' + std::to_string(f[2] + 1) + '\n';
  }
  out << s;
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_obj(mesh, out);
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

EdgeSet build_edges(const TriMesh& mesh) {
  struct HalfEdge {
    Index a, b;
    std::int32_t face;
  };
  std::vector<HalfEdge> half;
  half.reserve(mesh.faces.size() * 3);
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const Face& f = mesh.faces[fi];
    for (int k = 0; k < 3; ++k) {
      Index a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      half.push_back({a, b, static_cast<std::int32_t>(fi)});
    }
  }
  std::sort(half.begin(), half.end(), [](const HalfEdge& x, const HalfEdge& y) {
    return std::tie(x.a, x.b, x.face) < std::tie(y.a, y.b, y.face);
  });

  EdgeSet es;
  for (std::size_t i = 0; i < half.size();) {
    std::size_t j = i;
    while (j < half.size() && half[j].a == half[i].a && half[j].b == half[i].b) ++j;
    const auto idx = static_cast<std::uint32_t>(es.edges.size());
    const double len = (mesh.vertices[half[i].a] - mesh.vertices[half[i].b]).norm();
    es.edges.push_back({half[i].a, half[i].b, len});
    std::array<std::int32_t, 2> ef{EdgeSet::kNoFace, EdgeSet::kNoFace};
    ef[0] = half[i].face;
    if (j - i >= 2) ef[1] = half[i + 1].face;
    es.edge_faces.push_back(ef);
    es.face_count.push_back(static_cast<std::uint32_t>(j - i));
    if (j - i == 1) {
      es.boundary.push_back(idx);
    } else if (j - i == 2) {
      es.interior.push_back(idx);
    } else {
      es.non_manifold.push_back(idx);
    }
    i = j;
  }
  return es;
}

std::vector<std::vector<Index>> vertex_adjacency(const TriMesh& mesh) {
  std::vector<std::vector<Index>> adj(mesh.num_vertices());
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      adj[f[k]].push_back(f[(k + 1) % 3]);
      adj[f[k]].push_back(f[(k + 2) % 3]);
    }
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return adj;
}

Vec3 face_normal_unnormalized(const TriMesh& mesh, const Face& f) {
  const Vec3& a = mesh.vertices[f[0]];
  return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
}

double face_area(const TriMesh& mesh, const Face& f) { return 0.5 * face_normal_unnormalized(mesh, f).norm(); }

Vec3 face_centroid(const TriMesh& mesh, const Face& f) {
  return (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
}

VertexNormals vertex_normals(const TriMesh& mesh) {
  VertexNormals out;
  out.normals.assign(mesh.num_vertices(), Vec3::Zero());
  out.degenerate.assign(mesh.num_vertices(), false);
  // The unnormalized cross product already carries twice the face area.
  for (const Face& f : mesh.faces) {
    const Vec3 n = face_normal_unnormalized(mesh, f);
    for (Index v : f) out.normals[v] += n;
  }
  for (std::size_t i = 0; i < out.normals.size(); ++i) {
    const double len = out.normals[i].norm();
    if (len > 0.0 && std::isfinite(len)) {
      out.normals[i] /= len;
    } else {
      out.normals[i].setZero();
      out.degenerate[i] = true;
      ++out.degenerate_count;
    }
  }
  return out;
}

std::pair<std::vector<Index>, std::size_t> connected_components(const TriMesh& mesh) {
  const std::size_t n = mesh.num_vertices();
  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const Face& f : mesh.faces) {
    for (int k = 1; k < 3; ++k) {
      Index a = find(f[0]), b = find(f[k]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  // Label by order of first appearance so ids are deterministic.
  std::vector<Index> label(n, static_cast<Index>(-1));
  std::vector<Index> comp(n);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Index r = find(static_cast<Index>(i));
    if (label[r] == static_cast<Index>(-1)) label[r] = static_cast<Index>(count++);
    comp[i] = label[r];
  }
  return {comp, count};
}

Digest topology_hash(const TriMesh& mesh) {
  ByteWriter w;
  w.magic("TOPO");
  w.u32(static_cast<std::uint32_t>(mesh.num_vertices()));
  w.u32(static_cast<std::uint32_t>(mesh.num_faces()));
  for (const Face& f : mesh.faces) {
    for (Index v : f) w.u32(v);
  }
  return sha256(w.data());
}

Digest content_hash(const TriMesh& mesh) {
  ByteWriter w;
  w.magic("MESH");
  const Digest topo = topology_hash(mesh);
  w.bytes(topo);
  for (const Vec3& v : mesh.vertices) {
    for (int k = 0; k < 3; ++k) {
      const auto bits = std::bit_cast<std::uint64_t>(v[k]);
      w.u32(static_cast<std::uint32_t>(bits));
      w.u32(static_cast<std::uint32_t>(bits >> 32));
    }
  }
  return sha256(w.data());
}

}  // namespace isoret
