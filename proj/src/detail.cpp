#include "isoret/detail.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "isoret/errors.hpp"

namespace isoret {

SparseMatrix uniform_laplacian(const TriMesh& mesh) {
  const auto adj = vertex_adjacency(mesh);
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ring = adj[static_cast<std::size_t>(i)];
    if (ring.empty()) throw ValidationError("vertex " + std::to_string(i) + " is isolated (degree 0)");
    trips.emplace_back(i, i, 1.0);
    const double w = -1.0 / static_cast<double>(ring.size());
    for (Index j : ring) trips.emplace_back(i, static_cast<Eigen::Index>(j), w);
  }
  SparseMatrix l(n, n);
  l.setFromTriplets(trips.begin(), trips.end());
  return l;
}

Coords to_coords(std::span<const Vec3> v) {
  Coords c(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) c.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return c;
}

std::vector<Vec3> from_coords(const Coords& c) {
  std::vector<Vec3> v(static_cast<std::size_t>(c.rows()));
  for (Eigen::Index i = 0; i < c.rows(); ++i) v[static_cast<std::size_t>(i)] = c.row(i).transpose();
  return v;
}

Coords laplacian_coords(const TriMesh& mesh) { return uniform_laplacian(mesh) * to_coords(mesh.vertices); }

std::vector<Index> default_anchors(const TriMesh& mesh, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("anchor fraction must lie in [0, 1]");
  const std::size_t n = mesh.num_vertices();
  if (n == 0) return {};
  std::vector<bool> chosen(n, false);
  std::vector<Index> anchors;
  const EdgeSet edges = build_edges(mesh);
  for (std::uint32_t e : edges.boundary) {
    for (Index v : {edges.edges[e].a, edges.edges[e].b}) {
      if (!chosen[v]) {
        chosen[v] = true;
        anchors.push_back(v);
      }
    }
  }
  const auto sample_count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  auto absorb = [&](Index a) {
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], (mesh.vertices[i] - mesh.vertices[a]).norm());
  };
  for (Index a : anchors) absorb(a);
  for (std::size_t s = 0; s < sample_count && anchors.size() < n; ++s) {
    Index pick = 0;
    if (anchors.empty()) {
      pick = 0;
    } else {
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i] && nearest[i] > best) {
          best = nearest[i];
          pick = static_cast<Index>(i);
        }
      }
    }
    chosen[pick] = true;
    anchors.push_back(pick);
    absorb(pick);
  }
  std::sort(anchors.begin(), anchors.end());
  return anchors;
}

std::vector<Index> load_anchor_list(const std::filesystem::path& path, std::size_t vertex_count) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open anchor file '" + path.string() + "'");
  std::vector<Index> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    long long v = 0;
    if (!(ls >> v)) {
      std::string tok;
      std::istringstream probe(line);
      if (probe >> tok) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected a vertex index");
      continue;
    }
    if (v < 0 || static_cast<std::size_t>(v) >= vertex_count) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": anchor " + std::to_string(v) +
                            " outside mesh of " + std::to_string(vertex_count) + " vertices");
    }
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

void save_anchor_list(std::span<const Index> anchors, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (Index a : anchors) out << a << '\n';
}

DetailResult detail_integrate(const TriMesh& source, const TriMesh& retargeted, std::span<const Index> anchors,
                              double anchor_weight) {
  const std::size_t n = source.num_vertices();
  if (retargeted.num_vertices() != n || retargeted.faces != source.faces) {
    throw ArgumentError("detail integration needs source and retargeted meshes with identical topology");
  }
  if (anchors.empty()) throw ArgumentError("detail integration needs at least one anchor");
  if (!(anchor_weight > 0.0)) throw ArgumentError("anchor weight must be positive");
  std::vector<Index> sorted(anchors.begin(), anchors.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ArgumentError("anchor indices must be distinct");
  if (sorted.back() >= n) throw ArgumentError("anchor index " + std::to_string(sorted.back()) + " out of range");

  const auto [comp, ncomp] = connected_components(source);
  std::vector<bool> anchored(ncomp, false);
  for (Index a : sorted) anchored[comp[a]] = true;
  for (std::size_t c = 0; c < ncomp; ++c) {
    if (!anchored[c]) {
      const auto first = static_cast<std::size_t>(std::find(comp.begin(), comp.end(), c) - comp.begin());
      const auto size = static_cast<std::size_t>(std::count(comp.begin(), comp.end(), c));
      throw ValidationError("connected component " + std::to_string(c) + " (" + std::to_string(size) +
                            " vertices, containing vertex " + std::to_string(first) +
                            ") has no anchor; the least-squares system is singular");
    }
  }

  const SparseMatrix lap = uniform_laplacian(source);
  const Coords delta = lap * to_coords(source.vertices);
  const auto rows = static_cast<Eigen::Index>(n + sorted.size());
  const auto cols = static_cast<Eigen::Index>(n);

  // Stack L and weighted one-hot anchor rows. Anchor order does not affect
  // the normal equations beyond summation order, so rows follow sorted order.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(lap.nonZeros()) + sorted.size());
  for (Eigen::Index r = 0; r < lap.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(lap, r); it; ++it) trips.emplace_back(r, it.col(), it.value());
  Coords rhs(rows, 3);
  rhs.topRows(cols) = delta;
  for (std::size_t a = 0; a < sorted.size(); ++a) {
    const auto r = static_cast<Eigen::Index>(n + a);
    trips.emplace_back(r, static_cast<Eigen::Index>(sorted[a]), anchor_weight);
    rhs.row(r) = anchor_weight * retargeted.vertices[sorted[a]].transpose();
  }
  Eigen::SparseMatrix<double> stacked(rows, cols);
  stacked.setFromTriplets(trips.begin(), trips.end());

  const Eigen::SparseMatrix<double> normal = stacked.transpose() * stacked;
  const Coords normal_rhs = stacked.transpose() * rhs;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success) throw NumericError("detail integration: factorization failed");
  Coords v = solver.solve(normal_rhs);
  if (solver.info() != Eigen::Success) throw NumericError("detail integration: solve failed");

  DetailResult out;
  out.rhs_norm = rhs.norm();
  // A few steps of iterative refinement on the normal equations.
  for (int pass = 0; pass < 3; ++pass) {
    const Coords r = normal_rhs - normal * v;
    out.normal_residual = r.norm();
    if (out.normal_residual <= 1e-12 * std::max(out.rhs_norm, 1e-300)) break;
    v += solver.solve(r);
  }
  out.normal_residual = (stacked.transpose() * (stacked * v - rhs)).norm();
  if (!v.allFinite()) throw NumericError("detail integration produced non-finite positions");
  out.mesh.faces = source.faces;
  out.mesh.vertices = from_coords(v);
  return out;
}

}  // namespace isoret
