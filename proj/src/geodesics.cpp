#include "isoret/geodesics.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <thread>

#include "isoret/binary_io.hpp"
#include "isoret/errors.hpp"

namespace isoret {

GeodesicMatrix::GeodesicMatrix(std::size_t n, std::vector<double> data) : n_(n), d_(std::move(data)) {
  if (d_.size() != n_ * n_) throw ArgumentError("geodesic matrix: data size does not match n*n");
}

GeodesicMatrix GeodesicMatrix::quantized() const {
  std::vector<double> q(d_.size());
  std::transform(d_.begin(), d_.end(), q.begin(), [](double v) { return static_cast<double>(static_cast<float>(v)); });
  return GeodesicMatrix(n_, std::move(q));
}

EdgeGraph::EdgeGraph(std::size_t num_vertices, const EdgeSet& edges) : offsets_(num_vertices + 1, 0) {
  for (const Edge& e : edges.edges) {
    ++offsets_[e.a + 1];
    ++offsets_[e.b + 1];
  }
  for (std::size_t i = 0; i < num_vertices; ++i) offsets_[i + 1] += offsets_[i];
  targets_.resize(offsets_.back());
  weights_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges.edges) {
    targets_[fill[e.a]] = e.b;
    weights_[fill[e.a]++] = e.rest_length;
    targets_[fill[e.b]] = e.a;
    weights_[fill[e.b]++] = e.rest_length;
  }
}

std::vector<double> EdgeGraph::distances_from(Index src) const {
  const std::size_t n = size();
  if (src >= n) throw ArgumentError("geodesic source " + std::to_string(src) + " out of range");
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Entry = std::pair<double, Index>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  dist[src] = 0.0;
  heap.push({0.0, src});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (std::size_t e = offsets_[u]; e < offsets_[u + 1]; ++e) {
      const Index v = targets_[e];
      const double nd = d + weights_[e];
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.push({nd, v});
      }
    }
  }
  return dist;
}

std::vector<double> single_source(const TriMesh& mesh, const EdgeSet& edges, Index src) {
  return EdgeGraph(mesh.num_vertices(), edges).distances_from(src);
}

GeodesicMatrix geodesic_matrix(const TriMesh& mesh, unsigned threads) {
  const std::size_t n = mesh.num_vertices();
  if (n == 0) throw ArgumentError("geodesic matrix of an empty mesh");

  const auto [comp, ncomp] = connected_components(mesh);
  if (ncomp != 1) {
    std::vector<std::size_t> sizes(ncomp, 0);
    for (Index c : comp) ++sizes[c];
    std::string msg = "template mesh is disconnected: " + std::to_string(ncomp) + " components of sizes";
    for (std::size_t s : sizes) msg += " " + std::to_string(s);
    throw ValidationError(msg);
  }

  const EdgeGraph graph(n, build_edges(mesh));
  std::vector<double> d(n * n);
  auto worker = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      const auto row = graph.distances_from(static_cast<Index>(i));
      std::copy(row.begin(), row.end(), d.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    for (auto& th : pool) th.join();
  }
  // Path sums from opposite ends can differ in the last bit; the upper
  // triangle (computed from the smaller source index) is authoritative.
  for (std::size_t i = 0; i < n; ++i) {
    d[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) d[j * n + i] = d[i * n + j];
  }
  return GeodesicMatrix(n, std::move(d));
}

GeodesicMatrix euclidean_matrix(std::span<const Vec3> points) {
  const std::size_t n = points.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (points[i] - points[j]).norm();
      d[i * n + j] = v;
      d[j * n + i] = v;
    }
  }
  return GeodesicMatrix(n, std::move(d));
}

void save_geodesic_cache(const GeodesicMatrix& geo, const std::filesystem::path& path) {
  ByteWriter w;
  w.magic(std::string_view("GEOD01\0\0", 8));
  w.u32(static_cast<std::uint32_t>(geo.size()));
  for (double v : geo.data()) w.f32(static_cast<float>(v));
  w.write_file(path);
}

GeodesicMatrix load_geodesic_cache(const std::filesystem::path& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic(std::string_view("GEOD01\0\0", 8));
  const std::size_t n = r.u32();
  if (r.remaining() != n * n * 4) {
    throw FormatError(r.source() + ": expected " + std::to_string(n * n * 4) + " payload bytes, found " +
                      std::to_string(r.remaining()));
  }
  std::vector<double> d(n * n);
  for (auto& v : d) v = r.f32();
  return GeodesicMatrix(n, std::move(d));
}

}  // namespace isoret
