#include "isoret/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include "isoret/errors.hpp"
#include "isoret/spatial.hpp"

namespace isoret {

namespace {

void require_same_count(const TriMesh& a, const TriMesh& b, std::string_view metric) {
  if (a.num_vertices() != b.num_vertices()) {
    throw ArgumentError(std::string(metric) + ": vertex counts differ (" + std::to_string(a.num_vertices()) +
                        " vs " + std::to_string(b.num_vertices()) + ")");
  }
}

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 10);
  return std::string(buf, p);
}

}  // namespace

double euclidean_distance(const TriMesh& pred, const TriMesh& gt) {
  require_same_count(pred, gt, "ED");
  if (pred.num_vertices() == 0) throw ArgumentError("ED: empty meshes");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.num_vertices(); ++i) sum += (pred.vertices[i] - gt.vertices[i]).norm();
  return sum / static_cast<double>(pred.num_vertices());
}

NormalConsistency normal_consistency(const TriMesh& pred, const TriMesh& gt) {
  require_same_count(pred, gt, "NC");
  const VertexNormals a = vertex_normals(pred);
  const VertexNormals b = vertex_normals(gt);
  NormalConsistency out;
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < pred.num_vertices(); ++i) {
    if (a.degenerate[i] || b.degenerate[i]) {
      ++out.excluded;
      continue;
    }
    sum += a.normals[i].dot(b.normals[i]);
    ++counted;
  }
  if (counted == 0) throw ArgumentError("NC: no vertex has a defined normal");
  out.value = sum / static_cast<double>(counted);
  return out;
}

double winding_number(const TriMesh& body, const Vec3& p) {
  double total = 0.0;
  for (const Face& f : body.faces) {
    const Vec3 a = body.vertices[f[0]] - p;
    const Vec3 b = body.vertices[f[1]] - p;
    const Vec3 c = body.vertices[f[2]] - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * std::numbers::pi);
}

double interpenetration_ratio(const TriMesh& garment, const TriMesh& body) {
  double inside = 0.0;
  double total = 0.0;
  for (const Face& f : garment.faces) {
    const double area = face_area(garment, f);
    total += area;
    if (winding_number(body, face_centroid(garment, f)) > 0.5) inside += area;
  }
  if (!(total > 0.0)) throw ArgumentError("IR: garment has zero total face area");
  return inside / total;
}

ChamferResult chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw ArgumentError("chamfer distance needs two non-empty point sets");
  auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    const KdTree3 tree(to);
    double s = 0.0;
    for (const Vec3& p : from) s += tree.nearest(p).dist2;
    return s;
  };
  const double ab = directed(a, b);
  const double ba = directed(b, a);
  return {ab + ba, ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size())};
}

double point_to_surface(const TriMesh& garment, const TriMesh& body) {
  if (body.faces.empty()) throw ArgumentError("P2S: body mesh has no faces");
  if (garment.vertices.empty()) throw ArgumentError("P2S: garment has no vertices");
  const TriangleBvh bvh(body);
  double sum = 0.0;
  for (const Vec3& v : garment.vertices) sum += std::sqrt(bvh.closest(v).dist2);
  return sum / static_cast<double>(garment.num_vertices());
}

RichnessResult richness_score(const GeodesicMatrix& geo, const VertexEmbedding& emb, int k) {
  const std::size_t n = geo.size();
  if (static_cast<Eigen::Index>(n) != emb.n()) {
    throw ArgumentError("richness: geodesic matrix has " + std::to_string(n) + " vertices, embedding " +
                        std::to_string(emb.n()));
  }
  if (k <= 0 || static_cast<std::size_t>(k) >= n) {
    throw ArgumentError("richness: k=" + std::to_string(k) + " must be in [1, " + std::to_string(n - 1) + "]");
  }
  const auto kk = static_cast<std::size_t>(k);
  const Eigen::Index d = emb.d();

  RichnessResult out;
  out.per_vertex.resize(n);
  std::vector<Index> geo_order(n - 1), emb_order(n - 1);
  std::vector<std::size_t> rank(n);
  std::vector<double> ed(n);
  double near_total = 0.0, far_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* gi = geo.row(i);
    const double* pi = emb.phi.row(static_cast<Eigen::Index>(i)).data();
    for (std::size_t j = 0; j < n; ++j) ed[j] = squared_distance(pi, emb.phi.row(static_cast<Eigen::Index>(j)).data(), d);

    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) geo_order[w++] = static_cast<Index>(j);
    emb_order = geo_order;

    auto clamp_sum = [&](bool far) {
      auto geo_less = [&](Index a, Index b) {
        return far ? (gi[a] > gi[b] || (gi[a] == gi[b] && a < b)) : (gi[a] < gi[b] || (gi[a] == gi[b] && a < b));
      };
      auto emb_less = [&](Index a, Index b) {
        return far ? (ed[a] > ed[b] || (ed[a] == ed[b] && a < b)) : (ed[a] < ed[b] || (ed[a] == ed[b] && a < b));
      };
      std::partial_sort(geo_order.begin(), geo_order.begin() + static_cast<std::ptrdiff_t>(kk), geo_order.end(),
                        geo_less);
      std::sort(emb_order.begin(), emb_order.end(), emb_less);
      for (std::size_t r = 0; r < emb_order.size(); ++r) rank[emb_order[r]] = r;
      double s = 0.0;
      for (std::size_t r = 0; r < kk; ++r) {
        const std::size_t er = rank[geo_order[r]];
        const std::size_t diff = er > r ? er - r : r - er;
        s += static_cast<double>(std::min(diff, kk));
      }
      return s / static_cast<double>(kk * kk);
    };
    const double near = clamp_sum(false);
    const double far = clamp_sum(true);
    out.per_vertex[i] = 0.5 * (near + far);
    near_total += near;
    far_total += far;
  }
  const auto nd = static_cast<double>(n);
  out.near = near_total / nd;
  out.far = far_total / nd;
  out.score = std::accumulate(out.per_vertex.begin(), out.per_vertex.end(), 0.0) / nd;
  return out;
}

std::string MetricsReport::record() const {
  auto kv = [](std::string_view key, const std::optional<double>& v) {
    return std::string(key) + "=" + (v ? fmt(*v) : std::string("NA"));
  };
  return kv("ed", ed) + " " + kv("nc", nc) + " " + kv("ir", ir) + " " + kv("cd", cd) + " " + kv("cd_mean", cd_mean) +
         " " + kv("p2s", p2s) + " nc_excluded=" + std::to_string(nc_excluded);
}

std::string MetricsReport::table() const {
  auto row = [](std::string_view label, const std::optional<double>& v) {
    std::string s(label);
    s.resize(28, ' ');
    return s + (v ? fmt(*v) : std::string("n/a")) + "\n";
  };
  return row("ED (m)", ed) + row("NC", nc) + row("IR", ir) + row("CD (sum, m^2)", cd) +
         row("CD (per-point mean, m^2)", cd_mean) + row("P2S (m)", p2s);
}

MetricsReport evaluate_metrics(const TriMesh& pred, const TriMesh* gt, const TriMesh* body) {
  MetricsReport r;
  if (gt) {
    r.ed = euclidean_distance(pred, *gt);
    const NormalConsistency nc = normal_consistency(pred, *gt);
    r.nc = nc.value;
    r.nc_excluded = nc.excluded;
    const ChamferResult cd = chamfer(pred.vertices, gt->vertices);
    r.cd = cd.sum;
    r.cd_mean = cd.mean;
  }
  if (body) {
    r.ir = interpenetration_ratio(pred, *body);
    r.p2s = point_to_surface(pred, *body);
  }
  return r;
}

}  // namespace isoret
