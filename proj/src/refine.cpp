#include "isoret/refine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "isoret/errors.hpp"

namespace isoret {

// ---------------------------------------------------------------------------
// Joint mask

bool JointMask::empty() const {
  return std::all_of(regions.begin(), regions.end(), [](const auto& kv) { return kv.second.empty(); });
}

JointMask parse_joint_mask(std::istream& in, std::string_view source, std::size_t template_vertex_count) {
  JointMask mask;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    const std::string where = std::string(source) + ":" + std::to_string(lineno) + ": ";
    long long idx = -1;
    std::string extra;
    if (!(ls >> idx) || (ls >> extra)) throw FormatError(where + "expected 'region_name vertex_index'");
    if (std::find(JointMask::kRegionNames.begin(), JointMask::kRegionNames.end(), name) ==
        JointMask::kRegionNames.end()) {
      throw ValidationError(where + "unknown region '" + name + "' (allowed: elbows, armpits, waist, knees)");
    }
    if (idx < 0 || static_cast<std::size_t>(idx) >= template_vertex_count) {
      throw ValidationError(where + "vertex index " + std::to_string(idx) + " outside template of " +
                            std::to_string(template_vertex_count) + " vertices");
    }
    mask.regions[name].push_back(static_cast<Index>(idx));
  }
  for (auto& [name, ids] : mask.regions) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return mask;
}

JointMask load_joint_mask(const std::filesystem::path& path, std::size_t template_vertex_count) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open region file '" + path.string() + "'");
  return parse_joint_mask(in, path.string(), template_vertex_count);
}

void save_joint_mask(const JointMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& [name, ids] : mask.regions)
    for (Index v : ids) out << name << ' ' << v << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

EdgeWeights joint_edge_weights(const TriMesh& garment, const EdgeSet& edges, const TriMesh& garment_template_instance,
                               const JointMask& mask) {
  EdgeWeights out;
  out.w.assign(edges.size(), 1.0);
  if (mask.empty()) {
    out.warnings.push_back("joint mask is empty; every edge keeps its length");
    return out;
  }
  std::vector<bool> in_joint(garment_template_instance.num_vertices(), false);
  for (const auto& [name, ids] : mask.regions) {
    for (Index v : ids) {
      if (v >= in_joint.size()) {
        throw ValidationError("joint region '" + name + "' references vertex " + std::to_string(v) +
                              " outside the template instance");
      }
      in_joint[v] = true;
    }
  }
  const KdTree3 tree(garment_template_instance.vertices);
  std::vector<bool> over_joint(garment.num_vertices());
  for (std::size_t i = 0; i < garment.num_vertices(); ++i) {
    over_joint[i] = in_joint[tree.nearest(garment.vertices[i]).index];
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (over_joint[edges.edges[e].a] && over_joint[edges.edges[e].b]) out.w[e] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edge length

LossValue edge_length_loss(const EdgeSet& rest_edges, std::span<const Vec3> positions, std::span<const double> w) {
  if (w.size() != rest_edges.size()) throw ArgumentError("edge weights do not match edge count");
  LossValue out;
  out.gradient.assign(positions.size(), Vec3::Zero());
  const std::size_t m = rest_edges.size();
  if (m == 0) return out;
  const double inv_m = 1.0 / static_cast<double>(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (w[i] == 0.0) continue;
    const Edge& e = rest_edges.edges[i];
    const Vec3 d = positions[e.a] - positions[e.b];
    const double len = d.norm();
    const double diff = len - e.rest_length;
    sum += w[i] * std::abs(diff);
    if (diff != 0.0 && len > 0.0) {
      const Vec3 g = (w[i] * inv_m * (diff > 0.0 ? 1.0 : -1.0) / len) * d;
      out.gradient[e.a] += g;
      out.gradient[e.b] -= g;
    }
  }
  out.value = sum * inv_m;
  return out;
}

// ---------------------------------------------------------------------------
// Bend

namespace {

/// Gradient of a scalar through c = (b - a) x (c - a): accumulates into the
/// three corner gradients given dL/dc.
void backprop_cross(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& g, Vec3& ga, Vec3& gb, Vec3& gc) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 d1 = e2.cross(g);
  const Vec3 d2 = g.cross(e1);
  gb += d1;
  gc += d2;
  ga -= d1 + d2;
}

constexpr double kDegenerateCross = 1e-24;

}  // namespace

BendLossValue bend_loss(std::span<const Face> faces, const EdgeSet& edges, std::span<const Vec3> positions) {
  BendLossValue out;
  out.gradient.assign(positions.size(), Vec3::Zero());
  const std::size_t m = edges.interior.size();
  if (m == 0) return out;
  const double inv_m = 1.0 / static_cast<double>(m);
  double sum = 0.0;
  for (std::uint32_t ei : edges.interior) {
    const Face& f1 = faces[static_cast<std::size_t>(edges.edge_faces[ei][0])];
    const Face& f2 = faces[static_cast<std::size_t>(edges.edge_faces[ei][1])];
    const Vec3 c1 = (positions[f1[1]] - positions[f1[0]]).cross(positions[f1[2]] - positions[f1[0]]);
    const Vec3 c2 = (positions[f2[1]] - positions[f2[0]]).cross(positions[f2[2]] - positions[f2[0]]);
    const double l1 = c1.norm();
    const double l2 = c2.norm();
    if (l1 < kDegenerateCross || l2 < kDegenerateCross) {
      ++out.skipped;
      continue;
    }
    const Vec3 n1 = c1 / l1;
    const Vec3 n2 = c2 / l2;
    const double dot = n1.dot(n2);
    sum += 1.0 - dot;
    // d(-n1.n2)/dc1 = -(n2 - (n1.n2) n1) / |c1|
    const Vec3 g1 = -inv_m * (n2 - dot * n1) / l1;
    const Vec3 g2 = -inv_m * (n1 - dot * n2) / l2;
    backprop_cross(positions[f1[0]], positions[f1[1]], positions[f1[2]], g1, out.gradient[f1[0]],
                   out.gradient[f1[1]], out.gradient[f1[2]]);
    backprop_cross(positions[f2[0]], positions[f2[1]], positions[f2[2]], g2, out.gradient[f2[0]],
                   out.gradient[f2[1]], out.gradient[f2[2]]);
  }
  out.value = sum * inv_m;
  return out;
}

// ---------------------------------------------------------------------------
// Correspondence

CorrespondenceLoss::CorrespondenceLoss(const RegisteredPair& target, const VertexEmbedding& target_emb,
                                       std::span<const Vec3> coarse, int k)
    : instance_(target.template_instance().vertices),
      template_phi_(target.template_embedding().phi),
      target_phi_(target_emb.phi),
      target_vertices_(target.surface().vertices),
      coarse_(coarse.begin(), coarse.end()),
      k_(static_cast<std::size_t>(k)),
      instance_tree_(instance_),
      target_index_(target_phi_) {
  if (k <= 0 || k_ > instance_.size() || static_cast<Eigen::Index>(k_) > target_phi_.rows()) {
    throw ArgumentError("correspondence loss: k=" + std::to_string(k) + " exceeds available vertices");
  }
  if (target_phi_.rows() != static_cast<Eigen::Index>(target_vertices_.size())) {
    throw ArgumentError("correspondence loss: target features do not match target vertex count");
  }
  if (target_phi_.cols() != template_phi_.cols()) {
    throw ArgumentError("correspondence loss: target and template feature dimensions differ");
  }
}

struct CorrespondenceLoss::VertexTerm {
  Vec3 target = Vec3::Zero();
  double distance = 0.0;
  Vec3 gradient = Vec3::Zero();  // d distance / d position
};

namespace {

/// Index of the smallest entry; ties to the first.
std::size_t argmin(std::span<const double> v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

CorrespondenceLoss::Frozen CorrespondenceLoss::freeze(std::span<const Vec3> positions) const {
  if (positions.size() != coarse_.size()) throw ArgumentError("correspondence loss: vertex count mismatch");
  const std::size_t n = positions.size();
  const Eigen::Index d = template_phi_.cols();
  Frozen fz;
  fz.template_ids.resize(n * k_);
  RowMatrix phi(static_cast<Eigen::Index>(n), d);
  std::vector<double> dist(k_), w(k_);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nn = instance_tree_.knn(positions[i], k_);
    for (std::size_t j = 0; j < k_; ++j) {
      fz.template_ids[i * k_ + j] = nn[j].index;
      dist[j] = std::sqrt(nn[j].dist2);
    }
    inverse_distance_weights(dist, w);
    auto row = phi.row(static_cast<Eigen::Index>(i));
    row.setZero();
    for (std::size_t j = 0; j < k_; ++j) {
      if (w[j] != 0.0) row += w[j] * template_phi_.row(nn[j].index);
    }
  }
  const auto knn = target_index_.query(phi, k_);
  fz.target_ids.resize(n * k_);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k_; ++j) fz.target_ids[i * k_ + j] = knn[i][j].index;
  return fz;
}

CorrespondenceLoss::VertexTerm CorrespondenceLoss::vertex_term(std::size_t i, const Vec3& pos, const Frozen& frozen,
                                                               bool with_gradient) const {
  const Eigen::Index d = template_phi_.cols();
  const Index* tids = frozen.template_ids.data() + i * k_;
  const Index* gids = frozen.target_ids.data() + i * k_;

  // Step 1: features at pos from the template instance.
  std::vector<double> r(k_), a(k_);
  for (std::size_t j = 0; j < k_; ++j) r[j] = (pos - instance_[tids[j]]).norm();
  const std::size_t rmin = argmin(r);
  const bool snap_a = r[rmin] < kSnapDistance;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);
  double a_sum = 0.0;
  if (snap_a) {
    phi = template_phi_.row(tids[rmin]).transpose();
  } else {
    for (std::size_t j = 0; j < k_; ++j) {
      a[j] = 1.0 / r[j];
      a_sum += a[j];
    }
    for (std::size_t j = 0; j < k_; ++j) phi += (a[j] / a_sum) * template_phi_.row(tids[j]).transpose();
  }

  // Step 2: target point from feature-space neighbors.
  std::vector<double> dist(k_), s(k_);
  for (std::size_t j = 0; j < k_; ++j) dist[j] = (phi - target_phi_.row(gids[j]).transpose()).norm();
  const std::size_t dmin = argmin(dist);
  const bool snap_b = dist[dmin] < kSnapDistance;
  VertexTerm t;
  double s_sum = 0.0;
  if (snap_b) {
    t.target = target_vertices_[gids[dmin]];
  } else {
    for (std::size_t j = 0; j < k_; ++j) {
      s[j] = 1.0 / dist[j];
      s_sum += s[j];
    }
    for (std::size_t j = 0; j < k_; ++j) t.target += (s[j] / s_sum) * target_vertices_[gids[j]];
  }
  const Vec3 diff = t.target - coarse_[i];
  t.distance = diff.norm();
  if (!with_gradient || t.distance == 0.0 || snap_b) return t;

  // Backward: d distance / d x' -> d / d s_j -> d / d phi -> d / d a_j -> d / d pos.
  const Vec3 gx = diff / t.distance;
  Eigen::VectorXd gphi = Eigen::VectorXd::Zero(d);
  for (std::size_t j = 0; j < k_; ++j) {
    const double gs = gx.dot(target_vertices_[gids[j]] - t.target) / s_sum;
    const double scale = -gs / (dist[j] * dist[j] * dist[j]);
    gphi += scale * (phi - target_phi_.row(gids[j]).transpose());
  }
  if (snap_a) return t;
  for (std::size_t j = 0; j < k_; ++j) {
    const double ga = gphi.dot(template_phi_.row(tids[j]).transpose() - phi) / a_sum;
    const double scale = -ga / (r[j] * r[j] * r[j]);
    t.gradient += scale * (pos - instance_[tids[j]]);
  }
  return t;
}

LossValue CorrespondenceLoss::evaluate(std::span<const Vec3> positions, const Frozen& frozen) const {
  if (positions.size() != coarse_.size()) throw ArgumentError("correspondence loss: vertex count mismatch");
  const std::size_t n = positions.size();
  LossValue out;
  out.gradient.assign(n, Vec3::Zero());
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const VertexTerm t = vertex_term(i, positions[i], frozen, true);
    sum += t.distance;
    out.gradient[i] = inv_n * t.gradient;
  }
  out.value = sum * inv_n;
  return out;
}

std::vector<Vec3> CorrespondenceLoss::targets(std::span<const Vec3> positions, const Frozen& frozen) const {
  std::vector<Vec3> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) out[i] = vertex_term(i, positions[i], frozen, false).target;
  return out;
}

// ---------------------------------------------------------------------------
// Objective and optimizer

void RefineConfig::check() const {
  if (lambda_length < 0.0 || lambda_corres < 0.0 || lambda_bend < 0.0) {
    throw ArgumentError("loss weights must be non-negative");
  }
  if (lambda_length == 0.0 && lambda_corres == 0.0 && lambda_bend == 0.0) {
    throw ArgumentError("at least one loss weight must be positive");
  }
  if (!(step > 0.0)) throw ArgumentError("step size must be positive");
  if (max_iterations <= 0) throw ArgumentError("max iterations must be positive");
  if (!(tolerance > 0.0)) throw ArgumentError("convergence tolerance must be positive");
  if (k <= 0) throw ArgumentError("neighbor count k must be positive");
  if (!(smoothing >= 0.0)) throw ArgumentError("smoothing must be non-negative");
}

RefineObjective::RefineObjective(const TriMesh& garment, std::span<const Vec3> coarse, std::vector<double> edge_weights,
                                 const RegisteredPair* target, const VertexEmbedding* target_emb,
                                 const RefineConfig& cfg)
    : faces_(garment.faces), edges_(build_edges(garment)), weights_(std::move(edge_weights)), cfg_(cfg) {
  cfg_.check();
  if (coarse.size() != garment.num_vertices()) {
    throw ArgumentError("coarse mesh has " + std::to_string(coarse.size()) + " vertices, garment has " +
                        std::to_string(garment.num_vertices()));
  }
  if (weights_.empty()) weights_.assign(edges_.size(), 1.0);
  if (weights_.size() != edges_.size()) throw ArgumentError("edge weight count does not match garment edges");
  if (cfg_.lambda_corres > 0.0) {
    if (!target || !target_emb) throw ArgumentError("correspondence loss needs the target and its features");
    corres_.emplace(*target, *target_emb, coarse, cfg_.k);
  }
}

RefineObjective::Evaluation RefineObjective::evaluate(std::span<const Vec3> positions) const {
  Evaluation ev;
  ev.gradient.assign(positions.size(), Vec3::Zero());
  auto accumulate = [&](const LossValue& lv, double lambda, double& slot) {
    slot = lv.value;
    ev.loss.total += lambda * lv.value;
    for (std::size_t i = 0; i < positions.size(); ++i) ev.gradient[i] += lambda * lv.gradient[i];
  };
  if (cfg_.lambda_length > 0.0) accumulate(edge_length_loss(edges_, positions, weights_), cfg_.lambda_length, ev.loss.length);
  if (corres_) accumulate(corres_->evaluate(positions), cfg_.lambda_corres, ev.loss.corres);
  if (cfg_.lambda_bend > 0.0) {
    const BendLossValue b = bend_loss(faces_, edges_, positions);
    ev.bend_skipped = b.skipped;
    accumulate(b, cfg_.lambda_bend, ev.loss.bend);
  }
  return ev;
}

namespace {

std::string describe(const LossBreakdown& l) {
  std::ostringstream s;
  s << "length=" << l.length << " corres=" << l.corres << " bend=" << l.bend << " total=" << l.total;
  return s.str();
}

/// Applies (I + alpha K)^-1 to per-vertex vectors, K the graph Laplacian of
/// the garment edges. Identity when alpha is 0.
class Smoother {
 public:
  Smoother(std::size_t n, const EdgeSet& edges, double alpha) : alpha_(alpha) {
    if (alpha_ == 0.0) return;
    const auto nn = static_cast<Eigen::Index>(n);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(n + 4 * edges.size());
    for (Eigen::Index i = 0; i < nn; ++i) t.emplace_back(i, i, 1.0);
    for (const Edge& e : edges.edges) {
      t.emplace_back(e.a, e.a, alpha_);
      t.emplace_back(e.b, e.b, alpha_);
      t.emplace_back(e.a, e.b, -alpha_);
      t.emplace_back(e.b, e.a, -alpha_);
    }
    Eigen::SparseMatrix<double> m(nn, nn);
    m.setFromTriplets(t.begin(), t.end());
    solver_.compute(m);
    if (solver_.info() != Eigen::Success) throw NumericError("refine: smoothing factorization failed");
  }

  void apply(std::span<const Vec3> g, std::vector<Vec3>& out) const {
    out.assign(g.begin(), g.end());
    if (alpha_ == 0.0) return;
    Eigen::Matrix<double, Eigen::Dynamic, 3> b(static_cast<Eigen::Index>(g.size()), 3);
    for (std::size_t i = 0; i < g.size(); ++i) b.row(static_cast<Eigen::Index>(i)) = g[i].transpose();
    const Eigen::Matrix<double, Eigen::Dynamic, 3> x = solver_.solve(b);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = x.row(static_cast<Eigen::Index>(i)).transpose();
  }

 private:
  double alpha_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace

RefineResult minimize(const RefineObjective& objective, const TriMesh& coarse, const RefineConfig& cfg) {
  cfg.check();
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 50;
  constexpr std::size_t kWindow = 10;

  RefineResult res;
  std::vector<Vec3> pos = coarse.vertices;
  auto ev = objective.evaluate(pos);
  res.initial = ev.loss;
  res.history.push_back(ev.loss.total);
  if (ev.bend_skipped > 0) {
    res.warnings.push_back("bend loss skipped " + std::to_string(ev.bend_skipped) + " edges next to degenerate faces");
  }

  const Smoother smoother(pos.size(), objective.edges(), cfg.smoothing);
  double step = cfg.step;
  std::vector<Vec3> trial(pos.size());
  std::vector<Vec3> dir;
  res.stop_reason = "max iterations";
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    double g2 = 0.0;
    for (const Vec3& g : ev.gradient) g2 += g.squaredNorm();
    if (!std::isfinite(g2)) {
      throw NumericError("refine: non-finite gradient at iteration " + std::to_string(it) + " (" +
                         describe(ev.loss) + ")");
    }
    if (g2 == 0.0) {
      res.stop_reason = "zero gradient";
      break;
    }
    smoother.apply(ev.gradient, dir);
    double slope = 0.0;  // directional derivative along -dir, negated
    for (std::size_t i = 0; i < pos.size(); ++i) slope += ev.gradient[i].dot(dir[i]);
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      for (std::size_t i = 0; i < pos.size(); ++i) trial[i] = pos[i] - step * dir[i];
      auto cand = objective.evaluate(trial);
      if (std::isfinite(cand.loss.total) && cand.loss.total <= ev.loss.total - kArmijo * step * slope) {
        pos.swap(trial);
        ev = std::move(cand);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.stop_reason = "line search stalled";
      break;
    }
    res.iterations = it;
    res.history.push_back(ev.loss.total);
    step *= 1.5;
    const std::size_t h = res.history.size();
    if (ev.loss.total == 0.0) {
      res.stop_reason = "zero loss";
      break;
    }
    if (h > kWindow) {
      const double before = res.history[h - 1 - kWindow];
      if (before - ev.loss.total <= cfg.tolerance * before) {
        res.stop_reason = "converged";
        break;
      }
    }
  }
  res.final = ev.loss;
  res.mesh.faces = coarse.faces;
  res.mesh.vertices = std::move(pos);
  return res;
}

RefineResult refine(const RefineInputs& in, const RefineConfig& cfg) {
  if (in.coarse.faces != in.garment.faces) throw ArgumentError("coarse mesh must share the garment's faces");
  const EdgeSet edges = build_edges(in.garment);
  EdgeWeights w = joint_edge_weights(in.garment, edges, in.garment_template_instance, in.mask);
  const RefineObjective objective(in.garment, in.coarse.vertices, std::move(w.w), &in.target, &in.target_emb, cfg);
  RefineResult res = minimize(objective, in.coarse, cfg);
  res.warnings.insert(res.warnings.begin(), w.warnings.begin(), w.warnings.end());
  return res;
}

}  // namespace isoret
