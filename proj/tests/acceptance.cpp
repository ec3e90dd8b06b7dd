// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <Eigen/Dense>

#include "isoret/detail.hpp"
#include "isoret/geodesics.hpp"
#include "isoret/metrics.hpp"
#include "isoret/pipeline.hpp"
#include "isoret/refine.hpp"
#include "isoret/spatial.hpp"
#include "isoret/synth.hpp"
#include "testing.hpp"

namespace {

using namespace isoret;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kOracleTol = 1e-9;
constexpr int kOracleCases = 100;
constexpr double kOracleBudget = 60.0;
constexpr double kMdsTol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr double kFdTol = 1e-4;
constexpr int kGradientFixtures = 10;
constexpr double kLengthDrop = 0.80;
constexpr int kDescentIterations = 500;
constexpr double kDescentBudget = 120.0;
constexpr double kIdentityTol = 1e-6;
constexpr double kDenseTol = 1e-4;
constexpr int kRichnessK = 32;
constexpr double kRichnessBudget = 300.0;
constexpr double kSlabTol = 0.02;
constexpr double kIrMax = 0.05;
constexpr double kP2sLow = 0.2;
constexpr double kP2sHigh = 3.0;
constexpr double kPipelineBudget = 300.0;

// Explicit refinement weights for the end-to-end run.
constexpr double kLambdaLength = 1.0;
constexpr double kLambdaCorres = 0.1;
constexpr double kLambdaBend = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Shared humanoid scenario

struct Scenario {
  synth::Fixture fx = synth::make_fixture();
  GeodesicMatrix geo;
  double geodesic_seconds = 0.0;

  Scenario() {
    const auto t0 = Clock::now();
    geo = cached_geodesics(fx.template_mesh, std::nullopt);
    geodesic_seconds = seconds_since(t0);
  }
};

// ---------------------------------------------------------------------------
// 1. Oracle equivalence

Eigen::RowVectorXd brute_idw(std::size_t count, std::size_t k, const std::function<double(std::size_t)>& dist2,
                             const RowMatrix& values) {
  std::vector<std::pair<double, Index>> all;
  for (std::size_t i = 0; i < count; ++i) all.emplace_back(dist2(i), static_cast<Index>(i));
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

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::normal_distribution<double> gauss;
  const TriMesh base = testing::icosphere(2);
  double worst_extrap = 0.0, worst_corr = 0.0, worst_cd = 0.0, worst_p2s = 0.0;
  for (int c = 0; c < kOracleCases; ++c) {
    const int k = 1 + c % 16;
    const Eigen::Index d = 1 + c % 12;
    // Extrapolation onto a random surface.
    const TriMesh inst = testing::jittered(base, rng, 0.05);
    VertexEmbedding emb;
    emb.template_hash = topology_hash(inst);
    emb.phi.resize(static_cast<Eigen::Index>(inst.num_vertices()), d);
    for (Eigen::Index i = 0; i < emb.phi.size(); ++i) emb.phi.data()[i] = gauss(rng);
    const TriMesh surf = testing::jittered(testing::icosphere(1, 1.05), rng, 0.05);
    const VertexEmbedding ex = extrapolate_embedding(RegisteredPair(surf, inst, emb), k);
    for (std::size_t i = 0; i < surf.num_vertices(); ++i) {
      const auto ref = brute_idw(
          inst.num_vertices(), static_cast<std::size_t>(k),
          [&](std::size_t j) { return squared_distance(surf.vertices[i], inst.vertices[j]); }, emb.phi);
      worst_extrap = std::max(worst_extrap, (ex.phi.row(static_cast<Eigen::Index>(i)) - ref).cwiseAbs().maxCoeff());
    }
    // Feature-space correspondence against the instance.
    RowMatrix pos(static_cast<Eigen::Index>(inst.num_vertices()), 3);
    for (std::size_t i = 0; i < inst.num_vertices(); ++i)
      pos.row(static_cast<Eigen::Index>(i)) = inst.vertices[i].transpose();
    const CorrespondenceMap corr = correspond(ex, emb, inst.vertices, k);
    for (Eigen::Index i = 0; i < ex.n(); ++i) {
      const auto ref = brute_idw(
          inst.num_vertices(), static_cast<std::size_t>(k),
          [&](std::size_t j) {
            return squared_distance(ex.phi.row(i).data(), emb.phi.row(static_cast<Eigen::Index>(j)).data(), d);
          },
          pos);
      worst_corr = std::max(worst_corr, (corr.points[static_cast<std::size_t>(i)] - ref.transpose()).cwiseAbs().maxCoeff());
    }
    // Chamfer.
    const auto a = testing::random_points(rng, 40 + static_cast<std::size_t>(c));
    const auto b = testing::random_points(rng, 60);
    auto one_way = [](std::span<const Vec3> x, std::span<const Vec3> y) {
      double s = 0.0;
      for (const Vec3& p : x) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : y) best = std::min(best, squared_distance(p, q));
        s += best;
      }
      return s;
    };
    worst_cd = std::max(worst_cd, std::abs(chamfer(a, b).sum - (one_way(a, b) + one_way(b, a))));
    // Point to surface.
    double ref = 0.0;
    for (const Vec3& p : surf.vertices) {
      double best = std::numeric_limits<double>::infinity();
      for (const Face& f : inst.faces) {
        best = std::min(best, (p - closest_point_on_triangle(p, inst.vertices[f[0]], inst.vertices[f[1]],
                                                             inst.vertices[f[2]]))
                                  .norm());
      }
      ref += best;
    }
    ref /= static_cast<double>(surf.num_vertices());
    worst_p2s = std::max(worst_p2s, std::abs(point_to_surface(surf, inst) - ref));
  }
  const double t = seconds_since(t0);
  const double worst = std::max({worst_extrap, worst_corr, worst_cd, worst_p2s});
  return {worst <= kOracleTol && t < kOracleBudget,
          std::to_string(kOracleCases) + " cases each; max error extrapolation " + fmt(worst_extrap) +
              ", correspondence " + fmt(worst_corr) + ", CD " + fmt(worst_cd) + ", P2S " + fmt(worst_p2s) +
              " (tol " + fmt(kOracleTol) + "); " + fmt(t) + " s (budget " + fmt(kOracleBudget) + " s)"};
}

// ---------------------------------------------------------------------------
// 2. Self-correspondence

Outcome self_correspondence(const Scenario& s, const VertexEmbedding& emb) {
  const TriMesh& body = s.fx.body_a;
  const VertexEmbedding features = extrapolate_embedding(RegisteredPair(body, body, emb), kDefaultNeighbors);
  const CorrespondenceMap corr = correspond(features, features, body.vertices, kDefaultNeighbors);
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < body.num_vertices(); ++i) mismatched += corr.points[i] != body.vertices[i];
  return {mismatched == 0, std::to_string(body.num_vertices() - mismatched) + "/" +
                               std::to_string(body.num_vertices()) + " vertices map exactly onto themselves"};
}

// ---------------------------------------------------------------------------
// 3. MDS exactness

Outcome mds_exactness() {
  std::mt19937_64 rng(1003);
  const auto p = testing::random_points(rng, 50);
  const VertexEmbedding e = isomap(euclidean_matrix(p), 3);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < 50; ++i)
    for (Eigen::Index j = 0; j < 50; ++j)
      worst = std::max(worst, std::abs((e.phi.row(i) - e.phi.row(j)).norm() -
                                       (p[static_cast<std::size_t>(i)] - p[static_cast<std::size_t>(j)]).norm()));
  return {worst <= kMdsTol, "max pairwise distance error " + fmt(worst) + " (tol " + fmt(kMdsTol) + ")"};
}

// ---------------------------------------------------------------------------
// 4. Gradient correctness

Outcome gradient_correctness() {
  double worst_len = 0.0, worst_bend = 0.0, worst_corr = 0.0;
  std::size_t max_vertices = 0;
  for (int seed = 0; seed < kGradientFixtures; ++seed) {
    const testing::RefineScene s(static_cast<std::uint64_t>(seed) + 100);
    max_vertices = std::max(max_vertices, s.garment.num_vertices());
    const EdgeSet edges = build_edges(s.garment);
    const std::vector<double> w(edges.size(), 1.0);
    const auto len = [&](std::span<const Vec3> x) { return edge_length_loss(edges, x, w).value; };
    worst_len = std::max(
        worst_len, testing::gradient_check(len, edge_length_loss(edges, s.trial, w).gradient, s.trial, kFdStep));
    const auto bend = [&](std::span<const Vec3> x) { return bend_loss(s.garment.faces, edges, x).value; };
    worst_bend = std::max(worst_bend, testing::gradient_check(bend, bend_loss(s.garment.faces, edges, s.trial).gradient,
                                                              s.trial, kFdStep));
    const RegisteredPair pair = s.target_pair();
    const CorrespondenceLoss loss(pair, s.target_emb, s.coarse.vertices, 4);
    const auto frozen = loss.freeze(s.trial);
    const auto corr = [&](std::span<const Vec3> x) { return loss.evaluate(x, frozen).value; };
    worst_corr = std::max(worst_corr,
                          testing::gradient_check(corr, loss.evaluate(s.trial, frozen).gradient, s.trial, kFdStep));
  }
  const double worst = std::max({worst_len, worst_bend, worst_corr});
  return {worst < kFdTol, std::to_string(kGradientFixtures) + " fixtures (<= " + std::to_string(max_vertices) +
                              " garment vertices); max relative error length " + fmt(worst_len) + ", bend " +
                              fmt(worst_bend) + ", correspondence " + fmt(worst_corr) + " (tol " + fmt(kFdTol) + ")"};
}

// ---------------------------------------------------------------------------
// 5. Descent property

bool monotone(const std::vector<double>& h) {
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] > h[i - 1]) return false;
  return true;
}

Outcome descent_property(const Scenario& s, const std::vector<double>& pipeline_history) {
  std::size_t runs = 0, violations = 0;
  for (int seed = 0; seed < kGradientFixtures; ++seed) {
    const testing::RefineScene sc(static_cast<std::uint64_t>(seed) + 200);
    const RegisteredPair pair = sc.target_pair();
    RefineConfig cfg;
    cfg.k = 4;
    cfg.max_iterations = 100;
    const RefineInputs in{sc.garment, sc.garment, sc.coarse, pair, sc.target_emb, JointMask{}};
    ++runs;
    violations += !monotone(refine(in, cfg).history);
  }
  ++runs;
  violations += !monotone(pipeline_history);

  const auto t0 = Clock::now();
  const TriMesh stretched = synth::scaled(s.fx.shirt, 1.2);
  RefineConfig cfg;
  cfg.lambda_length = kLambdaLength;
  cfg.lambda_bend = kLambdaBend;
  cfg.lambda_corres = 0.0;
  cfg.max_iterations = kDescentIterations;
  const RefineObjective objective(s.fx.shirt, stretched.vertices, {}, nullptr, nullptr, cfg);
  const RefineResult r = minimize(objective, stretched, cfg);
  const double t = seconds_since(t0);
  ++runs;
  violations += !monotone(r.history);
  const double drop = 1.0 - r.final.length / r.initial.length;
  return {violations == 0 && drop >= kLengthDrop && t < kDescentBudget,
          std::to_string(runs - violations) + "/" + std::to_string(runs) + " runs monotone; stretched shirt: length " +
              fmt(r.initial.length) + " -> " + fmt(r.final.length) + " (drop " + fmt(100.0 * drop) + "%, need " +
              fmt(100.0 * kLengthDrop) + "%) in " + std::to_string(r.iterations) + " iterations, " + fmt(t) +
              " s (budget " + fmt(kDescentBudget) + " s)"};
}

// ---------------------------------------------------------------------------
// 6. Laplacian identity

std::vector<Vec3> dense_detail(const TriMesh& source, const TriMesh& retargeted, std::span<const Index> anchors) {
  const auto n = static_cast<Eigen::Index>(source.num_vertices());
  const auto adj = vertex_adjacency(source);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + static_cast<Eigen::Index>(anchors.size()), n);
  Eigen::MatrixXd v(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ring = adj[static_cast<std::size_t>(i)];
    a(i, i) = 1.0;
    for (Index j : ring) a(i, j) -= 1.0 / static_cast<double>(ring.size());
    v.row(i) = source.vertices[static_cast<std::size_t>(i)].transpose();
  }
  Eigen::MatrixXd b(a.rows(), 3);
  b.topRows(n) = a.topRows(n) * v;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    a(n + static_cast<Eigen::Index>(k), anchors[k]) = 1.0;
    b.row(n + static_cast<Eigen::Index>(k)) = retargeted.vertices[anchors[k]].transpose();
  }
  const Eigen::MatrixXd x = a.colPivHouseholderQr().solve(b);
  std::vector<Vec3> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = x.row(i).transpose();
  return out;
}

double max_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).norm());
  return m;
}

Outcome laplacian_identity(const Scenario& s) {
  std::mt19937_64 rng(1006);
  const TriMesh& shirt = s.fx.shirt;
  double worst_identity = 0.0;
  std::uniform_int_distribution<Index> pick(0, static_cast<Index>(shirt.num_vertices() - 1));
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Index> anchors = trial == 0 ? default_anchors(shirt) : std::vector<Index>{};
    for (int a = 0; a < 1 + 20 * trial; ++a) anchors.push_back(pick(rng));
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
    worst_identity = std::max(worst_identity, max_distance(detail_integrate(shirt, shirt, anchors).mesh.vertices,
                                                           shirt.vertices));
  }
  // Bump grid transferred onto a bent plane.
  TriMesh src = testing::grid(16, 16);
  for (Vec3& v : src.vertices) {
    const double r2 = (v.x() - 0.5) * (v.x() - 0.5) + (v.y() - 0.5) * (v.y() - 0.5);
    v.z() = 0.15 * std::exp(-r2 / 0.02);
  }
  TriMesh bent = testing::grid(16, 16);
  for (Vec3& v : bent.vertices) v.z() = 0.3 * std::sin(3.0 * v.x());
  const std::vector<Index> anchors = default_anchors(bent);
  const double worst_dense =
      max_distance(detail_integrate(src, bent, anchors).mesh.vertices, dense_detail(src, bent, anchors));
  return {worst_identity <= kIdentityTol && worst_dense <= kDenseTol,
          "identity max deviation " + fmt(worst_identity) + " (tol " + fmt(kIdentityTol) +
              "); bump transfer vs dense solve " + fmt(worst_dense) + " (tol " + fmt(kDenseTol) + ")"};
}

// ---------------------------------------------------------------------------
// 7. Richness trend

Outcome richness_trend(const Scenario& s) {
  const auto t0 = Clock::now();
  const Digest hash = topology_hash(s.fx.template_mesh);
  std::vector<double> scores;
  std::string detail;
  for (int d : {16, 32, 64, 128}) {
    const RichnessResult r = richness_score(s.geo, isomap(s.geo, d, hash), kRichnessK);
    scores.push_back(r.score);
    detail += "R(" + std::to_string(d) + ")=" + fmt(r.score) + " [near " + fmt(r.near) + ", far " + fmt(r.far) + "] ";
  }
  const double t = seconds_since(t0) + s.geodesic_seconds;
  bool strict = true;
  for (std::size_t i = 1; i < scores.size(); ++i) strict = strict && scores[i] < scores[i - 1];
  return {strict && t < kRichnessBudget, detail + "k=" + std::to_string(kRichnessK) + "; need strict decrease; " +
                                             fmt(t) + " s incl. geodesics (budget " + fmt(kRichnessBudget) + " s)"};
}

// ---------------------------------------------------------------------------
// 8. Metric sanity

Outcome metric_sanity(const Scenario& s) {
  const TriMesh& shirt = s.fx.shirt;
  const TriMesh& body = s.fx.body_a;
  const double ed = euclidean_distance(shirt, shirt);
  const double nc = normal_consistency(shirt, shirt).value;
  const double cd = chamfer(shirt.vertices, shirt.vertices).sum;
  const double p2s = point_to_surface(body, body);
  const double ir_in = interpenetration_ratio(testing::icosphere(2, 0.05, Vec3(0.0, 1.25, 0.0)), body);
  const double ir_out = interpenetration_ratio(shirt, body);
  // Sheet half inside a box body.
  const TriMesh box = testing::box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
  TriMesh slab = testing::grid(40, 40);
  for (Vec3& v : slab.vertices) v = Vec3(v.x() - 0.5, 0.5 + v.y(), 0.0);
  const double ir_half = interpenetration_ratio(slab, box);
  const bool pass = ed == 0.0 && std::abs(nc - 1.0) <= 1e-12 && cd == 0.0 && p2s <= 1e-12 && ir_in == 1.0 &&
                    ir_out == 0.0 && std::abs(ir_half - 0.5) <= kSlabTol;
  return {pass, "identical: ED=" + fmt(ed) + " NC=" + fmt(nc) + " CD=" + fmt(cd) + " P2S=" + fmt(p2s) +
                    "; IR inside=" + fmt(ir_in) + " outside=" + fmt(ir_out) + " half=" + fmt(ir_half) + " (0.5 +- " +
                    fmt(kSlabTol) + ")"};
}

// ---------------------------------------------------------------------------
// 9 and 10. Pipeline through the command-line tool

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

struct CliRun {
  int status = -1;
  double seconds = 0.0;
};

CliRun run_pipeline_cli(const fs::path& in, const fs::path& out, const fs::path& cache) {
  std::ostringstream cmd;
  cmd << ISORET_CLI_PATH << " pipeline --template " << quote(in / "template.obj") << " --garment "
      << quote(in / "shirt.obj") << " --garment-reg " << quote(in / "body_a.obj") << " --target "
      << quote(in / "body_b.obj") << " --target-reg " << quote(in / "body_b.obj") << " --regions "
      << quote(in / "regions.txt") << " --gt " << quote(in / "shirt_on_b.obj") << " --lambda-length "
      << kLambdaLength << " --lambda-corres " << kLambdaCorres << " --lambda-bend " << kLambdaBend << " --cache "
      << quote(cache) << " --out " << quote(out) << " > " << quote(out.string() + ".stdout") << " 2> "
      << quote(out.string() + ".stderr");
  const auto t0 = Clock::now();
  const int raw = std::system(cmd.str().c_str());
  CliRun r;
  r.seconds = seconds_since(t0);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

struct PipelineRuns {
  fs::path inputs;
  fs::path first;
  fs::path second;
  CliRun a, b;
};

Outcome end_to_end(const Scenario& s, const PipelineRuns& runs) {
  if (runs.a.status != 0) return {false, "pipeline exited with status " + std::to_string(runs.a.status)};
  const TriMesh final_mesh = load_mesh(runs.first / "final.obj");
  const bool same_topology =
      final_mesh.num_vertices() == s.fx.shirt.num_vertices() && final_mesh.faces == s.fx.shirt.faces;
  const double ir = interpenetration_ratio(final_mesh, s.fx.body_b);
  const double p2s = point_to_surface(final_mesh, s.fx.body_b);
  const double p2s_orig = point_to_surface(s.fx.shirt, s.fx.body_a);
  const double ratio = p2s / p2s_orig;
  const bool pass = same_topology && ir <= kIrMax && ratio >= kP2sLow && ratio <= kP2sHigh &&
                    runs.a.seconds < kPipelineBudget;
  return {pass, std::string("topology ") + (same_topology ? "preserved" : "CHANGED") + "; IR " + fmt(ir) +
                    " (max " + fmt(kIrMax) + "); P2S " + fmt(p2s) + " vs original " + fmt(p2s_orig) + " = " +
                    fmt(ratio) + "x (allowed " + fmt(kP2sLow) + "x-" + fmt(kP2sHigh) + "x); " + fmt(runs.a.seconds) +
                    " s (budget " + fmt(kPipelineBudget) + " s)"};
}

Outcome determinism(const PipelineRuns& runs) {
  if (runs.a.status != 0 || runs.b.status != 0) {
    return {false, "pipeline exited with status " + std::to_string(runs.a.status) + "/" + std::to_string(runs.b.status)};
  }
  std::vector<std::string> differing;
  for (const char* f : {"template.isoemb", "coarse.obj", "coarse.corr", "refined.obj", "final.obj", "metrics.txt"}) {
    if (testing::read_bytes(runs.first / f) != testing::read_bytes(runs.second / f)) differing.push_back(f);
  }
  const bool same_stdout = testing::read_bytes(runs.first.string() + ".stdout") ==
                           testing::read_bytes(runs.second.string() + ".stdout");
  std::string detail = differing.empty() ? "all stage outputs byte-identical" : "differs:";
  for (const auto& f : differing) detail += " " + f;
  detail += same_stdout ? "; metric records identical" : "; metric records DIFFER";
  detail += " (second run read the geodesic cache written by the first)";
  return {differing.empty() && same_stdout, detail};
}

std::vector<double> refine_history_of(const Scenario& s, const fs::path& run) {
  // Recompute the refinement of the first run in-process to inspect its loss history.
  const TriMesh coarse = load_mesh(run / "coarse.obj");
  const VertexEmbedding emb = load_embedding(run / "template.isoemb");
  const RegisteredPair target(s.fx.body_b, s.fx.body_b, emb);
  const VertexEmbedding target_features = extrapolate_embedding(target, kDefaultNeighbors);
  RefineConfig cfg;
  cfg.lambda_length = kLambdaLength;
  cfg.lambda_corres = kLambdaCorres;
  cfg.lambda_bend = kLambdaBend;
  const RefineInputs in{s.fx.shirt, s.fx.body_a, coarse, target, target_features, s.fx.regions};
  const RefineResult r = refine(in, cfg);
  const TriMesh written = load_mesh(run / "refined.obj");
  if (written.vertices != r.mesh.vertices) return {1.0, 2.0};  // reported as non-monotone: replay diverged
  return r.history;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  };
  auto guarded = [&](int id, const char* name, const std::function<Outcome()>& f) {
    try {
      report(id, name, f());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  std::optional<Scenario> scenario;
  try {
    scenario.emplace();
  } catch (const std::exception& e) {
    std::cout << "FAIL  humanoid scenario could not be built: " << e.what() << std::endl;
    return 1;
  }
  const Scenario& s = *scenario;

  testing::TempDir dir;
  PipelineRuns runs;
  runs.inputs = dir / "inputs";
  runs.first = dir / "run1";
  runs.second = dir / "run2";
  fs::create_directories(runs.inputs);
  save_mesh(s.fx.template_mesh, runs.inputs / "template.obj");
  save_mesh(s.fx.body_a, runs.inputs / "body_a.obj");
  save_mesh(s.fx.body_b, runs.inputs / "body_b.obj");
  save_mesh(s.fx.shirt, runs.inputs / "shirt.obj");
  save_mesh(s.fx.shirt_on_b, runs.inputs / "shirt_on_b.obj");
  save_joint_mask(s.fx.regions, runs.inputs / "regions.txt");

  guarded(1, "oracle equivalence", oracle_equivalence);
  guarded(2, "self-correspondence identity", [&] {
    return self_correspondence(s, isomap(s.geo, kDefaultEmbeddingDim, topology_hash(s.fx.template_mesh)));
  });
  guarded(3, "MDS exactness", mds_exactness);
  guarded(4, "gradient correctness", gradient_correctness);
  runs.a = run_pipeline_cli(runs.inputs, runs.first, dir / "cache");
  runs.b = run_pipeline_cli(runs.inputs, runs.second, dir / "cache");
  guarded(5, "descent property", [&] {
    return descent_property(s, runs.a.status == 0 ? refine_history_of(s, runs.first) : std::vector<double>{1.0, 2.0});
  });
  guarded(6, "Laplacian identity", [&] { return laplacian_identity(s); });
  guarded(7, "richness trend", [&] { return richness_trend(s); });
  guarded(8, "metric sanity", [&] { return metric_sanity(s); });
  guarded(9, "end-to-end pipeline", [&] { return end_to_end(s, runs); });
  guarded(10, "determinism", [&] { return determinism(runs); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
