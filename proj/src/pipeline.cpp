#include "isoret/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <ostream>

#include "json.hpp"

#include "isoret/binary_io.hpp"
#include "isoret/detail.hpp"
#include "isoret/errors.hpp"
#include "isoret/geodesics.hpp"

namespace isoret {

namespace {

using Json = nlohmann::ordered_json;

Json loss_json(const LossBreakdown& l) {
  return {{"length", l.length}, {"corres", l.corres}, {"bend", l.bend}, {"total", l.total}};
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return to_hex(sha256(bytes));
}

GeodesicMatrix cached_geodesics(const TriMesh& tmpl, const std::optional<fs::path>& cache_dir) {
  if (!cache_dir) return geodesic_matrix(tmpl).quantized();
  const fs::path file = *cache_dir / ("geodesics-" + to_hex(content_hash(tmpl)).substr(0, 16) + ".geod");
  if (fs::exists(file)) {
    GeodesicMatrix geo = load_geodesic_cache(file);
    if (geo.size() != tmpl.num_vertices()) {
      throw ValidationError("geodesic cache '" + file.string() + "' has " + std::to_string(geo.size()) +
                            " vertices, template has " + std::to_string(tmpl.num_vertices()));
    }
    return geo;
  }
  GeodesicMatrix geo = geodesic_matrix(tmpl).quantized();
  std::error_code ec;
  fs::create_directories(*cache_dir, ec);
  if (ec) throw IoError("cannot create cache directory '" + cache_dir->string() + "': " + ec.message());
  save_geodesic_cache(geo, file);
  return geo;
}

VertexEmbedding embed_template(const TriMesh& tmpl, int dim, const std::optional<fs::path>& cache_dir) {
  if (dim <= 0) throw ArgumentError("embedding dimension must be positive, got " + std::to_string(dim));
  return isomap(cached_geodesics(tmpl, cache_dir), dim, topology_hash(tmpl));
}

std::vector<Index> resolve_anchors(const std::string& spec, const TriMesh& garment) {
  constexpr std::string_view prefix = "auto:";
  if (spec.starts_with(prefix)) {
    const std::string pct = spec.substr(prefix.size());
    double value = 0.0;
    std::size_t used = 0;
    try {
      value = std::stod(pct, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != pct.size() || !(value >= 0.0 && value <= 100.0)) {
      throw ArgumentError("anchor policy '" + spec + "': expected auto:PCT with PCT in [0, 100]");
    }
    return default_anchors(garment, value / 100.0);
  }
  return load_anchor_list(spec, garment.num_vertices());
}

CoarseStage run_coarse(const RegisteredPair& garment, const RegisteredPair& target, int k) {
  CoarseStage s;
  s.garment_features = with_context("garment features", [&] { return extrapolate_embedding(garment, k); });
  s.target_features = with_context("target features", [&] { return extrapolate_embedding(target, k); });
  s.correspondence = correspond(s.garment_features, s.target_features, target.surface().vertices, k);
  s.coarse = coarse_retarget(garment.surface(), s.correspondence);
  return s;
}

void PipelineConfig::check() const {
  if (dim <= 0) throw ArgumentError("--dim must be positive");
  if (k <= 0) throw ArgumentError("--k must be positive");
  refine.check();
  if (out_dir.empty()) throw ArgumentError("an output directory is required");
}

PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log) {
  cfg.check();
  auto note = [&](const std::string& msg) {
    if (log) *log << msg << '\n';
  };
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir.string() + "': " + ec.message());

  const TriMesh tmpl = with_context("template", [&] { return load_mesh(cfg.template_mesh); });
  const TriMesh garment = with_context("garment", [&] { return load_mesh(cfg.garment); });
  const TriMesh garment_reg = with_context("garment registration", [&] { return load_mesh(cfg.garment_registered); });
  const TriMesh target = with_context("target", [&] { return load_mesh(cfg.target); });
  const TriMesh target_reg = with_context("target registration", [&] { return load_mesh(cfg.target_registered); });
  const JointMask mask = cfg.regions ? with_context("regions", [&] {
    return load_joint_mask(*cfg.regions, tmpl.num_vertices());
  })
                                     : JointMask{};

  // Stage 1: template features, stored and re-read so that the in-memory
  // values match what the stage-wise commands see.
  const fs::path emb_path = cfg.out_dir / "template.isoemb";
  const std::vector<std::string> embed_warnings = with_context("embed", [&] {
    const VertexEmbedding fresh = embed_template(tmpl, cfg.dim, cfg.cache_dir);
    save_embedding(fresh, emb_path);
    return fresh.warnings;
  });
  const VertexEmbedding emb = load_embedding(emb_path);
  note("embed: n=" + std::to_string(emb.n()) + " d=" + std::to_string(emb.d()));

  // Stage 2: coarse retarget.
  const RegisteredPair garment_pair = with_context("coarse", [&] { return RegisteredPair(garment, garment_reg, emb); });
  const RegisteredPair target_pair = with_context("coarse", [&] { return RegisteredPair(target, target_reg, emb); });
  CoarseStage coarse = with_context("coarse", [&] { return run_coarse(garment_pair, target_pair, cfg.k); });
  const fs::path coarse_path = cfg.out_dir / "coarse.obj";
  const fs::path corr_path = cfg.out_dir / "coarse.corr";
  save_mesh(coarse.coarse.mesh, coarse_path);
  save_correspondence(coarse.correspondence, corr_path);
  for (const auto& w : coarse.coarse.warnings) note("coarse: warning: " + w);

  // Stage 3: refinement.
  const RefineInputs inputs{garment, garment_reg, coarse.coarse.mesh, target_pair, coarse.target_features, mask};
  RefineConfig rcfg = cfg.refine;
  rcfg.k = cfg.k;
  RefineResult refined = with_context("refine", [&] { return refine(inputs, rcfg); });
  const fs::path refined_path = cfg.out_dir / "refined.obj";
  save_mesh(refined.mesh, refined_path);
  note("refine: " + std::to_string(refined.iterations) + " iterations, " + refined.stop_reason + ", loss " +
       std::to_string(refined.initial.total) + " -> " + std::to_string(refined.final.total));
  for (const auto& w : refined.warnings) note("refine: warning: " + w);

  // Stage 4: detail integration.
  const std::vector<Index> anchors = with_context("detail", [&] { return resolve_anchors(cfg.anchors, garment); });
  const DetailResult detail = with_context("detail", [&] { return detail_integrate(garment, refined.mesh, anchors); });
  const fs::path final_path = cfg.out_dir / "final.obj";
  save_mesh(detail.mesh, final_path);

  // Stage 5: evaluation against the target body (and ground truth if given).
  std::optional<TriMesh> gt;
  if (cfg.ground_truth) gt = with_context("ground truth", [&] { return load_mesh(*cfg.ground_truth); });
  PipelineResult result;
  result.metrics = with_context("eval", [&] { return evaluate_metrics(detail.mesh, gt ? &*gt : nullptr, &target); });
  const fs::path metrics_path = cfg.out_dir / "metrics.txt";
  {
    std::ofstream out(metrics_path, std::ios::trunc);
    out << result.metrics.record() << '\n';
    if (!out) throw IoError("cannot write '" + metrics_path.string() + "'");
  }
  note("eval: " + result.metrics.record());

  Json manifest;
  manifest["tool"] = "isoret";
  manifest["created"] = utc_timestamp();
  manifest["parameters"] = {{"dim", cfg.dim},
                            {"k", cfg.k},
                            {"lambda_length", rcfg.lambda_length},
                            {"lambda_corres", rcfg.lambda_corres},
                            {"lambda_bend", rcfg.lambda_bend},
                            {"iters", rcfg.max_iterations},
                            {"step", rcfg.step},
                            {"tolerance", rcfg.tolerance},
                            {"smoothing", rcfg.smoothing},
                            {"anchors", cfg.anchors},
                            {"anchor_count", anchors.size()}};
  Json in = Json::object();
  auto add_input = [&](const std::string& key, const fs::path& p) {
    in[key] = {{"path", p.string()}, {"sha256", file_digest(p)}};
  };
  add_input("template", cfg.template_mesh);
  add_input("garment", cfg.garment);
  add_input("garment_registered", cfg.garment_registered);
  add_input("target", cfg.target);
  add_input("target_registered", cfg.target_registered);
  if (cfg.regions) add_input("regions", *cfg.regions);
  if (cfg.ground_truth) add_input("ground_truth", *cfg.ground_truth);
  if (!cfg.anchors.starts_with("auto:")) add_input("anchors", cfg.anchors);
  manifest["inputs"] = in;
  Json outputs = Json::object();
  for (const fs::path& p : {emb_path, coarse_path, corr_path, refined_path, final_path, metrics_path}) {
    outputs[p.filename().string()] = file_digest(p);
  }
  manifest["outputs"] = outputs;
  manifest["refine"] = {{"iterations", refined.iterations},
                        {"stop_reason", refined.stop_reason},
                        {"initial", loss_json(refined.initial)},
                        {"final", loss_json(refined.final)}};
  manifest["metrics"] = {{"ed", optional_json(result.metrics.ed)},     {"nc", optional_json(result.metrics.nc)},
                         {"ir", optional_json(result.metrics.ir)},     {"cd", optional_json(result.metrics.cd)},
                         {"cd_mean", optional_json(result.metrics.cd_mean)}, {"p2s", optional_json(result.metrics.p2s)}};
  Json warnings = Json::array();
  for (const auto& w : embed_warnings) warnings.push_back("embed: " + w);
  for (const auto& w : coarse.coarse.warnings) warnings.push_back("coarse: " + w);
  for (const auto& w : refined.warnings) warnings.push_back("refine: " + w);
  manifest["warnings"] = warnings;

  result.manifest = cfg.out_dir / "manifest.json";
  {
    std::ofstream out(result.manifest, std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("cannot write '" + result.manifest.string() + "'");
  }
  result.final_mesh = final_path;
  result.refine = std::move(refined);
  return result;
}

}  // namespace isoret
