// Command-line front end: one subcommand per pipeline stage plus the full chain.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "isoret/detail.hpp"
#include "isoret/errors.hpp"
#include "isoret/metrics.hpp"
#include "isoret/pipeline.hpp"
#include "isoret/synth.hpp"

namespace {

using namespace isoret;

enum ExitCode : int { kOk = 0, kUnexpected = 1, kBadInput = 2, kNumeric = 3, kIo = 4 };

struct RefineFlags {
  RefineConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--lambda-length", cfg.lambda_length, "Weight of the edge-length loss")->capture_default_str();
    cmd->add_option("--lambda-corres", cfg.lambda_corres, "Weight of the correspondence loss")->capture_default_str();
    cmd->add_option("--lambda-bend", cfg.lambda_bend, "Weight of the bend loss")->capture_default_str();
    cmd->add_option("--iters", cfg.max_iterations, "Maximum optimizer iterations")->capture_default_str();
    cmd->add_option("--step", cfg.step, "Initial step size")->capture_default_str();
    cmd->add_option("--tol", cfg.tolerance, "Relative decrease over 10 steps that counts as converged")
        ->capture_default_str();
    cmd->add_option("--smoothing", cfg.smoothing, "Laplacian smoothing of the descent direction (0 = plain gradient)")
        ->capture_default_str();
  }
};

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void print_warnings(const std::vector<std::string>& warnings, std::string_view stage) {
  for (const auto& w : warnings) std::cerr << stage << ": warning: " << w << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Garment retargeting through Isomap features of a body template"};
  app.require_subcommand(1);

  // embed
  std::string embed_template_path, embed_out, embed_cache;
  int embed_dim = kDefaultEmbeddingDim;
  auto* embed = app.add_subcommand("embed", "Isomap features of a template mesh");
  embed->add_option("template", embed_template_path, "Template mesh (OBJ)")->required();
  embed->add_option("--dim", embed_dim, "Embedding dimension")->capture_default_str();
  embed->add_option("--out", embed_out, "Output embedding file")->required();
  embed->add_option("--cache", embed_cache, "Directory for the geodesic distance cache");

  // coarse
  std::string c_garment, c_garment_reg, c_target, c_target_reg, c_embedding, c_out;
  int c_k = kDefaultNeighbors;
  auto* coarse = app.add_subcommand("coarse", "Coarse retarget through feature-space nearest neighbors");
  coarse->add_option("garment", c_garment, "Garment mesh")->required();
  coarse->add_option("garment_registered", c_garment_reg, "Template instance registered to the garment")->required();
  coarse->add_option("target", c_target, "Target body mesh")->required();
  coarse->add_option("target_registered", c_target_reg, "Template instance registered to the target")->required();
  coarse->add_option("embedding", c_embedding, "Template embedding file")->required();
  coarse->add_option("--k", c_k, "Neighbor count")->capture_default_str();
  coarse->add_option("--out", c_out, "Output directory (coarse.obj, coarse.corr)")->required();

  // refine
  std::string r_garment, r_garment_reg, r_coarse, r_target, r_target_reg, r_embedding, r_regions, r_out;
  RefineFlags r_flags;
  auto* refine_cmd = app.add_subcommand("refine", "Loss-driven refinement of a coarse retarget");
  refine_cmd->add_option("garment", r_garment, "Source garment mesh")->required();
  refine_cmd->add_option("garment_registered", r_garment_reg, "Template instance registered to the garment")->required();
  refine_cmd->add_option("coarse", r_coarse, "Coarse retarget mesh")->required();
  refine_cmd->add_option("target", r_target, "Target body mesh")->required();
  refine_cmd->add_option("target_registered", r_target_reg, "Template instance registered to the target")->required();
  refine_cmd->add_option("embedding", r_embedding, "Template embedding file")->required();
  refine_cmd->add_option("--k", r_flags.cfg.k, "Neighbor count")->capture_default_str();
  refine_cmd->add_option("--regions", r_regions, "Joint region file over template vertices");
  refine_cmd->add_option("--out", r_out, "Output mesh")->required();
  r_flags.attach(refine_cmd);

  // detail
  std::string d_source, d_refined, d_anchors = "auto:5", d_out;
  auto* detail = app.add_subcommand("detail", "Transfer the source garment's Laplacian detail onto a refined mesh");
  detail->add_option("source", d_source, "Source garment mesh")->required();
  detail->add_option("refined", d_refined, "Refined mesh with the same faces")->required();
  detail->add_option("--anchors", d_anchors, "Anchor list file or auto:PCT")->capture_default_str();
  detail->add_option("--out", d_out, "Output mesh")->required();

  // eval
  std::string e_pred, e_gt, e_body;
  bool e_table = false;
  auto* eval = app.add_subcommand("eval", "Evaluation metrics for a retargeted garment");
  eval->add_option("prediction", e_pred, "Retargeted garment mesh")->required();
  eval->add_option("--gt", e_gt, "Ground-truth garment (ED, NC, CD)");
  eval->add_option("--body", e_body, "Target body (IR, P2S)");
  eval->add_flag("--table", e_table, "Also print a human-readable table");

  // richness
  std::string ri_template, ri_cache;
  std::vector<int> ri_dims;
  std::vector<std::string> ri_embeddings;
  int ri_k = 32;
  auto* richness = app.add_subcommand("richness", "Rank agreement of feature and geodesic neighborhoods");
  richness->add_option("template", ri_template, "Template mesh")->required();
  richness->add_option("--dim", ri_dims, "Embedding dimension(s) to build and score");
  richness->add_option("--embedding", ri_embeddings, "Existing embedding file(s) to score");
  richness->add_option("--k", ri_k, "Neighborhood size")->capture_default_str();
  richness->add_option("--cache", ri_cache, "Directory for the geodesic distance cache");

  // pipeline
  PipelineConfig p;
  std::string p_regions, p_gt, p_cache, p_out;
  auto* pipeline = app.add_subcommand("pipeline", "embed -> coarse -> refine -> detail -> eval");
  pipeline->add_option("--template", p.template_mesh, "Canonical template mesh")->required();
  pipeline->add_option("--garment", p.garment, "Garment mesh")->required();
  pipeline->add_option("--garment-reg", p.garment_registered, "Template instance registered to the garment")
      ->required();
  pipeline->add_option("--target", p.target, "Target body mesh")->required();
  pipeline->add_option("--target-reg", p.target_registered, "Template instance registered to the target")->required();
  pipeline->add_option("--regions", p_regions, "Joint region file");
  pipeline->add_option("--gt", p_gt, "Ground-truth garment on the target, for evaluation");
  pipeline->add_option("--anchors", p.anchors, "Anchor list file or auto:PCT")->capture_default_str();
  pipeline->add_option("--dim", p.dim, "Embedding dimension")->capture_default_str();
  pipeline->add_option("--k", p.k, "Neighbor count")->capture_default_str();
  pipeline->add_option("--out", p_out, "Output directory")->required();
  pipeline->add_option("--cache", p_cache, "Directory for the geodesic distance cache");
  RefineFlags p_flags;
  p_flags.attach(pipeline);

  // synth
  std::string s_out;
  double s_cell = synth::FixtureOptions{}.cell;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic humanoid and shirt fixtures");
  synth_cmd->add_option("--out", s_out, "Output directory")->required();
  synth_cmd->add_option("--cell", s_cell, "Grid spacing of the body mesh in meters")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  if (*embed) {
    const TriMesh tmpl = load_mesh(embed_template_path);
    const VertexEmbedding emb = embed_template(tmpl, embed_dim, optional_path(embed_cache));
    print_warnings(emb.warnings, "embed");
    save_embedding(emb, embed_out);
  } else if (*coarse) {
    const TriMesh garment = load_mesh(c_garment);
    const TriMesh garment_reg = load_mesh(c_garment_reg);
    const TriMesh target = load_mesh(c_target);
    const TriMesh target_reg = load_mesh(c_target_reg);
    const VertexEmbedding emb = load_embedding(c_embedding);
    const RegisteredPair gp(garment, garment_reg, emb);
    const RegisteredPair tp(target, target_reg, emb);
    const CoarseStage stage = run_coarse(gp, tp, c_k);
    print_warnings(stage.coarse.warnings, "coarse");
    fs::create_directories(c_out);
    save_mesh(stage.coarse.mesh, fs::path(c_out) / "coarse.obj");
    save_correspondence(stage.correspondence, fs::path(c_out) / "coarse.corr");
  } else if (*refine_cmd) {
    const TriMesh garment = load_mesh(r_garment);
    const TriMesh garment_reg = load_mesh(r_garment_reg);
    const TriMesh coarse_mesh = load_mesh(r_coarse);
    const TriMesh target = load_mesh(r_target);
    const TriMesh target_reg = load_mesh(r_target_reg);
    const VertexEmbedding emb = load_embedding(r_embedding);
    const JointMask mask = r_regions.empty() ? JointMask{} : load_joint_mask(r_regions, emb.n());
    const RegisteredPair tp(target, target_reg, emb);
    const VertexEmbedding target_features = extrapolate_embedding(tp, r_flags.cfg.k);
    const RefineInputs in{garment, garment_reg, coarse_mesh, tp, target_features, mask};
    const RefineResult res = refine(in, r_flags.cfg);
    print_warnings(res.warnings, "refine");
    std::cerr << "refine: " << res.iterations << " iterations (" << res.stop_reason << "), loss " << res.initial.total
              << " -> " << res.final.total << '\n';
    save_mesh(res.mesh, r_out);
  } else if (*detail) {
    const TriMesh source = load_mesh(d_source);
    const TriMesh refined = load_mesh(d_refined);
    const std::vector<Index> anchors = resolve_anchors(d_anchors, source);
    const DetailResult res = detail_integrate(source, refined, anchors);
    save_mesh(res.mesh, d_out);
  } else if (*eval) {
    const TriMesh pred = load_mesh(e_pred);
    std::optional<TriMesh> gt, body;
    if (!e_gt.empty()) gt = load_mesh(e_gt);
    if (!e_body.empty()) body = load_mesh(e_body);
    const MetricsReport report = evaluate_metrics(pred, gt ? &*gt : nullptr, body ? &*body : nullptr);
    std::cout << report.record() << '\n';
    if (e_table) std::cout << report.table();
  } else if (*richness) {
    if (ri_dims.empty() && ri_embeddings.empty()) throw ArgumentError("richness needs --dim or --embedding");
    const TriMesh tmpl = load_mesh(ri_template);
    const GeodesicMatrix geo = cached_geodesics(tmpl, optional_path(ri_cache));
    for (int d : ri_dims) {
      if (d <= 0) throw ArgumentError("--dim must be positive, got " + std::to_string(d));
      const VertexEmbedding emb = isomap(geo, d, topology_hash(tmpl));
      std::cout << "dim=" << d << " k=" << ri_k << " richness=" << richness_score(geo, emb, ri_k).score << '\n';
    }
    for (const auto& file : ri_embeddings) {
      const VertexEmbedding emb = load_embedding(file);
      require_template_match(emb, tmpl, "embedding '" + file + "'");
      std::cout << "embedding=" << file << " dim=" << emb.d() << " k=" << ri_k
                << " richness=" << richness_score(geo, emb, ri_k).score << '\n';
    }
  } else if (*pipeline) {
    p.regions = optional_path(p_regions);
    p.ground_truth = optional_path(p_gt);
    p.cache_dir = optional_path(p_cache);
    p.out_dir = p_out;
    p.refine = p_flags.cfg;
    const PipelineResult res = run_pipeline(p, &std::cerr);
    std::cout << res.metrics.record() << '\n';
  } else if (*synth_cmd) {
    synth::FixtureOptions opts;
    opts.cell = s_cell;
    const synth::Fixture fx = synth::make_fixture(opts);
    const fs::path dir = s_out;
    fs::create_directories(dir);
    save_mesh(fx.template_mesh, dir / "template.obj");
    save_mesh(fx.body_a, dir / "body_a.obj");
    save_mesh(fx.body_b, dir / "body_b.obj");
    save_mesh(fx.shirt, dir / "shirt.obj");
    save_mesh(fx.shirt_on_b, dir / "shirt_on_b.obj");
    save_joint_mask(fx.regions, dir / "regions.txt");
    std::cerr << "synth: template " << fx.template_mesh.num_vertices() << " vertices, shirt "
              << fx.shirt.num_vertices() << " vertices\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnexpected;
  }
}
