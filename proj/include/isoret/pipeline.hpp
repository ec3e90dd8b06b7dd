#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "isoret/correspondence.hpp"
#include "isoret/isomap.hpp"
#include "isoret/metrics.hpp"
#include "isoret/refine.hpp"

namespace isoret {

namespace fs = std::filesystem;

/// Geodesics for `tmpl`, read from `cache_dir` when a matching cache exists
/// and written there otherwise. Values are rounded to float32 either way so a
/// cached and an uncached run agree bit for bit.
GeodesicMatrix cached_geodesics(const TriMesh& tmpl, const std::optional<fs::path>& cache_dir);

/// Isomap features of the canonical template.
VertexEmbedding embed_template(const TriMesh& tmpl, int dim, const std::optional<fs::path>& cache_dir);

/// Either a list file or "auto:PCT" (percentage of vertices sampled on top of
/// the boundary loops).
std::vector<Index> resolve_anchors(const std::string& spec, const TriMesh& garment);

struct CoarseStage {
  VertexEmbedding garment_features;
  VertexEmbedding target_features;
  CorrespondenceMap correspondence;
  CoarseResult coarse;
};

/// Extrapolates features to garment and target and builds the coarse retarget.
CoarseStage run_coarse(const RegisteredPair& garment, const RegisteredPair& target, int k);

struct PipelineConfig {
  fs::path template_mesh;
  fs::path garment;
  fs::path garment_registered;
  fs::path target;
  fs::path target_registered;
  std::optional<fs::path> regions;
  std::optional<fs::path> ground_truth;
  std::string anchors = "auto:5";
  int dim = kDefaultEmbeddingDim;
  int k = kDefaultNeighbors;
  RefineConfig refine;
  fs::path out_dir;
  std::optional<fs::path> cache_dir;

  void check() const;
};

struct PipelineResult {
  MetricsReport metrics;
  RefineResult refine;
  fs::path final_mesh;
  fs::path manifest;
};

/// embed -> coarse -> refine -> detail -> eval, writing every intermediate and
/// a JSON manifest with parameters and SHA-256 digests of inputs and outputs.
/// The wall-clock timestamp is confined to the manifest's "created" field.
PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr);

/// SHA-256 of a file's bytes, hex encoded.
std::string file_digest(const fs::path& path);

}  // namespace isoret
