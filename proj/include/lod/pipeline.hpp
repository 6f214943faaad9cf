#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lod/phm.hpp"
#include "lod/rank_vector.hpp"
#include "lod/ranking.hpp"
#include "lod/selection.hpp"
#include "lod/synth.hpp"

namespace lod {

enum class GroupMode { Auto, On, Off };

/// Every knob of a run. Defaults reproduce the reference settings: 100 image neighbors,
/// beta = gamma = 1e-4, alpha = 10%, T = 50 power iterations, IoU <= 0.3 selection.
struct PipelineConfig {
  std::filesystem::path dataset = "data/manifest.json";
  std::filesystem::path work_dir = "work";

  std::size_t neighbors_k = 100;
  HoughConfig hough;
  RankingConfig ranking;
  std::size_t chunks = 8;
  Solver solver = Solver::Lod;

  std::size_t max_regions = 5;
  double iou_threshold = 0.3;
  GroupMode groups = GroupMode::Auto;

  double sigma = 0.5;
  std::vector<std::size_t> detrate_m = {1, 5};

  std::size_t clusters = 0;          // 0: one per class in the vocabulary
  std::uint64_t cluster_seed = 0;
  std::size_t cluster_iterations = 100;
  std::size_t retrieve_k = 10;

  std::size_t workers = 1;
  SynthConfig synth;

  /// Rejects unknown keys and out-of-range values with Error(InvalidArgument).
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_json() const;
  void validate() const;
};

struct StageResult {
  std::string stage;
  bool skipped = false;
  std::vector<std::filesystem::path> outputs;
};

/// Staged runner over a work directory. Each stage records a stamp (input digest and stage
/// version) and is skipped when its inputs and settings are unchanged.
class Pipeline {
 public:
  using Logger = std::function<void(const std::string&)>;

  explicit Pipeline(PipelineConfig cfg, Logger log = {});

  StageResult synth();
  StageResult neighbors();
  StageResult similarities();
  StageResult rank();
  StageResult select();
  StageResult evaluate();
  StageResult cluster();
  /// neighbors -> similarities -> rank -> select -> evaluate (-> cluster when labels exist).
  std::vector<StageResult> run_all();

  const PipelineConfig& config() const noexcept { return cfg_; }
  std::filesystem::path path(const std::string& name) const { return cfg_.work_dir / name; }
  std::filesystem::path rank_path() const;
  std::filesystem::path detections_path() const;
  std::filesystem::path metrics_path() const;

 private:
  std::string stage_digest(const std::string& stage, const std::string& settings,
                           const std::vector<std::filesystem::path>& inputs) const;
  bool up_to_date(const std::string& stage, const std::string& digest,
                  const std::vector<std::filesystem::path>& outputs) const;
  void stamp(const std::string& stage, const std::string& digest,
             const std::vector<std::filesystem::path>& outputs) const;
  void require_producer(const std::string& stage) const;
  void write_run_manifest() const;
  std::string provenance() const;
  void log(const std::string& msg) const;

  PipelineConfig cfg_;
  Logger log_;
};

/// Version of each stage's output contract; bumping one invalidates downstream stamps.
int stage_version(const std::string& stage);

}  // namespace lod
