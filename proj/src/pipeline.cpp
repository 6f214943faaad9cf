#include "lod/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "json.hpp"
#include "lod/category.hpp"
#include "lod/digest.hpp"
#include "lod/error.hpp"
#include "lod/eval.hpp"
#include "lod/graph.hpp"
#include "lod/neighbors.hpp"
#include "lod/parallel.hpp"
#include "lod/storage.hpp"

namespace lod {

using nlohmann::json;

int stage_version(const std::string& stage) {
  if (stage == "synth") return 1;
  if (stage == "neighbors") return 1;
  if (stage == "similarities") return 1;
  if (stage == "rank") return 1;
  if (stage == "select") return 1;
  if (stage == "evaluate") return 1;
  if (stage == "cluster") return 1;
  fail(ErrorKind::InvalidArgument, "unknown stage '" + stage + "'");
}

// ---- configuration -------------------------------------------------------

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::InvalidArgument, "config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      fail(ErrorKind::InvalidArgument, "config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj[key].get<T>();
}

json groups_to_json(GroupMode g) {
  switch (g) {
    case GroupMode::On: return true;
    case GroupMode::Off: return false;
    case GroupMode::Auto: break;
  }
  return "auto";
}

GroupMode groups_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>() ? GroupMode::On : GroupMode::Off;
  if (j.is_string() && j.get<std::string>() == "auto") return GroupMode::Auto;
  fail(ErrorKind::InvalidArgument, "config: selection.use_groups must be true, false or \"auto\"");
}

json synth_to_json(const SynthConfig& s) {
  return {{"seed", s.seed},
          {"n_images", s.n_images},
          {"proposals_per_image", s.proposals_per_image},
          {"feature_dim", s.feature_dim},
          {"n_classes", s.n_classes},
          {"class_skew", s.class_skew},
          {"signal_strength", s.signal_strength},
          {"noise_sigma", s.noise_sigma},
          {"planted_per_image", s.planted_per_image},
          {"geometry_jitter", s.geometry_jitter},
          {"objectness_share", s.objectness_share},
          {"parts_per_object", s.parts_per_object},
          {"part_strength", s.part_strength},
          {"containers_per_object", s.containers_per_object},
          {"container_object_share", s.container_object_share},
          {"context_strength", s.context_strength},
          {"context_fraction", s.context_fraction},
          {"context_spread", s.context_spread}};
}

void synth_from_json(const json& j, SynthConfig& s) {
  std::set<std::string> keys;
  const json known = synth_to_json(s);
  for (const auto& [k, v] : known.items()) keys.insert(k);
  reject_unknown(j, keys, "synth");
  read_opt(j, "seed", s.seed);
  read_opt(j, "n_images", s.n_images);
  read_opt(j, "proposals_per_image", s.proposals_per_image);
  read_opt(j, "feature_dim", s.feature_dim);
  read_opt(j, "n_classes", s.n_classes);
  read_opt(j, "class_skew", s.class_skew);
  read_opt(j, "signal_strength", s.signal_strength);
  read_opt(j, "noise_sigma", s.noise_sigma);
  read_opt(j, "planted_per_image", s.planted_per_image);
  read_opt(j, "geometry_jitter", s.geometry_jitter);
  read_opt(j, "objectness_share", s.objectness_share);
  read_opt(j, "parts_per_object", s.parts_per_object);
  read_opt(j, "part_strength", s.part_strength);
  read_opt(j, "containers_per_object", s.containers_per_object);
  read_opt(j, "container_object_share", s.container_object_share);
  read_opt(j, "context_strength", s.context_strength);
  read_opt(j, "context_fraction", s.context_fraction);
  read_opt(j, "context_spread", s.context_spread);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::InvalidArgument, std::string("config: ") + e.what());
  }
  PipelineConfig c;
  try {
    reject_unknown(j, {"paths", "neighbors", "hough", "ranking", "solver", "selection", "eval", "category", "workers", "synth"}, "");
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      reject_unknown(p, {"dataset", "work_dir"}, "paths");
      if (p.contains("dataset")) c.dataset = p["dataset"].get<std::string>();
      if (p.contains("work_dir")) c.work_dir = p["work_dir"].get<std::string>();
    }
    if (j.contains("neighbors")) {
      reject_unknown(j["neighbors"], {"k"}, "neighbors");
      read_opt(j["neighbors"], "k", c.neighbors_k);
    }
    if (j.contains("hough")) {
      const auto& h = j["hough"];
      reject_unknown(h, {"translation_bins", "scale_bins", "scale_range", "score_threshold"}, "hough");
      read_opt(h, "translation_bins", c.hough.translation_bins);
      read_opt(h, "scale_bins", c.hough.scale_bins);
      read_opt(h, "scale_range", c.hough.scale_range);
      read_opt(h, "score_threshold", c.hough.score_threshold);
    }
    if (j.contains("ranking")) {
      const auto& r = j["ranking"];
      reject_unknown(r, {"beta", "gamma", "alpha", "iterations", "tolerance", "chunks"}, "ranking");
      read_opt(r, "beta", c.ranking.beta);
      read_opt(r, "gamma", c.ranking.gamma);
      read_opt(r, "alpha", c.ranking.alpha);
      read_opt(r, "iterations", c.ranking.iterations);
      if (r.contains("tolerance") && !r["tolerance"].is_null()) c.ranking.tolerance = r["tolerance"].get<double>();
      read_opt(r, "chunks", c.chunks);
    }
    if (j.contains("solver")) c.solver = parse_solver(j["solver"].get<std::string>());
    if (j.contains("selection")) {
      const auto& s = j["selection"];
      reject_unknown(s, {"max_regions", "iou_threshold", "use_groups"}, "selection");
      read_opt(s, "max_regions", c.max_regions);
      read_opt(s, "iou_threshold", c.iou_threshold);
      if (s.contains("use_groups")) c.groups = groups_from_json(s["use_groups"]);
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      reject_unknown(e, {"sigma", "detrate_m"}, "eval");
      read_opt(e, "sigma", c.sigma);
      read_opt(e, "detrate_m", c.detrate_m);
    }
    if (j.contains("category")) {
      const auto& k = j["category"];
      reject_unknown(k, {"clusters", "seed", "iterations", "retrieve_k"}, "category");
      read_opt(k, "clusters", c.clusters);
      read_opt(k, "seed", c.cluster_seed);
      read_opt(k, "iterations", c.cluster_iterations);
      read_opt(k, "retrieve_k", c.retrieve_k);
    }
    read_opt(j, "workers", c.workers);
    if (j.contains("synth")) synth_from_json(j["synth"], c.synth);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingInput, "config not found: " + path.string());
  return from_json(io::read_text(path));
}

std::string PipelineConfig::to_json() const {
  json j = {{"paths", {{"dataset", dataset.string()}, {"work_dir", work_dir.string()}}},
            {"neighbors", {{"k", neighbors_k}}},
            {"hough",
             {{"translation_bins", hough.translation_bins},
              {"scale_bins", hough.scale_bins},
              {"scale_range", hough.scale_range},
              {"score_threshold", hough.score_threshold}}},
            {"ranking",
             {{"beta", ranking.beta},
              {"gamma", ranking.gamma},
              {"alpha", ranking.alpha},
              {"iterations", ranking.iterations},
              {"tolerance", ranking.tolerance ? json(*ranking.tolerance) : json(nullptr)},
              {"chunks", chunks}}},
            {"solver", lod::to_string(solver)},
            {"selection", {{"max_regions", max_regions}, {"iou_threshold", iou_threshold}, {"use_groups", groups_to_json(groups)}}},
            {"eval", {{"sigma", sigma}, {"detrate_m", detrate_m}}},
            {"category", {{"clusters", clusters}, {"seed", cluster_seed}, {"iterations", cluster_iterations}, {"retrieve_k", retrieve_k}}},
            {"workers", workers},
            {"synth", synth_to_json(synth)}};
  return j.dump(1) + "\n";
}

void PipelineConfig::validate() const {
  hough.validate();
  ranking.validate();
  if (neighbors_k < 1) fail(ErrorKind::InvalidArgument, "config: neighbors.k must be >= 1");
  if (chunks < 1) fail(ErrorKind::InvalidArgument, "config: ranking.chunks must be >= 1");
  if (max_regions < 1) fail(ErrorKind::InvalidArgument, "config: selection.max_regions must be >= 1");
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) fail(ErrorKind::InvalidArgument, "config: selection.iou_threshold must lie in [0, 1]");
  if (!(sigma > 0.0 && sigma <= 1.0)) fail(ErrorKind::InvalidArgument, "config: eval.sigma must lie in (0, 1]");
  for (auto m : detrate_m)
    if (m < 1) fail(ErrorKind::InvalidArgument, "config: eval.detrate_m entries must be >= 1");
  if (retrieve_k < 1) fail(ErrorKind::InvalidArgument, "config: category.retrieve_k must be >= 1");
  if (workers < 1) fail(ErrorKind::InvalidArgument, "config: workers must be >= 1");
}

// ---- stage bookkeeping ---------------------------------------------------

namespace {

std::string config_digest(const PipelineConfig& cfg) {
  // Worker count, chunk count and the output directory never change outputs, so they stay
  // out of provenance.
  auto j = json::parse(cfg.to_json());
  j.erase("workers");
  j["paths"].erase("work_dir");
  j["ranking"].erase("chunks");
  return Digest().update(j.dump()).hex();
}

std::vector<std::filesystem::path> dataset_files(const storage::Dataset& ds, const std::filesystem::path& manifest) {
  std::vector<std::filesystem::path> files{manifest};
  for (const auto& e : ds.manifest().entries) files.push_back(ds.root() / e.feature_path);
  return files;
}

std::string stamp_key(const std::string& stage, Solver solver) {
  if (stage == "rank" || stage == "select" || stage == "evaluate" || stage == "cluster") {
    return stage + "_" + lod::to_string(solver);
  }
  return stage;
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, Logger log) : cfg_(std::move(cfg)), log_(std::move(log)) {
  if (const char* env = std::getenv("LOD_WORK_DIR"); env && *env) cfg_.work_dir = env;
  cfg_.validate();
}

void Pipeline::log(const std::string& msg) const {
  if (log_) log_(msg);
}

std::filesystem::path Pipeline::rank_path() const { return path(std::string("rank_") + lod::to_string(cfg_.solver) + ".lodr"); }
std::filesystem::path Pipeline::detections_path() const {
  return path(std::string("detections_") + lod::to_string(cfg_.solver) + ".json");
}
std::filesystem::path Pipeline::metrics_path() const { return path(std::string("metrics_") + lod::to_string(cfg_.solver) + ".json"); }

std::string Pipeline::stage_digest(const std::string& stage, const std::string& settings,
                                   const std::vector<std::filesystem::path>& inputs) const {
  Digest d;
  d.update(stage).update(std::to_string(stage_version(stage))).update(settings);
  for (const auto& in : inputs) {
    if (!std::filesystem::exists(in)) fail(ErrorKind::MissingInput, stage + ": missing input " + in.string());
    d.update(in.filename().string()).update_file(in);
  }
  return d.hex();
}

bool Pipeline::up_to_date(const std::string& stage, const std::string& digest,
                          const std::vector<std::filesystem::path>& outputs) const {
  const auto stamp_path = path("stamps/" + stamp_key(stage, cfg_.solver) + ".json");
  if (!std::filesystem::exists(stamp_path)) return false;
  for (const auto& o : outputs)
    if (!std::filesystem::exists(o)) return false;
  try {
    const auto j = json::parse(io::read_text(stamp_path));
    return j.at("digest").get<std::string>() == digest && j.at("version").get<int>() == stage_version(stage);
  } catch (const json::exception&) {
    return false;
  }
}

void Pipeline::stamp(const std::string& stage, const std::string& digest,
                     const std::vector<std::filesystem::path>& outputs) const {
  json outs = json::array();
  for (const auto& o : outputs) outs.push_back({{"file", o.filename().string()}, {"digest", file_digest(o)}});
  json j = {{"stage", stage}, {"version", stage_version(stage)}, {"digest", digest}, {"outputs", outs}};
  io::write_text_atomic(path("stamps/" + stamp_key(stage, cfg_.solver) + ".json"), j.dump(1) + "\n");
  write_run_manifest();
}

void Pipeline::require_producer(const std::string& stage) const {
  const auto stamp_path = path("stamps/" + stamp_key(stage, cfg_.solver) + ".json");
  if (!std::filesystem::exists(stamp_path)) return;
  const auto j = json::parse(io::read_text(stamp_path));
  const int got = j.value("version", -1);
  if (got != stage_version(stage)) {
    fail(ErrorKind::StageMismatch, "outputs of stage '" + stage + "' were written by stage version " +
                                       std::to_string(got) + ", this build expects " +
                                       std::to_string(stage_version(stage)) + "; re-run that stage");
  }
}

std::string Pipeline::provenance() const {
  json versions = json::object();
  for (const char* s : {"neighbors", "similarities", "rank", "select", "evaluate", "cluster"}) versions[s] = stage_version(s);
  json j = {{"config_digest", config_digest(cfg_)}, {"stage_versions", versions}, {"solver", lod::to_string(cfg_.solver)}};
  return j.dump();
}

void Pipeline::write_run_manifest() const {
  auto j = json::parse(provenance());
  j["config"] = json::parse(cfg_.to_json());
  j["config"].erase("workers");
  j["config"]["ranking"].erase("chunks");
  io::write_text_atomic(path("run_manifest.json"), j.dump(1) + "\n");
}

// ---- stages --------------------------------------------------------------

StageResult Pipeline::synth() {
  const auto dir = cfg_.dataset.parent_path().empty() ? std::filesystem::path(".") : cfg_.dataset.parent_path();
  const auto manifest = dir / "manifest.json";
  if (cfg_.dataset.filename() != "manifest.json") {
    fail(ErrorKind::InvalidArgument, "synth writes <dir>/manifest.json; set paths.dataset accordingly");
  }
  StageResult res{"synth", false, {manifest, dir / "planted.json"}};
  const std::string settings = synth_to_json(cfg_.synth).dump();
  const auto stamp_path = dir / ".synth_stamp";
  const std::string digest = Digest().update("synth").update(settings).hex();
  if (std::filesystem::exists(stamp_path) && std::filesystem::exists(manifest) &&
      io::read_text(stamp_path) == digest) {
    res.skipped = true;
    log("synth: inputs unchanged, skipped");
    return res;
  }
  StageTimer t;
  write_synthetic(dir, generate_synthetic(cfg_.synth));
  io::write_text_atomic(stamp_path, digest);
  log("synth: wrote " + std::to_string(cfg_.synth.n_images) + " images to " + dir.string() + " (" +
      std::to_string(static_cast<long>(t.ms())) + " ms)");
  return res;
}

StageResult Pipeline::neighbors() {
  const auto ds = storage::Dataset::open(cfg_.dataset);
  const auto out = path("neighbors.json");
  StageResult res{"neighbors", false, {out}};
  const auto digest = stage_digest("neighbors", std::to_string(cfg_.neighbors_k), dataset_files(ds, cfg_.dataset));
  if (up_to_date("neighbors", digest, res.outputs)) {
    res.skipped = true;
    log("neighbors: inputs unchanged, skipped");
    return res;
  }
  StageTimer t;
  const auto report = ds.validate();
  if (!report.ok()) {
    std::ostringstream os;
    os << "dataset failed validation with " << report.violations.size() << " violation(s); first: "
       << report.violations.front().image_id << ": " << report.violations.front().message;
    fail(report.has_format_errors() ? ErrorKind::Format : ErrorKind::Validation, os.str());
  }
  std::vector<std::vector<float>> descriptors;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto rec = ds.load(i);
    descriptors.push_back(std::move(rec.image_feature));
    ids.push_back(rec.image_id);
  }
  const auto list = find_neighbors(descriptors, cfg_.neighbors_k, cfg_.workers);
  io::write_text_atomic(out, storage::neighbors_to_json(list, ids));
  stamp("neighbors", digest, res.outputs);
  log("neighbors: " + std::to_string(ds.size()) + " images, k = " + std::to_string(cfg_.neighbors_k) + " (" +
      std::to_string(static_cast<long>(t.ms())) + " ms)");
  return res;
}

StageResult Pipeline::similarities() {
  require_producer("neighbors");
  const auto ds = storage::Dataset::open(cfg_.dataset);
  const auto nb_path = path("neighbors.json");
  const auto out = path("similarities.lodb");
  StageResult res{"similarities", false, {out}};
  json settings = {{"t", cfg_.hough.translation_bins}, {"s", cfg_.hough.scale_bins}, {"r", cfg_.hough.scale_range}, {"th", cfg_.hough.score_threshold}};
  auto inputs = dataset_files(ds, cfg_.dataset);
  inputs.push_back(nb_path);
  const auto digest = stage_digest("similarities", settings.dump(), inputs);
  if (up_to_date("similarities", digest, res.outputs)) {
    res.skipped = true;
    log("similarities: inputs unchanged, skipped");
    return res;
  }
  StageTimer t;
  const auto records = ds.load_all();
  const auto list = storage::neighbors_from_json(io::read_text(nb_path));
  if (list.size() != records.size()) fail(ErrorKind::Format, "neighbor list does not match the dataset");
  const auto pairs = symmetric_pairs(list);
  storage::BlockWriter writer(out);
  constexpr std::size_t kBatch = 2048;
  std::size_t entries = 0;
  for (std::size_t start = 0; start < pairs.size(); start += kBatch) {
    const std::size_t end = std::min(pairs.size(), start + kBatch);
    std::vector<SimilarityBlock> batch(end - start);
    parallel_for(batch.size(), cfg_.workers, [&](std::size_t i) {
      const auto [p, q] = pairs[start + i];
      batch[i] = phm_block(records[p], records[q], cfg_.hough, p, q);
    });
    for (const auto& b : batch) {
      entries += b.entries.size();
      writer.append(b);
    }
    log("similarities: " + std::to_string(end) + "/" + std::to_string(pairs.size()) + " image pairs");
  }
  writer.close();
  stamp("similarities", digest, res.outputs);
  log("similarities: " + std::to_string(pairs.size()) + " blocks, " + std::to_string(entries) + " scores (" +
      std::to_string(static_cast<long>(t.ms())) + " ms)");
  return res;
}

StageResult Pipeline::rank() {
  require_producer("similarities");
  const auto ds = storage::Dataset::open(cfg_.dataset);
  const auto sim_path = path("similarities.lodb");
  const auto out = rank_path();
  StageResult res{"rank", false, {out}};
  if (cfg_.solver == Solver::Lod) res.outputs.push_back(path("rank_lod_quadratic.lodr"));
  const auto& r = cfg_.ranking;
  json settings = {{"solver", lod::to_string(cfg_.solver)}, {"beta", r.beta}, {"gamma", r.gamma}, {"alpha", r.alpha},
                   {"T", r.iterations}, {"tol", r.tolerance ? json(*r.tolerance) : json(nullptr)}};
  auto inputs = dataset_files(ds, cfg_.dataset);
  inputs.push_back(sim_path);
  const auto digest = stage_digest("rank", settings.dump(), inputs);
  if (up_to_date("rank", digest, res.outputs)) {
    res.skipped = true;
    log("rank: inputs unchanged, skipped");
    return res;
  }
  StageTimer t;
  const auto records = ds.load_all();
  const auto index = NodeIndex::from_records(records);
  const auto blocks = storage::read_blocks(sim_path);
  const auto graph = BlockAdjacency::assemble(index, blocks, r.gamma, cfg_.chunks);
  RankingConfig rc = r;
  rc.workers = cfg_.workers;
  const auto areas = node_areas(records);
  if (cfg_.solver == Solver::Lod) {
    const auto sol = solve_lod(graph, areas, rc);
    storage::write_rank(res.outputs[1], sol.quadratic);
    storage::write_rank(out, sol.ranking);
  } else {
    storage::write_rank(out, solve(cfg_.solver, graph, areas, rc));
  }
  stamp("rank", digest, res.outputs);
  log(std::string("rank: ") + lod::to_string(cfg_.solver) + " over " + std::to_string(graph.size()) + " nodes, " +
      std::to_string(graph.stored_entries()) + " stored entries, " + std::to_string(graph.chunks().size()) +
      " chunks (" + std::to_string(static_cast<long>(t.ms())) + " ms)");
  return res;
}

StageResult Pipeline::select() {
  require_producer("rank");
  const auto ds = storage::Dataset::open(cfg_.dataset);
  const auto out = detections_path();
  StageResult res{"select", false, {out}};
  json settings = {{"M", cfg_.max_regions}, {"iou", cfg_.iou_threshold}, {"groups", groups_to_json(cfg_.groups)}};
  auto inputs = dataset_files(ds, cfg_.dataset);
  inputs.push_back(rank_path());
  const auto digest = stage_digest("select", settings.dump(), inputs);
  if (up_to_date("select", digest, res.outputs)) {
    res.skipped = true;
    log("select: inputs unchanged, skipped");
    return res;
  }
  const auto records = ds.load_all();
  const auto index = NodeIndex::from_records(records);
  const auto rank = storage::read_rank(rank_path());
  if (rank.size() != index.size()) fail(ErrorKind::Format, "rank vector does not match the dataset's node count");
  SelectionParams params{cfg_.max_regions, cfg_.iou_threshold,
                         cfg_.groups == GroupMode::On || (cfg_.groups == GroupMode::Auto && has_groups(records))};
  const auto result = select_all(records, index, rank.scores, params);
  io::write_text_atomic(out, storage::discovery_to_json(result));
  stamp("select", digest, res.outputs);
  log("select: " + std::to_string(result.images.size()) + " images, M = " + std::to_string(params.max_regions));
  return res;
}

StageResult Pipeline::evaluate() {
  require_producer("select");
  const auto out = metrics_path();
  const std::string stem = std::string("_") + lod::to_string(cfg_.solver);
  const auto csv = path("metrics" + stem + ".csv");
  const auto pr = path("pr_curve" + stem + ".csv");
  StageResult res{"evaluate", false, {out, csv, pr}};
  json settings = {{"sigma", cfg_.sigma}, {"m", cfg_.detrate_m}, {"M", cfg_.max_regions}, {"prov", provenance()}};
  const auto digest = stage_digest("evaluate", settings.dump(), {cfg_.dataset, detections_path()});
  if (up_to_date("evaluate", digest, res.outputs)) {
    res.skipped = true;
    log("evaluate: inputs unchanged, skipped");
    return res;
  }
  const auto manifest = storage::read_manifest(cfg_.dataset);
  const auto result = storage::discovery_from_json(io::read_text(detections_path()));
  GroundTruthBoxes gt;
  for (const auto& e : manifest.entries) {
    auto& boxes = gt.emplace_back();
    for (const auto& g : e.ground_truth) boxes.push_back(g.box);
  }
  EvalSettings es{cfg_.sigma, cfg_.max_regions, cfg_.detrate_m};
  const auto report = lod::evaluate(result, gt, es);
  io::write_text_atomic(out, report_to_json(report, provenance()));
  io::write_text_atomic(csv, report_csv_header(report) + report_csv_row(report, lod::to_string(cfg_.solver)));
  io::write_text_atomic(pr, pr_curve_csv(report.pr50));
  stamp("evaluate", digest, res.outputs);
  std::ostringstream os;
  os.precision(4);
  os << "evaluate: corloc " << report.corloc << "%, AP50 " << report.ap50 << ", AP@[50:95] " << report.ap_range;
  log(os.str());
  return res;
}

StageResult Pipeline::cluster() {
  require_producer("select");
  const auto ds = storage::Dataset::open(cfg_.dataset);
  const std::string stem = std::string("_") + lod::to_string(cfg_.solver);
  const auto out = path("clusters" + stem + ".json");
  const auto hist_csv = path("cluster_histograms" + stem + ".csv");
  StageResult res{"cluster", false, {out, hist_csv}};
  json settings = {{"K", cfg_.clusters}, {"seed", cfg_.cluster_seed}, {"iters", cfg_.cluster_iterations}, {"k", cfg_.retrieve_k}};
  auto inputs = dataset_files(ds, cfg_.dataset);
  inputs.push_back(detections_path());
  const auto digest = stage_digest("cluster", settings.dump(), inputs);
  if (up_to_date("cluster", digest, res.outputs)) {
    res.skipped = true;
    log("cluster: inputs unchanged, skipped");
    return res;
  }
  const auto records = ds.load_all();
  const auto result = storage::discovery_from_json(io::read_text(detections_path()));
  auto classes = ds.manifest().classes;
  std::vector<std::vector<std::string>> labels;
  for (const auto& r : records) {
    auto& l = labels.emplace_back();
    for (const auto& g : r.ground_truth)
      if (!g.label.empty()) l.push_back(g.label);
  }
  if (classes.empty()) {
    std::set<std::string> all;
    for (const auto& l : labels) all.insert(l.begin(), l.end());
    classes.assign(all.begin(), all.end());
  }
  if (classes.empty()) fail(ErrorKind::InvalidArgument, "cluster: dataset carries no class labels");

  const auto sim = image_similarity(result, records, cfg_.workers);
  const auto retrieved = retrieve_neighbors(sim, cfg_.retrieve_k);
  const double corret_pct = corret(retrieved, labels, cfg_.retrieve_k);

  const std::size_t k = std::min(cfg_.clusters > 0 ? cfg_.clusters : classes.size(), records.size());
  const auto feats = representative_features(result, records);
  const auto clustering = kmeans(feats, k, cfg_.cluster_seed, cfg_.cluster_iterations);

  std::vector<std::uint32_t> labeled_assign;
  std::vector<std::string> primary;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (labels[i].empty()) continue;
    labeled_assign.push_back(clustering.assignment[i]);
    primary.push_back(labels[i].front());
  }
  const double purity_pct = primary.empty() ? 0.0 : purity(labeled_assign, primary);
  const auto hist = cluster_histograms(clustering.assignment, k, labels, classes);
  const auto matching = match_clusters(hist);

  json j = {{"format", "lod-clusters"},
            {"k", k},
            {"corret_percent", corret_pct},
            {"purity_percent", purity_pct},
            {"assignment", clustering.assignment},
            {"class_of_cluster", matching.class_of_cluster},
            {"classes", classes},
            {"provenance", json::parse(provenance())}};
  io::write_text_atomic(out, j.dump(1) + "\n");
  io::write_text_atomic(hist_csv, histograms_csv(hist, classes));
  stamp("cluster", digest, res.outputs);
  std::ostringstream os;
  os.precision(4);
  os << "cluster: K = " << k << ", purity " << purity_pct << "%, CorRet " << corret_pct << "%";
  log(os.str());
  return res;
}

std::vector<StageResult> Pipeline::run_all() {
  std::vector<StageResult> out;
  out.push_back(neighbors());
  out.push_back(similarities());
  out.push_back(rank());
  out.push_back(select());
  out.push_back(evaluate());
  const auto manifest = storage::read_manifest(cfg_.dataset);
  bool labeled = !manifest.classes.empty();
  for (const auto& e : manifest.entries)
    for (const auto& g : e.ground_truth) labeled = labeled || !g.label.empty();
  if (labeled && manifest.entries.size() > 1) out.push_back(cluster());
  return out;
}

}  // namespace lod
