// lod: staged command-line driver for the discovery pipeline.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "lod/error.hpp"
#include "lod/pipeline.hpp"
#include "lod/storage.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> dataset, work_dir, solver, groups;
  std::optional<std::size_t> neighbors_k, chunks, max_regions, workers, retrieve_k, clusters;
  std::optional<double> beta, gamma, alpha, tolerance, iou, sigma;
  std::optional<int> iterations, t_bins, s_bins;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON config file; flags override its keys");
  cmd->add_option("--dataset", o.dataset, "dataset manifest path");
  cmd->add_option("--work-dir", o.work_dir, "directory for stage outputs (LOD_WORK_DIR overrides)");
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--solver", o.solver, "quadratic | pagerank | lod");
  cmd->add_option("-k,--neighbors", o.neighbors_k, "image neighbors per image");
  cmd->add_option("--translation-bins", o.t_bins, "Hough translation bins per axis");
  cmd->add_option("--scale-bins", o.s_bins, "Hough scale bins");
  cmd->add_option("--beta", o.beta, "teleportation weight");
  cmd->add_option("--gamma", o.gamma, "uniform graph regularizer");
  cmd->add_option("--alpha", o.alpha, "share of each image's top nodes in the personalization");
  cmd->add_option("--iterations", o.iterations, "power iterations");
  cmd->add_option("--tolerance", o.tolerance, "early stop when the max change falls below this");
  cmd->add_option("--chunks", o.chunks, "adjacency chunks");
  cmd->add_option("-M,--max-regions", o.max_regions, "regions kept per image");
  cmd->add_option("--iou", o.iou, "suppression IoU threshold");
  cmd->add_option("--groups", o.groups, "auto | on | off")->check(CLI::IsMember({"auto", "on", "off"}));
  cmd->add_option("--sigma", o.sigma, "IoU threshold for a correct detection");
  cmd->add_option("--clusters", o.clusters, "k-means cluster count (0: one per class)");
  cmd->add_option("--retrieve-k", o.retrieve_k, "retrieved images per image for CorRet");
  cmd->add_flag("-q,--quiet", o.quiet, "suppress progress messages");
}

lod::PipelineConfig resolve(const Overrides& o) {
  lod::PipelineConfig c = o.config.empty() ? lod::PipelineConfig{} : lod::PipelineConfig::load(o.config);
  if (o.dataset) c.dataset = *o.dataset;
  if (o.work_dir) c.work_dir = *o.work_dir;
  if (o.workers) c.workers = *o.workers;
  if (o.solver) c.solver = lod::parse_solver(*o.solver);
  if (o.neighbors_k) c.neighbors_k = *o.neighbors_k;
  if (o.t_bins) c.hough.translation_bins = *o.t_bins;
  if (o.s_bins) c.hough.scale_bins = *o.s_bins;
  if (o.beta) c.ranking.beta = *o.beta;
  if (o.gamma) c.ranking.gamma = *o.gamma;
  if (o.alpha) c.ranking.alpha = *o.alpha;
  if (o.iterations) c.ranking.iterations = *o.iterations;
  if (o.tolerance) c.ranking.tolerance = *o.tolerance;
  if (o.chunks) c.chunks = *o.chunks;
  if (o.max_regions) c.max_regions = *o.max_regions;
  if (o.iou) c.iou_threshold = *o.iou;
  if (o.groups) c.groups = *o.groups == "on" ? lod::GroupMode::On : *o.groups == "off" ? lod::GroupMode::Off : lod::GroupMode::Auto;
  if (o.sigma) c.sigma = *o.sigma;
  if (o.clusters) c.clusters = *o.clusters;
  if (o.retrieve_k) c.retrieve_k = *o.retrieve_k;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-scale unsupervised object discovery by proposal ranking"};
  app.require_subcommand(1);
  Overrides o;

  const char* stages[] = {"neighbors", "similarities", "rank", "select", "evaluate", "cluster", "pipeline", "synth"};
  const char* help[] = {"exact k-NN over image descriptors",
                        "Hough-matching scores for every neighbor pair",
                        "rank all proposals with the chosen solver",
                        "pick up to M regions per image",
                        "CorLoc, AP and detection rate against ground truth",
                        "image retrieval, clustering and purity",
                        "run all stages in order",
                        "generate the planted synthetic dataset at the dataset path"};
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < std::size(stages); ++i) {
    auto* cmd = app.add_subcommand(stages[i], help[i]);
    add_common(cmd, o);
    cmds.push_back(cmd);
  }
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_images, synth_planted;
  cmds.back()->add_option("--seed", synth_seed, "generator seed");
  cmds.back()->add_option("--images", synth_images, "number of images");
  cmds.back()->add_option("--planted", synth_planted, "planted objects per image (1..3)");

  auto* validate = app.add_subcommand("validate", "check a dataset against its manifest");
  std::string validate_path = "data/manifest.json";
  validate->add_option("dataset", validate_path, "manifest path");

  auto* dump = app.add_subcommand("config", "print the effective configuration");
  add_common(dump, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lod::exit_code(lod::ErrorKind::InvalidArgument);
  }

  try {
    if (validate->parsed()) {
      const auto report = lod::storage::Dataset::open(validate_path).validate();
      for (const auto& v : report.violations) {
        std::cout << v.image_id << '\t' << lod::to_string(v.kind) << '\t' << v.message << '\n';
      }
      std::cout << report.violations.size() << " violation(s)\n";
      if (report.ok()) return 0;
      return lod::exit_code(report.has_format_errors() ? lod::ErrorKind::Format : lod::ErrorKind::Validation);
    }
    auto cfg = resolve(o);
    if (dump->parsed()) {
      std::cout << cfg.to_json();
      return 0;
    }
    if (synth_seed) cfg.synth.seed = *synth_seed;
    if (synth_images) cfg.synth.n_images = *synth_images;
    if (synth_planted) cfg.synth.planted_per_image = *synth_planted;

    lod::Pipeline::Logger logger;
    if (!o.quiet) logger = [](const std::string& m) { std::cerr << m << '\n'; };
    lod::Pipeline pipeline(cfg, logger);

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth") pipeline.synth();
    else if (name == "neighbors") pipeline.neighbors();
    else if (name == "similarities") pipeline.similarities();
    else if (name == "rank") pipeline.rank();
    else if (name == "select") pipeline.select();
    else if (name == "evaluate") pipeline.evaluate();
    else if (name == "cluster") pipeline.cluster();
    else if (name == "pipeline") pipeline.run_all();
    return 0;
  } catch (const lod::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lod::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
