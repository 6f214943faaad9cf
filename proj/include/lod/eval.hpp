#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lod/geometry.hpp"
#include "lod/neighbors.hpp"
#include "lod/selection.hpp"

namespace lod {

/// Ground-truth boxes per image, aligned with DiscoveryResult::images.
using GroundTruthBoxes = std::vector<std::vector<BoundingBox>>;

GroundTruthBoxes ground_truth_boxes(std::span<const ImageRecord> records);

struct PrPoint {
  std::size_t m = 0;
  std::size_t predictions = 0;
  std::size_t matched = 0;     // predictions matched one-to-one to a GT box
  std::size_t ground_truth = 0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision/recall of every image's top-m predictions for m = 1..M. Each prediction, in rank
/// order, claims the unclaimed GT box of highest IoU provided IoU >= sigma.
std::vector<PrPoint> pr_curve(const DiscoveryResult& results, const GroundTruthBoxes& gt, double sigma,
                              std::size_t max_m);

/// Percentage of images (with at least one GT box) whose top prediction has IoU >= sigma with
/// some GT box. Throws if no image has ground truth.
double corloc(const DiscoveryResult& results, const GroundTruthBoxes& gt, double sigma = 0.5);

/// Area under the PR polyline over m = 1..M, anchored at (0, precision(1)). A fraction.
double average_precision(const DiscoveryResult& results, const GroundTruthBoxes& gt, double sigma,
                         std::size_t max_m);

/// Mean AP over sigma = 0.50, 0.55, ..., 0.95.
double ap_range(const DiscoveryResult& results, const GroundTruthBoxes& gt, std::size_t max_m);

/// GT recall (percent) using each image's top-m predictions.
double det_rate(const DiscoveryResult& results, const GroundTruthBoxes& gt, std::size_t m, double sigma = 0.5);

/// Mean over images of |retrieved ∩ true neighbors| / k, in percent. Two images are true
/// neighbors when they share at least one label.
double corret(const NeighborList& retrieved, std::span<const std::vector<std::string>> labels,
              std::size_t k = 10);

/// The ten IoU thresholds of AP@[50:95].
std::vector<double> ap_thresholds();

struct EvalSettings {
  double sigma = 0.5;
  std::size_t max_m = 0;             // 0 means the selection budget
  std::vector<std::size_t> detrate_m = {1, 5};
};

struct MetricReport {
  std::size_t n_images = 0;
  std::size_t n_evaluated = 0;       // images with ground truth
  double corloc = 0.0;               // percent
  std::vector<double> sigmas;
  std::vector<double> ap;            // fraction, one per sigma
  double ap50 = 0.0;                 // fraction
  double ap_range = 0.0;             // fraction
  std::vector<std::size_t> detrate_m;
  std::vector<double> detrate;       // percent
  std::vector<PrPoint> pr50;
};

MetricReport evaluate(const DiscoveryResult& results, const GroundTruthBoxes& gt, const EvalSettings& settings);

std::string report_to_json(const MetricReport& report, const std::string& provenance_json = {});
std::string report_csv_header(const MetricReport& report);
std::string report_csv_row(const MetricReport& report, const std::string& label);
std::string pr_curve_csv(std::span<const PrPoint> curve);

}  // namespace lod
