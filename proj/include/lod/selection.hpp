#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lod/dataset.hpp"
#include "lod/geometry.hpp"

namespace lod {

struct Selection {
  std::uint32_t proposal = 0;  // local index within the image
  double score = 0.0;
  BoundingBox box;
  std::uint16_t group_id = 0;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct ImageDetections {
  std::string image_id;
  std::vector<Selection> selections;  // ordered, scores non-increasing

  friend bool operator==(const ImageDetections&, const ImageDetections&) = default;
};

struct SelectionParams {
  std::size_t max_regions = 1;  // M
  double iou_threshold = 0.3;
  bool use_groups = false;
};

struct DiscoveryResult {
  SelectionParams params;
  std::vector<ImageDetections> images;

  friend bool operator==(const DiscoveryResult&, const DiscoveryResult&) = default;
};

inline bool operator==(const SelectionParams& a, const SelectionParams& b) {
  return a.max_regions == b.max_regions && a.iou_threshold == b.iou_threshold &&
         a.use_groups == b.use_groups;
}

/// Greedy selection over proposals ordered by (score desc, area desc, index asc). The first
/// proposal is always kept; later ones need IoU <= threshold against every kept box and, with
/// grouping on, a group id not used yet.
ImageDetections select_regions(const ImageRecord& image, std::span<const double> scores,
                               const SelectionParams& params);

/// Runs select_regions for every image; `scores` is indexed by global node.
DiscoveryResult select_all(std::span<const ImageRecord> records, const NodeIndex& index,
                           std::span<const double> scores, const SelectionParams& params);

/// Keeps only the first selection of every image.
DiscoveryResult single_object_view(const DiscoveryResult& result);

/// True when any proposal carries a non-zero group id.
bool has_groups(std::span<const ImageRecord> records);

}  // namespace lod
