#include "lod/selection.hpp"

#include <algorithm>
#include <numeric>

#include "lod/error.hpp"

namespace lod {

ImageDetections select_regions(const ImageRecord& image, std::span<const double> scores,
                               const SelectionParams& params) {
  const auto& props = image.proposals;
  if (scores.size() != props.size()) {
    fail(ErrorKind::InvalidArgument, image.image_id + ": score count does not match proposal count");
  }
  ImageDetections det{image.image_id, {}};
  if (props.empty() || params.max_regions == 0) return det;

  std::vector<std::uint32_t> order(props.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    const double area_a = props[a].box.area(), area_b = props[b].box.area();
    if (area_a != area_b) return area_a > area_b;
    return a < b;
  });

  for (std::uint32_t i : order) {
    if (det.selections.size() >= params.max_regions) break;
    const auto& cand = props[i];
    bool keep = true;
    for (const auto& s : det.selections) {
      if ((params.use_groups && s.group_id == cand.group_id) ||
          iou(s.box, cand.box) > params.iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) det.selections.push_back({i, scores[i], cand.box, cand.group_id});
  }
  return det;
}

DiscoveryResult select_all(std::span<const ImageRecord> records, const NodeIndex& index,
                           std::span<const double> scores, const SelectionParams& params) {
  if (records.size() != index.n_images() || scores.size() != index.size()) {
    fail(ErrorKind::InvalidArgument, "scores do not match the dataset layout");
  }
  DiscoveryResult result;
  result.params = params;
  result.images.reserve(records.size());
  for (std::size_t p = 0; p < records.size(); ++p) {
    result.images.push_back(select_regions(records[p], scores.subspan(index.offset(p), index.count(p)), params));
  }
  return result;
}

DiscoveryResult single_object_view(const DiscoveryResult& result) {
  DiscoveryResult out = result;
  out.params.max_regions = std::min<std::size_t>(out.params.max_regions, 1);
  for (auto& img : out.images)
    if (img.selections.size() > 1) img.selections.resize(1);
  return out;
}

bool has_groups(std::span<const ImageRecord> records) {
  for (const auto& r : records)
    for (const auto& p : r.proposals)
      if (p.group_id != 0) return true;
  return false;
}

}  // namespace lod
