#include "lod/dataset.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "lod/error.hpp"

namespace lod {

NodeIndex::NodeIndex(std::span<const std::size_t> proposal_counts) {
  offsets_.reserve(proposal_counts.size() + 1);
  offsets_.push_back(0);
  for (std::size_t c : proposal_counts) offsets_.push_back(offsets_.back() + c);
}

NodeIndex NodeIndex::from_records(std::span<const ImageRecord> records) {
  std::vector<std::size_t> counts;
  counts.reserve(records.size());
  for (const auto& r : records) counts.push_back(r.proposals.size());
  return NodeIndex(counts);
}

std::size_t NodeIndex::to_global(std::size_t image, std::size_t proposal) const {
  if (image >= n_images() || proposal >= count(image)) {
    fail(ErrorKind::InvalidArgument, "node (" + std::to_string(image) + ", " +
                                         std::to_string(proposal) + ") out of range");
  }
  return offsets_[image] + proposal;
}

NodeIndex::Local NodeIndex::from_global(std::size_t node) const {
  if (node >= size()) fail(ErrorKind::InvalidArgument, "node " + std::to_string(node) + " out of range");
  // First offset strictly greater than node, minus one, is the owning image.
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), node);
  const auto image = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {image, node - offsets_[image]};
}

const char* to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::Format: return "format";
    case ViolationKind::DuplicateId: return "duplicate_id";
    case ViolationKind::CountMismatch: return "count_mismatch";
    case ViolationKind::DimensionMismatch: return "dimension_mismatch";
    case ViolationKind::BoxInvalid: return "box_invalid";
    case ViolationKind::BoxOutOfBounds: return "box_out_of_bounds";
    case ViolationKind::NegativeSaliency: return "negative_saliency";
    case ViolationKind::MissingFile: return "missing_file";
  }
  return "unknown";
}

bool ValidationReport::has_format_errors() const noexcept {
  return count(ViolationKind::Format) > 0;
}

std::size_t ValidationReport::count(ViolationKind kind) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; }));
}

namespace {

void check_box(const std::string& id, const BoundingBox& b, double w, double h,
               const std::string& what, std::vector<Violation>& out) {
  std::ostringstream os;
  os << what << " [" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max << "]";
  if (!b.valid()) {
    out.push_back({id, ViolationKind::BoxInvalid, os.str() + " has non-positive area"});
  } else if (!b.inside(w, h)) {
    os << " exceeds image bounds " << w << "x" << h;
    out.push_back({id, ViolationKind::BoxOutOfBounds, os.str()});
  }
}

}  // namespace

void validate_record(const ImageRecord& record, std::size_t feature_dim,
                     std::size_t descriptor_dim, std::vector<Violation>& out) {
  const auto& id = record.image_id;
  if (!(record.width > 0.0) || !(record.height > 0.0)) {
    out.push_back({id, ViolationKind::BoxInvalid, "image has non-positive size"});
  }
  if (record.image_feature.size() != descriptor_dim) {
    out.push_back({id, ViolationKind::DimensionMismatch,
                   "image descriptor has dimension " + std::to_string(record.image_feature.size()) +
                       ", expected " + std::to_string(descriptor_dim)});
  }
  for (std::size_t k = 0; k < record.proposals.size(); ++k) {
    const auto& p = record.proposals[k];
    const std::string tag = "proposal " + std::to_string(k);
    if (p.feature.size() != feature_dim) {
      out.push_back({id, ViolationKind::DimensionMismatch,
                     tag + " has feature dimension " + std::to_string(p.feature.size()) +
                         ", expected " + std::to_string(feature_dim)});
    }
    check_box(id, p.box, record.width, record.height, tag, out);
    if (p.saliency && !(*p.saliency >= 0.0f)) {
      out.push_back({id, ViolationKind::NegativeSaliency, tag + " has negative saliency"});
    }
  }
  for (std::size_t g = 0; g < record.ground_truth.size(); ++g) {
    check_box(id, record.ground_truth[g].box, record.width, record.height,
              "ground truth " + std::to_string(g), out);
  }
}

ValidationReport validate_dataset(const DatasetManifest& manifest, const RecordSource& records) {
  ValidationReport report;
  auto& out = report.violations;
  if (manifest.n_images != manifest.entries.size()) {
    out.push_back({"", ViolationKind::CountMismatch,
                   "manifest declares " + std::to_string(manifest.n_images) + " images but lists " +
                       std::to_string(manifest.entries.size())});
  }
  std::unordered_set<std::string> seen;
  for (const auto& e : manifest.entries) {
    if (!seen.insert(e.image_id).second) {
      out.push_back({e.image_id, ViolationKind::DuplicateId, "image id appears more than once"});
    }
  }
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& entry = manifest.entries[i];
    ImageRecord rec;
    try {
      rec = records(i);
    } catch (const Error& e) {
      const auto kind =
          e.kind() == ErrorKind::MissingInput ? ViolationKind::MissingFile : ViolationKind::Format;
      out.push_back({entry.image_id, kind, e.what()});
      continue;
    }
    if (rec.image_id != entry.image_id) {
      out.push_back({entry.image_id, ViolationKind::CountMismatch,
                     "payload holds image id '" + rec.image_id + "'"});
    }
    validate_record(rec, manifest.feature_dim, manifest.descriptor_dim, out);
  }
  return report;
}

std::vector<double> node_areas(std::span<const ImageRecord> records) {
  std::vector<double> areas;
  for (const auto& r : records)
    for (const auto& p : r.proposals) areas.push_back(p.box.area());
  return areas;
}

}  // namespace lod
