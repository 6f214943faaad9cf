#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lod/geometry.hpp"

namespace lod {

/// One candidate region of an image.
struct Proposal {
  BoundingBox box;
  std::vector<float> feature;  // unnormalized
  std::uint16_t group_id = 0;  // 0 when ungrouped
  std::optional<float> saliency;
};

struct GroundTruthObject {
  BoundingBox box;
  std::string label;
};

struct ImageRecord {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<Proposal> proposals;
  std::vector<float> image_feature;  // global descriptor used for neighbor retrieval
  std::vector<GroundTruthObject> ground_truth;
};

struct ManifestEntry {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::string feature_path;  // relative to the manifest directory
  std::vector<GroundTruthObject> ground_truth;
};

struct DatasetManifest {
  std::size_t n_images = 0;
  std::size_t feature_dim = 0;
  std::size_t descriptor_dim = 0;
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;
};

/// Bijection between (image, local proposal) and the global node index.
class NodeIndex {
 public:
  struct Local {
    std::size_t image;
    std::size_t proposal;
    friend bool operator==(const Local&, const Local&) = default;
  };

  NodeIndex() = default;
  explicit NodeIndex(std::span<const std::size_t> proposal_counts);

  static NodeIndex from_records(std::span<const ImageRecord> records);

  std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t n_images() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t count(std::size_t image) const { return offsets_[image + 1] - offsets_[image]; }
  std::size_t offset(std::size_t image) const { return offsets_[image]; }

  std::size_t to_global(std::size_t image, std::size_t proposal) const;
  std::size_t to_global(Local l) const { return to_global(l.image, l.proposal); }
  Local from_global(std::size_t node) const;

 private:
  std::vector<std::size_t> offsets_;
};

enum class ViolationKind {
  Format,
  DuplicateId,
  CountMismatch,
  DimensionMismatch,
  BoxInvalid,
  BoxOutOfBounds,
  NegativeSaliency,
  MissingFile,
};

const char* to_string(ViolationKind kind) noexcept;

struct Violation {
  std::string image_id;
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  /// True when at least one payload could not be parsed (as opposed to semantic checks).
  bool has_format_errors() const noexcept;
  std::size_t count(ViolationKind kind) const noexcept;
};

/// Produces record i, or throws lod::Error when the payload cannot be read.
using RecordSource = std::function<ImageRecord(std::size_t)>;

ValidationReport validate_dataset(const DatasetManifest& manifest, const RecordSource& records);

/// Checks a single in-memory record against the manifest-level dimensions.
void validate_record(const ImageRecord& record, std::size_t feature_dim,
                     std::size_t descriptor_dim, std::vector<Violation>& out);

/// Per-node box areas, used for ranking tie-breaks.
std::vector<double> node_areas(std::span<const ImageRecord> records);

}  // namespace lod
