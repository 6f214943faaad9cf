#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lod/block.hpp"
#include "lod/dataset.hpp"
#include "lod/neighbors.hpp"
#include "lod/rank_vector.hpp"
#include "lod/selection.hpp"

namespace lod::storage {

inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr std::uint32_t kBlockFormatVersion = 1;
inline constexpr std::uint32_t kRankFormatVersion = 1;

// Feature files ("LODF"): one per image, holding proposals and the image descriptor.
std::vector<std::uint8_t> encode_features(const ImageRecord& record);
/// Fills proposals and descriptor; id, size and ground truth come from `entry`.
ImageRecord decode_features(std::span<const std::uint8_t> bytes, const ManifestEntry& entry);
void write_features(const std::filesystem::path& path, const ImageRecord& record);
ImageRecord read_features(const std::filesystem::path& path, const ManifestEntry& entry);

// Similarity blocks ("LODB"). A block bundle is a plain concatenation of block records.
std::vector<std::uint8_t> encode_block(const SimilarityBlock& block);
void write_block(const std::filesystem::path& path, const SimilarityBlock& block);
SimilarityBlock read_block(const std::filesystem::path& path);

class BlockWriter {
 public:
  explicit BlockWriter(std::filesystem::path path);
  ~BlockWriter();
  BlockWriter(const BlockWriter&) = delete;
  BlockWriter& operator=(const BlockWriter&) = delete;

  void append(const SimilarityBlock& block);
  /// Flushes and moves the bundle into place. Called by the destructor if omitted.
  void close();
  std::size_t count() const noexcept { return count_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  std::size_t count_ = 0;
  bool closed_ = false;
};

class BlockReader {
 public:
  explicit BlockReader(const std::filesystem::path& path);
  std::optional<SimilarityBlock> next();

 private:
  std::string name_;
  std::ifstream in_;
};

std::vector<SimilarityBlock> read_blocks(const std::filesystem::path& path);
void write_blocks(const std::filesystem::path& path, std::span<const SimilarityBlock> blocks);

// Rank vectors ("LODR").
std::vector<std::uint8_t> encode_rank(const RankVector& rank);
RankVector decode_rank(std::span<const std::uint8_t> bytes, const std::string& context);
void write_rank(const std::filesystem::path& path, const RankVector& rank);
RankVector read_rank(const std::filesystem::path& path);

// Manifest: JSON text, feature paths relative to the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Lazy dataset accessor: only the manifest stays resident, records are read on demand.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& manifest_path);

  const DatasetManifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& root() const noexcept { return root_; }
  std::size_t size() const noexcept { return manifest_.entries.size(); }

  /// Reads image i. Throws Error(MissingInput) naming the id if its file is gone.
  ImageRecord load(std::size_t i) const;
  std::vector<ImageRecord> load_all() const;
  ValidationReport validate() const;

 private:
  DatasetManifest manifest_;
  std::filesystem::path root_;
};

/// Writes feature files under `dir/features/` and `dir/manifest.json`; returns the manifest.
DatasetManifest write_dataset(const std::filesystem::path& dir, std::span<const ImageRecord> records,
                              std::vector<std::string> classes = {});

// Structured-text artifacts.
std::string neighbors_to_json(const NeighborList& list, std::span<const std::string> ids);
NeighborList neighbors_from_json(const std::string& text);
std::string discovery_to_json(const DiscoveryResult& result);
DiscoveryResult discovery_from_json(const std::string& text);

}  // namespace lod::storage
