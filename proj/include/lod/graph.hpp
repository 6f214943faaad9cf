#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lod/block.hpp"
#include "lod/dataset.hpp"
#include "lod/neighbors.hpp"

namespace lod {

/// Consecutive rows of W owned by one worker. Rows never split an image; columns of every
/// row are stored in ascending global order, which fixes the accumulation order.
struct AdjacencyChunk {
  std::size_t first_image = 0;
  std::size_t end_image = 0;
  std::size_t first_node = 0;
  std::size_t end_node = 0;
  std::vector<std::uint64_t> row_ptr;
  std::vector<std::uint32_t> cols;
  std::vector<float> values;

  std::size_t rows() const noexcept { return end_node - first_node; }
};

/// Partition of images into `chunks` contiguous ranges balanced by node count. Returns
/// chunk+1 image boundaries. The chunk count is clamped to [1, n_images].
std::vector<std::size_t> balanced_chunks(const NodeIndex& index, std::size_t chunks);

/// The proposal graph W + (gamma / N) e e^T. The rank-one part is implicit. Each unordered
/// image pair is stored in both owning chunks so W is symmetric.
class BlockAdjacency {
 public:
  /// Blocks may come in either orientation but each unordered pair at most once. When
  /// `neighbors` is given, every block's pair must be linked in at least one direction.
  static BlockAdjacency assemble(const NodeIndex& index, std::span<const SimilarityBlock> blocks,
                                 double gamma, std::size_t chunks,
                                 const NeighborList* neighbors = nullptr);

  std::size_t size() const noexcept { return index_.size(); }
  double gamma() const noexcept { return gamma_; }
  const NodeIndex& index() const noexcept { return index_; }
  std::span<const AdjacencyChunk> chunks() const noexcept { return chunks_; }
  std::size_t stored_entries() const noexcept;

  /// D_jj = sum_i W_ij + gamma.
  std::span<const double> degrees() const noexcept { return degrees_; }

  /// (W + gamma/N e e^T) x, computed as W x + (gamma/N)(sum x) e.
  std::vector<double> matvec(std::span<const double> x, std::size_t workers = 1) const;

  /// (W + gamma/N e e^T) D^{-1} x. Throws Error(Numerical) on a zero degree.
  std::vector<double> transition_matvec(std::span<const double> x, std::size_t workers = 1) const;

  /// Row-major N x N materialization including the rank-one term (small graphs only).
  std::vector<double> to_dense() const;

  /// Writes one block bundle per chunk plus `chunks.json` into `dir`.
  void spill(const std::filesystem::path& dir) const;
  /// Reads a spilled adjacency back; matvec results are bitwise identical to the original.
  static BlockAdjacency load_spilled(const std::filesystem::path& dir, const NodeIndex& index);

 private:
  void compute_degrees();

  NodeIndex index_;
  double gamma_ = 0.0;
  std::vector<AdjacencyChunk> chunks_;
  std::vector<double> degrees_;
};

}  // namespace lod
