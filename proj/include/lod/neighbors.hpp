#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace lod {

/// Per image, up to k other images sorted from closest to farthest.
struct NeighborList {
  std::size_t k = 0;
  std::vector<std::vector<std::uint32_t>> neighbors;

  std::size_t size() const noexcept { return neighbors.size(); }
  friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

/// Exact k-NN under Euclidean distance; ties go to the lower image index.
/// k >= n yields all other images.
NeighborList find_neighbors(std::span<const std::vector<float>> features, std::size_t k,
                            std::size_t workers = 1);

/// Top-k by descending similarity from a dense row-major n x n matrix; ties to lower index.
/// The diagonal is ignored. NaN entries rank last.
NeighborList top_k_by_similarity(std::span<const double> similarity, std::size_t n, std::size_t k);

/// Unordered pairs (p < q) linked in at least one direction, sorted.
std::vector<std::pair<std::uint32_t, std::uint32_t>> symmetric_pairs(const NeighborList& list);

}  // namespace lod
