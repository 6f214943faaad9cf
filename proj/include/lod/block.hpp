#pragma once

#include <cstdint>
#include <vector>

namespace lod {

struct SparseEntry {
  std::uint32_t k = 0;  // proposal index in image p
  std::uint32_t l = 0;  // proposal index in image q
  float score = 0.0f;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Nonnegative similarity scores between the proposals of images p and q,
/// stored as (k, l)-sorted, duplicate-free triplets.
struct SimilarityBlock {
  std::uint32_t image_p = 0;
  std::uint32_t image_q = 0;
  std::uint32_t rows = 0;  // r_p
  std::uint32_t cols = 0;  // r_q
  std::vector<SparseEntry> entries;

  /// The same scores seen from image q (entries re-sorted by (l, k)).
  SimilarityBlock transposed() const;

  friend bool operator==(const SimilarityBlock&, const SimilarityBlock&) = default;
};

/// Throws Error(Format) if indices are out of range, unsorted, duplicated or scores negative.
void check_block(const SimilarityBlock& block);

}  // namespace lod
