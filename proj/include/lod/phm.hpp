#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lod/block.hpp"
#include "lod/dataset.hpp"
#include "lod/geometry.hpp"

namespace lod {

/// Discretization of the (dx, dy, log-scale) transformation space used for Hough voting.
///
/// Bins are centered on the identity transform and have width 2 / translation_bins over the
/// normalized offset range [-1, 1] (offsets are center displacements divided by the image
/// diagonal), and width 2 log(scale_range) / scale_bins over [-log(scale_range), log(scale_range)].
/// Values past the outermost bin clamp into it. Centering makes the grid symmetric under
/// inversion of the transform, so the per-axis bin count is 2 * floor(bins / 2) + 1.
struct HoughConfig {
  int translation_bins = 8;
  int scale_bins = 5;
  double scale_range = 4.0;       // scales in [1 / scale_range, scale_range]
  double score_threshold = 0.0;   // entries with S < threshold are dropped

  void validate() const;
  int translation_radius() const noexcept { return translation_bins / 2; }
  int scale_radius() const noexcept { return scale_bins / 2; }
  std::size_t bin_count() const noexcept;
};

struct HoughBin {
  int dx = 0;  // signed offsets from the identity bin
  int dy = 0;
  int ds = 0;

  friend bool operator==(const HoughBin&, const HoughBin&) = default;
};

struct ImageFrame {
  double width = 0.0;
  double height = 0.0;
  double diagonal() const noexcept;
};

/// Dense r_p x r_q row-major matrix of max(<f_k, f_l>, 0).
std::vector<double> appearance_matrix(const std::vector<Proposal>& p, const std::vector<Proposal>& q);

/// Bin of the transform mapping box_k (in frame p) to box_l (in frame q).
HoughBin transformation_bin(const BoundingBox& box_k, const ImageFrame& frame_p,
                            const BoundingBox& box_l, const ImageFrame& frame_q,
                            const HoughConfig& cfg);

/// Flattened index of a bin in [0, cfg.bin_count()).
std::size_t flat_bin(const HoughBin& bin, const HoughConfig& cfg) noexcept;

/// Probabilistic Hough matching block: votes h[bin(k,l)] += a_kl over all pairs, then
/// S_kl = a_kl * h[bin(k,l)], which equals a_kl * sum_{k'l'} K(kl, k'l') a_k'l' for the
/// same-bin indicator kernel K.
SimilarityBlock phm_block(const ImageRecord& p, const ImageRecord& q, const HoughConfig& cfg,
                          std::uint32_t index_p = 0, std::uint32_t index_q = 1);

}  // namespace lod
