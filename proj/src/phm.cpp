#include "lod/phm.hpp"

#include <algorithm>
#include <cmath>

#include "lod/error.hpp"

namespace lod {

void HoughConfig::validate() const {
  if (translation_bins < 1 || scale_bins < 1) fail(ErrorKind::InvalidArgument, "hough bin counts must be >= 1");
  if (!(scale_range > 1.0)) fail(ErrorKind::InvalidArgument, "hough scale_range must be > 1");
  if (!(score_threshold >= 0.0)) fail(ErrorKind::InvalidArgument, "hough score_threshold must be >= 0");
}

std::size_t HoughConfig::bin_count() const noexcept {
  const auto t = static_cast<std::size_t>(2 * translation_radius() + 1);
  const auto s = static_cast<std::size_t>(2 * scale_radius() + 1);
  return t * t * s;
}

double ImageFrame::diagonal() const noexcept { return std::hypot(width, height); }

std::vector<double> appearance_matrix(const std::vector<Proposal>& p, const std::vector<Proposal>& q) {
  std::vector<double> a(p.size() * q.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto& fk = p[k].feature;
    for (std::size_t l = 0; l < q.size(); ++l) {
      const auto& fl = q[l].feature;
      if (fk.size() != fl.size()) {
        fail(ErrorKind::InvalidArgument, "feature dimension mismatch (" + std::to_string(fk.size()) +
                                             " vs " + std::to_string(fl.size()) + ")");
      }
      double dot = 0.0;
      for (std::size_t t = 0; t < fk.size(); ++t) dot += static_cast<double>(fk[t]) * fl[t];
      a[k * q.size() + l] = std::max(dot, 0.0);
    }
  }
  return a;
}

namespace {

// std::round is odd-symmetric, so bin(-v) == -bin(v).
int centered_bin(double value, double width, int radius) {
  const double j = std::round(value / width);
  return static_cast<int>(std::clamp(j, -static_cast<double>(radius), static_cast<double>(radius)));
}

}  // namespace

HoughBin transformation_bin(const BoundingBox& box_k, const ImageFrame& frame_p,
                            const BoundingBox& box_l, const ImageFrame& frame_q,
                            const HoughConfig& cfg) {
  const double diag_p = frame_p.diagonal();
  const double diag_q = frame_q.diagonal();
  const double dx = box_l.center_x() / diag_q - box_k.center_x() / diag_p;
  const double dy = box_l.center_y() / diag_q - box_k.center_y() / diag_p;
  const double log_scale =
      std::log(std::sqrt(box_l.area()) / diag_q) - std::log(std::sqrt(box_k.area()) / diag_p);
  const double t_width = 2.0 / cfg.translation_bins;
  const double s_width = 2.0 * std::log(cfg.scale_range) / cfg.scale_bins;
  return {centered_bin(dx, t_width, cfg.translation_radius()),
          centered_bin(dy, t_width, cfg.translation_radius()),
          centered_bin(log_scale, s_width, cfg.scale_radius())};
}

std::size_t flat_bin(const HoughBin& bin, const HoughConfig& cfg) noexcept {
  const int tr = cfg.translation_radius();
  const int sr = cfg.scale_radius();
  const auto t = static_cast<std::size_t>(2 * tr + 1);
  const auto s = static_cast<std::size_t>(2 * sr + 1);
  return (static_cast<std::size_t>(bin.dx + tr) * t + static_cast<std::size_t>(bin.dy + tr)) * s +
         static_cast<std::size_t>(bin.ds + sr);
}

SimilarityBlock phm_block(const ImageRecord& p, const ImageRecord& q, const HoughConfig& cfg,
                          std::uint32_t index_p, std::uint32_t index_q) {
  cfg.validate();
  const std::size_t rp = p.proposals.size();
  const std::size_t rq = q.proposals.size();
  const auto a = appearance_matrix(p.proposals, q.proposals);
  const ImageFrame fp{p.width, p.height};
  const ImageFrame fq{q.width, q.height};

  std::vector<std::size_t> bins(rp * rq);
  std::vector<double> votes(cfg.bin_count(), 0.0);
  for (std::size_t k = 0; k < rp; ++k) {
    for (std::size_t l = 0; l < rq; ++l) {
      const std::size_t idx = k * rq + l;
      if (a[idx] == 0.0) continue;
      bins[idx] = flat_bin(transformation_bin(p.proposals[k].box, fp, q.proposals[l].box, fq, cfg), cfg);
      votes[bins[idx]] += a[idx];
    }
  }

  SimilarityBlock block{index_p, index_q, static_cast<std::uint32_t>(rp),
                        static_cast<std::uint32_t>(rq), {}};
  for (std::size_t k = 0; k < rp; ++k) {
    for (std::size_t l = 0; l < rq; ++l) {
      const std::size_t idx = k * rq + l;
      if (a[idx] == 0.0) continue;
      const auto score = static_cast<float>(a[idx] * votes[bins[idx]]);
      if (score == 0.0f || score < cfg.score_threshold) continue;
      block.entries.push_back({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(l), score});
    }
  }
  return block;
}

}  // namespace lod
