#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lod/dataset.hpp"
#include "lod/graph.hpp"
#include "lod/rank_vector.hpp"

namespace lod {

struct RankingConfig {
  double beta = 1e-4;    // PageRank damping
  double gamma = 1e-4;   // rank-one perturbation added to W
  double alpha = 0.10;   // fraction of per-image candidates kept for personalization
  int iterations = 50;   // T
  /// Stop early once the L-infinity change between iterates is at most this.
  std::optional<double> tolerance;
  std::size_t workers = 1;

  void validate() const;
};

/// Uniform 1/K on K support nodes, at most one per image.
struct PersonalizationVector {
  std::vector<double> u;
  std::vector<std::uint32_t> support;  // ascending node indices
};

/// Dominant eigenvector of W + gamma/N e e^T by L2-normalized power iteration from e/sqrt(N).
/// Also reports the Rayleigh quotient in RankVector::eigenvalue.
RankVector solve_quadratic(const BlockAdjacency& graph, const RankingConfig& cfg);

/// Iterates v <- (1 - beta) A v + beta (e^T v) u with A = W D^{-1}, L1-normalizing each step.
RankVector solve_pagerank(const BlockAdjacency& graph, std::span<const double> u,
                          std::span<const double> v0, const RankingConfig& cfg);

/// PageRank with u = v0 = e / N.
RankVector solve_pagerank(const BlockAdjacency& graph, const RankingConfig& cfg);

/// Per image the best node under `scores` (ties: larger box, then lower index) becomes a
/// candidate; the K = max(1, floor(alpha * n)) best candidates form the support.
PersonalizationVector build_personalization(const RankVector& scores, const NodeIndex& index,
                                            std::span<const double> node_areas, double alpha);

struct LodSolution {
  RankVector quadratic;
  PersonalizationVector personalization;
  RankVector ranking;
};

/// Quadratic ranking, then PageRank personalized (and initialized) on its top candidates.
LodSolution solve_lod(const BlockAdjacency& graph, std::span<const double> node_areas,
                      const RankingConfig& cfg);

/// Dispatches on `solver`; for Lod returns the final PageRank vector.
RankVector solve(Solver solver, const BlockAdjacency& graph, std::span<const double> node_areas,
                 const RankingConfig& cfg);

}  // namespace lod
