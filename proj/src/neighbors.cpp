#include "lod/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lod/error.hpp"
#include "lod/parallel.hpp"

namespace lod {

NeighborList find_neighbors(std::span<const std::vector<float>> features, std::size_t k,
                            std::size_t workers) {
  const std::size_t n = features.size();
  const std::size_t dim = n > 0 ? features.front().size() : 0;
  for (const auto& f : features) {
    if (f.size() != dim) fail(ErrorKind::InvalidArgument, "image descriptors have unequal dimensions");
  }
  NeighborList list;
  list.k = k;
  list.neighbors.resize(n);
  const std::size_t keep = std::min(k, n > 0 ? n - 1 : 0);
  parallel_for(n, workers, [&](std::size_t p) {
    std::vector<std::pair<double, std::uint32_t>> dist;
    dist.reserve(n - 1);
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p) continue;
      double d2 = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        const double diff = static_cast<double>(features[p][t]) - features[q][t];
        d2 += diff * diff;
      }
      dist.emplace_back(d2, static_cast<std::uint32_t>(q));
    }
    // Pairs compare by distance then index, which is the tie rule.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(keep), dist.end());
    auto& out = list.neighbors[p];
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(dist[i].second);
  });
  return list;
}

NeighborList top_k_by_similarity(std::span<const double> similarity, std::size_t n, std::size_t k) {
  if (similarity.size() != n * n) fail(ErrorKind::InvalidArgument, "similarity matrix is not n x n");
  NeighborList list;
  list.k = k;
  list.neighbors.resize(n);
  const std::size_t keep = std::min(k, n > 0 ? n - 1 : 0);
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<std::uint32_t> order;
    order.reserve(n - 1);
    for (std::size_t q = 0; q < n; ++q)
      if (q != p) order.push_back(static_cast<std::uint32_t>(q));
    auto key = [&](std::uint32_t q) {
      const double s = similarity[p * n + q];
      return std::isnan(s) ? -INFINITY : s;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        const double sa = key(a), sb = key(b);
                        return sa != sb ? sa > sb : a < b;
                      });
    order.resize(keep);
    list.neighbors[p] = std::move(order);
  }
  return list;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> symmetric_pairs(const NeighborList& list) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::size_t p = 0; p < list.neighbors.size(); ++p) {
    for (std::uint32_t q : list.neighbors[p]) {
      if (q == p) continue;
      const auto a = static_cast<std::uint32_t>(std::min<std::size_t>(p, q));
      const auto b = static_cast<std::uint32_t>(std::max<std::size_t>(p, q));
      pairs.emplace_back(a, b);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

}  // namespace lod
