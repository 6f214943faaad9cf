#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lod/dataset.hpp"
#include "lod/neighbors.hpp"
#include "lod/selection.hpp"

namespace lod {

/// Dense symmetric n x n image similarity. Rows of images without selections are NaN.
struct ImageSimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> values;           // row-major
  std::vector<std::uint32_t> undefined; // images with an empty selection

  double at(std::size_t p, std::size_t q) const { return values[p * n + q]; }
};

/// sim(p, q) = max cosine similarity over pairs of selected proposals of p and q.
ImageSimilarityMatrix image_similarity(const DiscoveryResult& results, std::span<const ImageRecord> records,
                                       std::size_t workers = 1);

/// Top-k most similar images per image, ties to the lower index.
NeighborList retrieve_neighbors(const ImageSimilarityMatrix& sim, std::size_t k = 10);

struct Clustering {
  std::size_t k = 0;
  std::vector<std::uint32_t> assignment;
  std::vector<std::vector<double>> centroids;
  std::vector<double> objective;  // sum of squared distances after each Lloyd iteration
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded with the point
/// farthest from its centroid. Deterministic for a given seed.
Clustering kmeans(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed,
                  std::size_t iterations = 100);

std::vector<double> l2_normalized(std::span<const float> v);

/// Feature of each image's top selection, L2-normalized. Images with no selection get zeros.
std::vector<std::vector<double>> representative_features(const DiscoveryResult& results,
                                                         std::span<const ImageRecord> records);

/// Share of images belonging to their cluster's dominant class, in percent.
double purity(std::span<const std::uint32_t> assignment, std::span<const std::string> labels);

/// cluster x class scores: each member image adds 1 / (n c) to each of its c classes, where
/// n is the cluster size.
std::vector<std::vector<double>> cluster_histograms(std::span<const std::uint32_t> assignment, std::size_t k,
                                                    std::span<const std::vector<std::string>> labels,
                                                    std::span<const std::string> classes);

struct ClusterMatching {
  std::vector<int> class_of_cluster;  // -1 when unmatched
  std::vector<int> cluster_of_class;  // -1 when unmatched
};

/// Cluster-proposing Gale-Shapley on preferences induced by the histogram scores
/// (ties to the lower index on both sides).
ClusterMatching match_clusters(const std::vector<std::vector<double>>& histograms);

/// Histogram rows as CSV, one row per cluster, one column per class.
std::string histograms_csv(const std::vector<std::vector<double>>& histograms, std::span<const std::string> classes);

}  // namespace lod
