#include "lod/category.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "lod/error.hpp"
#include "lod/parallel.hpp"
#include "lod/random.hpp"

namespace lod {

std::vector<double> l2_normalized(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  const double n = std::sqrt(s);
  std::vector<double> out(v.size(), 0.0);
  if (n > 0.0)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

ImageSimilarityMatrix image_similarity(const DiscoveryResult& results, std::span<const ImageRecord> records,
                                       std::size_t workers) {
  if (results.images.size() != records.size()) fail(ErrorKind::InvalidArgument, "detections do not match records");
  const std::size_t n = records.size();
  std::vector<std::vector<std::vector<double>>> feats(n);
  ImageSimilarityMatrix sim;
  sim.n = n;
  for (std::size_t p = 0; p < n; ++p) {
    for (const auto& s : results.images[p].selections) {
      if (s.proposal >= records[p].proposals.size()) {
        fail(ErrorKind::InvalidArgument, records[p].image_id + ": selection refers to a missing proposal");
      }
      feats[p].push_back(l2_normalized(records[p].proposals[s.proposal].feature));
    }
    if (feats[p].empty()) sim.undefined.push_back(static_cast<std::uint32_t>(p));
  }
  sim.values.assign(n * n, std::numeric_limits<double>::quiet_NaN());
  parallel_for(n, workers, [&](std::size_t p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      if (feats[p].empty() || feats[q].empty()) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& a : feats[p])
        for (const auto& b : feats[q]) best = std::max(best, std::inner_product(a.begin(), a.end(), b.begin(), 0.0));
      sim.values[p * n + q] = best;
      sim.values[q * n + p] = best;
    }
  });
  return sim;
}

NeighborList retrieve_neighbors(const ImageSimilarityMatrix& sim, std::size_t k) {
  return top_k_by_similarity(sim.values, sim.n, k);
}

std::vector<std::vector<double>> representative_features(const DiscoveryResult& results,
                                                         std::span<const ImageRecord> records) {
  std::vector<std::vector<double>> out;
  for (std::size_t p = 0; p < records.size(); ++p) {
    const auto& sel = results.images.at(p).selections;
    if (sel.empty()) {
      const std::size_t d = records[p].proposals.empty() ? 0 : records[p].proposals.front().feature.size();
      out.emplace_back(d, 0.0);
    } else {
      out.push_back(l2_normalized(records[p].proposals.at(sel.front().proposal).feature));
    }
  }
  return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

Clustering kmeans(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed,
                  std::size_t iterations) {
  const std::size_t n = points.size();
  if (k == 0) fail(ErrorKind::InvalidArgument, "kmeans needs k >= 1");
  if (k > n) fail(ErrorKind::InvalidArgument, "kmeans: k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) fail(ErrorKind::InvalidArgument, "kmeans: points have unequal dimensions");

  Rng rng(seed);
  Clustering c;
  c.k = k;
  std::vector<bool> chosen(n, false);
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  c.centroids.push_back(points[first]);
  chosen[first] = true;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points[i], c.centroids[0]);
  while (c.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!chosen[i]) total += d2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] == 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    } else {
      // All remaining points coincide with a center; take them in index order.
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (!chosen[i]) pick = i;
    }
    chosen[pick] = true;
    c.centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points[i], c.centroids.back()));
  }

  c.assignment.assign(n, 0);
  std::vector<double> dist(n, 0.0);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(iterations, 1); ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t best = 0;
      double best_d = sq_dist(points[i], c.centroids[0]);
      for (std::uint32_t j = 1; j < k; ++j) {
        const double d = sq_dist(points[i], c.centroids[j]);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (best != c.assignment[i]) changed = true;
      c.assignment[i] = best;
      dist[i] = best_d;
    }
    if (!changed) break;

    std::vector<std::size_t> counts(k, 0);
    for (auto a : c.assignment) ++counts[a];
    for (std::uint32_t j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[c.assignment[i]] <= 1) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) continue;
      --counts[c.assignment[far]];
      c.assignment[far] = j;
      counts[j] = 1;
      dist[far] = 0.0;
    }
    for (std::uint32_t j = 0; j < k; ++j) std::fill(c.centroids[j].begin(), c.centroids[j].end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& cen = c.centroids[c.assignment[i]];
      for (std::size_t t = 0; t < dim; ++t) cen[t] += points[i][t];
    }
    for (std::uint32_t j = 0; j < k; ++j)
      if (counts[j] > 0)
        for (auto& v : c.centroids[j]) v /= static_cast<double>(counts[j]);
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += sq_dist(points[i], c.centroids[c.assignment[i]]);
    c.objective.push_back(obj);
  }
  return c;
}

double purity(std::span<const std::uint32_t> assignment, std::span<const std::string> labels) {
  if (assignment.size() != labels.size()) fail(ErrorKind::InvalidArgument, "purity: label count mismatch");
  if (assignment.empty()) fail(ErrorKind::InvalidArgument, "purity of an empty clustering");
  std::map<std::uint32_t, std::map<std::string, std::size_t>> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) fail(ErrorKind::InvalidArgument, "purity: image " + std::to_string(i) + " is unlabeled");
    ++counts[assignment[i]][labels[i]];
  }
  std::size_t dominant = 0;
  for (const auto& [cluster, by_class] : counts) {
    std::size_t best = 0;
    for (const auto& [label, cnt] : by_class) best = std::max(best, cnt);
    dominant += best;
  }
  return 100.0 * static_cast<double>(dominant) / static_cast<double>(labels.size());
}

std::vector<std::vector<double>> cluster_histograms(std::span<const std::uint32_t> assignment, std::size_t k,
                                                    std::span<const std::vector<std::string>> labels,
                                                    std::span<const std::string> classes) {
  if (assignment.size() != labels.size()) fail(ErrorKind::InvalidArgument, "histograms: label count mismatch");
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < classes.size(); ++i) column[classes[i]] = i;
  std::vector<std::size_t> size(k, 0);
  for (auto a : assignment) {
    if (a >= k) fail(ErrorKind::InvalidArgument, "histograms: cluster id out of range");
    ++size[a];
  }
  std::vector<std::vector<double>> hist(k, std::vector<double>(classes.size(), 0.0));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    // Each class counts once per image even if it appears several times.
    std::vector<std::string> uniq(labels[i].begin(), labels[i].end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (uniq.empty()) continue;
    const double share = 1.0 / (static_cast<double>(size[assignment[i]]) * static_cast<double>(uniq.size()));
    for (const auto& l : uniq) {
      auto it = column.find(l);
      if (it == column.end()) fail(ErrorKind::InvalidArgument, "histograms: unknown class '" + l + "'");
      hist[assignment[i]][it->second] += share;
    }
  }
  return hist;
}

ClusterMatching match_clusters(const std::vector<std::vector<double>>& h) {
  const std::size_t nk = h.size();
  const std::size_t nc = nk > 0 ? h.front().size() : 0;
  if (nk == 0 || nc == 0) fail(ErrorKind::InvalidArgument, "cannot match an empty histogram");
  for (const auto& row : h)
    if (row.size() != nc) fail(ErrorKind::InvalidArgument, "histogram rows have unequal length");

  std::vector<std::vector<std::size_t>> prefs(nk);
  for (std::size_t i = 0; i < nk; ++i) {
    prefs[i].resize(nc);
    std::iota(prefs[i].begin(), prefs[i].end(), 0);
    std::stable_sort(prefs[i].begin(), prefs[i].end(), [&](std::size_t a, std::size_t b) { return h[i][a] > h[i][b]; });
  }
  // rank[c][i]: position of cluster i in class c's preference order.
  std::vector<std::vector<std::size_t>> rank(nc, std::vector<std::size_t>(nk));
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<std::size_t> order(nk);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h[a][c] > h[b][c]; });
    for (std::size_t pos = 0; pos < nk; ++pos) rank[c][order[pos]] = pos;
  }

  ClusterMatching m;
  m.class_of_cluster.assign(nk, -1);
  m.cluster_of_class.assign(nc, -1);
  std::vector<std::size_t> next(nk, 0);
  std::vector<std::size_t> free;
  for (std::size_t i = nk; i-- > 0;) free.push_back(i);
  while (!free.empty()) {
    const std::size_t i = free.back();
    if (next[i] >= nc) {
      free.pop_back();
      continue;
    }
    const std::size_t c = prefs[i][next[i]++];
    const int holder = m.cluster_of_class[c];
    if (holder < 0) {
      m.cluster_of_class[c] = static_cast<int>(i);
      m.class_of_cluster[i] = static_cast<int>(c);
      free.pop_back();
    } else if (rank[c][i] < rank[c][static_cast<std::size_t>(holder)]) {
      m.cluster_of_class[c] = static_cast<int>(i);
      m.class_of_cluster[i] = static_cast<int>(c);
      m.class_of_cluster[static_cast<std::size_t>(holder)] = -1;
      free.back() = static_cast<std::size_t>(holder);
    }
  }
  return m;
}

std::string histograms_csv(const std::vector<std::vector<double>>& h, std::span<const std::string> classes) {
  std::ostringstream os;
  os.precision(10);
  os << "cluster";
  for (const auto& c : classes) os << ',' << c;
  os << "\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    os << i;
    for (double v : h[i]) os << ',' << v;
    os << "\n";
  }
  return os.str();
}

}  // namespace lod
