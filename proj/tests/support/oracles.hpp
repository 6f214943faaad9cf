// Reference implementations and fixtures shared by the unit and acceptance tests.
// Everything here is written the slow, obvious way on purpose.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lod/block.hpp"
#include "lod/dataset.hpp"
#include "lod/graph.hpp"
#include "lod/neighbors.hpp"
#include "lod/phm.hpp"
#include "lod/random.hpp"
#include "lod/selection.hpp"

namespace lod::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "lod") {
    static std::atomic<int> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path_ = base / (tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Proposal make_proposal(BoundingBox box, std::vector<float> feature, std::uint16_t group = 0) {
  Proposal p;
  p.box = box;
  p.feature = std::move(feature);
  p.group_id = group;
  return p;
}

inline ImageRecord make_image(std::string id, double w, double h, std::vector<Proposal> proposals,
                              std::vector<float> descriptor = {0.0f}) {
  ImageRecord r;
  r.image_id = std::move(id);
  r.width = w;
  r.height = h;
  r.proposals = std::move(proposals);
  r.image_feature = std::move(descriptor);
  return r;
}

// ---------------------------------------------------------------------------------------------
// Linear algebra oracles

using Dense = Eigen::MatrixXd;

inline Dense to_eigen(const std::vector<double>& rowmajor, std::size_t n) {
  Dense m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rowmajor[i * n + j];
  return m;
}

struct Eigenpair {
  Eigen::VectorXd vector;  // unit L2, nonnegative orientation
  double value = 0.0;
};

/// Dominant eigenpair of a symmetric matrix via full dense decomposition.
inline Eigenpair dominant_eigenpair(const Dense& m) {
  Eigen::SelfAdjointEigenSolver<Dense> es(m);
  const Eigen::Index last = m.rows() - 1;
  Eigenpair out{es.eigenvectors().col(last), es.eigenvalues()(last)};
  if (out.vector.sum() < 0) out.vector = -out.vector;
  return out;
}

/// Direct solve of (I - (1 - beta) W D^{-1}) v = beta u with D the column sums of W.
inline Eigen::VectorXd pagerank_direct(const Dense& w, double beta, const Eigen::VectorXd& u) {
  const Eigen::VectorXd d = w.colwise().sum().transpose();
  Dense a = w;
  for (Eigen::Index j = 0; j < a.cols(); ++j) a.col(j) /= d(j);
  const Dense lhs = Dense::Identity(a.rows(), a.cols()) - (1.0 - beta) * a;
  return lhs.partialPivLu().solve(beta * u);
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------------------------
// Random graphs

struct RandomGraph {
  NodeIndex index;
  std::vector<SimilarityBlock> blocks;
  std::vector<double> areas;
};

/// Random per-image proposal counts in [1, max_props] and random sparse blocks on each
/// image pair with probability `pair_density`.
inline RandomGraph random_graph(std::uint64_t seed, std::size_t n_images, std::size_t max_props,
                                double pair_density, double entry_density = 0.5) {
  Rng rng(seed);
  RandomGraph g;
  std::vector<std::size_t> counts(n_images);
  for (auto& c : counts) c = 1 + rng.below(max_props);
  g.index = NodeIndex(counts);
  for (std::size_t n = 0; n < g.index.size(); ++n) g.areas.push_back(1.0 + rng.below(50));
  for (std::uint32_t p = 0; p < n_images; ++p) {
    for (std::uint32_t q = p + 1; q < n_images; ++q) {
      if (rng.uniform() >= pair_density) continue;
      SimilarityBlock b{p, q, static_cast<std::uint32_t>(counts[p]), static_cast<std::uint32_t>(counts[q]), {}};
      for (std::uint32_t k = 0; k < b.rows; ++k)
        for (std::uint32_t l = 0; l < b.cols; ++l)
          if (rng.uniform() < entry_density) b.entries.push_back({k, l, static_cast<float>(rng.uniform(0.01, 2.0))});
      g.blocks.push_back(std::move(b));
    }
  }
  return g;
}

/// Dense N x N W built entry by entry from the blocks, plus gamma / N everywhere.
inline std::vector<double> dense_from_blocks(const NodeIndex& index, const std::vector<SimilarityBlock>& blocks,
                                             double gamma) {
  const std::size_t n = index.size();
  std::vector<double> w(n * n, n > 0 ? gamma / static_cast<double>(n) : 0.0);
  for (const auto& b : blocks) {
    for (const auto& e : b.entries) {
      const std::size_t i = index.to_global(b.image_p, e.k);
      const std::size_t j = index.to_global(b.image_q, e.l);
      w[i * n + j] += e.score;
      w[j * n + i] += e.score;
    }
  }
  return w;
}

// ---------------------------------------------------------------------------------------------
// Hough matching oracle

/// S_kl = a_kl * sum_{k'l'} K(kl, k'l') a_k'l' evaluated literally, K = same-bin indicator.
inline std::vector<double> phm_kernel_sum(const ImageRecord& p, const ImageRecord& q, const HoughConfig& cfg) {
  const std::size_t rp = p.proposals.size(), rq = q.proposals.size();
  auto a = [&](std::size_t k, std::size_t l) {
    double dot = 0.0;
    for (std::size_t t = 0; t < p.proposals[k].feature.size(); ++t)
      dot += static_cast<double>(p.proposals[k].feature[t]) * q.proposals[l].feature[t];
    return std::max(dot, 0.0);
  };
  const ImageFrame fp{p.width, p.height}, fq{q.width, q.height};
  auto bin = [&](std::size_t k, std::size_t l) {
    return transformation_bin(p.proposals[k].box, fp, q.proposals[l].box, fq, cfg);
  };
  std::vector<double> s(rp * rq, 0.0);
  for (std::size_t k = 0; k < rp; ++k)
    for (std::size_t l = 0; l < rq; ++l) {
      double sum = 0.0;
      for (std::size_t k2 = 0; k2 < rp; ++k2)
        for (std::size_t l2 = 0; l2 < rq; ++l2)
          if (bin(k, l) == bin(k2, l2)) sum += a(k2, l2);
      s[k * rq + l] = a(k, l) * sum;
    }
  return s;
}

inline std::vector<double> densify(const SimilarityBlock& b) {
  std::vector<double> d(static_cast<std::size_t>(b.rows) * b.cols, 0.0);
  for (const auto& e : b.entries) d[static_cast<std::size_t>(e.k) * b.cols + e.l] = e.score;
  return d;
}

// ---------------------------------------------------------------------------------------------
// Metric oracles: plain loops, no shared helpers with the library.

inline double ref_iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
  return inter / uni;
}

using Boxes = std::vector<std::vector<BoundingBox>>;

// Number of matched predictions among the first m of one image.
inline std::size_t ref_matches(const std::vector<Selection>& preds, const std::vector<BoundingBox>& gt,
                               double sigma, std::size_t m) {
  std::set<std::size_t> taken;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size() && i < m; ++i) {
    std::vector<std::pair<double, std::size_t>> options;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (taken.count(j)) continue;
      const double v = ref_iou(preds[i].box, gt[j]);
      if (v >= sigma) options.push_back({-v, j});
    }
    if (options.empty()) continue;
    std::sort(options.begin(), options.end());
    taken.insert(options.front().second);
    ++hits;
  }
  return hits;
}

inline double ref_corloc(const DiscoveryResult& r, const Boxes& gt, double sigma) {
  double num = 0, den = 0;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt[p].empty()) continue;
    den += 1;
    bool ok = false;
    if (!r.images[p].selections.empty())
      for (const auto& g : gt[p]) ok = ok || ref_iou(r.images[p].selections[0].box, g) >= sigma;
    if (ok) num += 1;
  }
  return 100.0 * num / den;
}

inline std::pair<double, double> ref_pr(const DiscoveryResult& r, const Boxes& gt, double sigma, std::size_t m) {
  double preds = 0, hits = 0, total = 0;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    total += static_cast<double>(gt[p].size());
    preds += static_cast<double>(std::min(m, r.images[p].selections.size()));
    hits += static_cast<double>(ref_matches(r.images[p].selections, gt[p], sigma, m));
  }
  return {preds > 0 ? hits / preds : 0.0, total > 0 ? hits / total : 0.0};
}

inline double ref_ap(const DiscoveryResult& r, const Boxes& gt, double sigma, std::size_t max_m) {
  std::vector<double> prec{0.0}, rec{0.0};
  for (std::size_t m = 1; m <= max_m; ++m) {
    auto [p, c] = ref_pr(r, gt, sigma, m);
    prec.push_back(p);
    rec.push_back(c);
  }
  prec[0] = prec[1];  // the curve starts at recall 0 with the first precision
  double area = 0.0;
  for (std::size_t i = 1; i < prec.size(); ++i) area += (rec[i] - rec[i - 1]) * (prec[i] + prec[i - 1]) / 2.0;
  return area;
}

inline double ref_ap_range(const DiscoveryResult& r, const Boxes& gt, std::size_t max_m) {
  double s = 0.0;
  for (int i = 0; i < 10; ++i) s += ref_ap(r, gt, 0.5 + 0.05 * i, max_m);
  return s / 10.0;
}

inline double ref_det_rate(const DiscoveryResult& r, const Boxes& gt, std::size_t m, double sigma) {
  return 100.0 * ref_pr(r, gt, sigma, m).second;
}

inline double ref_corret(const NeighborList& nl, const std::vector<std::vector<std::string>>& labels, std::size_t k) {
  double total = 0.0;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    double hits = 0;
    for (std::size_t i = 0; i < nl.neighbors[p].size() && i < k; ++i) {
      const auto q = nl.neighbors[p][i];
      bool share = false;
      for (const auto& a : labels[p])
        for (const auto& b : labels[q]) share = share || a == b;
      if (share && q != p) hits += 1;
    }
    total += hits / static_cast<double>(k);
  }
  return 100.0 * total / static_cast<double>(labels.size());
}

inline double ref_purity(const std::vector<std::uint32_t>& assignment, const std::vector<std::string>& labels) {
  std::set<std::uint32_t> clusters(assignment.begin(), assignment.end());
  std::set<std::string> classes(labels.begin(), labels.end());
  double dominant = 0;
  for (auto c : clusters) {
    double best = 0;
    for (const auto& cls : classes) {
      double cnt = 0;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (assignment[i] == c && labels[i] == cls) cnt += 1;
      best = std::max(best, cnt);
    }
    dominant += best;
  }
  return 100.0 * dominant / static_cast<double>(labels.size());
}

/// Random micro-dataset for metric checks: boxes on a small grid so IoU ties and the exact
/// 0.5 boundary show up often.
struct MicroDataset {
  DiscoveryResult result;
  Boxes gt;
  std::vector<std::vector<std::string>> labels;
  NeighborList neighbors;
  std::vector<std::uint32_t> assignment;
  std::vector<std::string> single_labels;
};

inline BoundingBox grid_box(Rng& rng) {
  const double x = static_cast<double>(rng.below(6)), y = static_cast<double>(rng.below(6));
  const double w = 1.0 + static_cast<double>(rng.below(4)), h = 1.0 + static_cast<double>(rng.below(4));
  return {x, y, x + w, y + h};
}

inline MicroDataset micro_dataset(std::uint64_t seed) {
  Rng rng(seed);
  MicroDataset d;
  const std::size_t n = 2 + rng.below(19);
  d.result.params.max_regions = 1 + rng.below(4);
  const char* names[] = {"a", "b", "c"};
  for (std::size_t p = 0; p < n; ++p) {
    ImageDetections det;
    det.image_id = "img" + std::to_string(p);
    const std::size_t n_pred = rng.below(d.result.params.max_regions + 1);
    double score = 1.0;
    for (std::size_t i = 0; i < n_pred; ++i) {
      score -= rng.uniform(0.0, 0.1);
      det.selections.push_back({static_cast<std::uint32_t>(i), score, grid_box(rng), 0});
    }
    d.result.images.push_back(det);
    auto& g = d.gt.emplace_back();
    const std::size_t n_gt = (p == 0) ? 1 + rng.below(3) : rng.below(4);
    for (std::size_t j = 0; j < n_gt; ++j) {
      // Half of the GT boxes copy or nudge a prediction so matches are common.
      if (!det.selections.empty() && rng.uniform() < 0.5) {
        BoundingBox b = det.selections[rng.below(det.selections.size())].box;
        if (rng.uniform() < 0.5) b.x_max += 1.0;
        g.push_back(b);
      } else {
        g.push_back(grid_box(rng));
      }
    }
    auto& l = d.labels.emplace_back();
    const std::size_t n_lab = 1 + rng.below(2);
    for (std::size_t j = 0; j < n_lab; ++j) l.push_back(names[rng.below(3)]);
    d.single_labels.push_back(l.front());
  }
  d.neighbors.k = std::min<std::size_t>(3, n - 1);
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<std::uint32_t> others;
    for (std::uint32_t q = 0; q < n; ++q)
      if (q != p) others.push_back(q);
    for (std::size_t i = others.size(); i > 1; --i) std::swap(others[i - 1], others[rng.below(i)]);
    others.resize(d.neighbors.k);
    d.neighbors.neighbors.push_back(others);
  }
  const std::size_t k = 1 + rng.below(std::min<std::size_t>(4, n));
  for (std::size_t p = 0; p < n; ++p) d.assignment.push_back(static_cast<std::uint32_t>(rng.below(k)));
  return d;
}

}  // namespace lod::test
