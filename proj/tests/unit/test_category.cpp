#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lod/category.hpp"
#include "lod/error.hpp"
#include "lod/random.hpp"
#include "oracles.hpp"

using namespace lod;
using lod::test::make_image;
using lod::test::make_proposal;

namespace {

DiscoveryResult pick_all(const std::vector<ImageRecord>& recs) {
  DiscoveryResult r;
  for (const auto& rec : recs) {
    ImageDetections d{rec.image_id, {}};
    for (std::uint32_t i = 0; i < rec.proposals.size(); ++i) d.selections.push_back({i, 1.0, rec.proposals[i].box, 0});
    r.images.push_back(d);
  }
  return r;
}

// Position of `item` in the preference list induced by descending scores, ties to lower index.
std::vector<std::size_t> positions(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> pos(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  return pos;
}

bool is_stable(const std::vector<std::vector<double>>& h, const ClusterMatching& m) {
  const std::size_t nk = h.size(), nc = h[0].size();
  std::vector<std::vector<std::size_t>> cluster_pos(nk), class_pos(nc);
  for (std::size_t i = 0; i < nk; ++i) cluster_pos[i] = positions(h[i]);
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<double> col(nk);
    for (std::size_t i = 0; i < nk; ++i) col[i] = h[i][c];
    class_pos[c] = positions(col);
  }
  for (std::size_t i = 0; i < nk; ++i)
    for (std::size_t c = 0; c < nc; ++c) {
      if (m.class_of_cluster[i] == int(c)) continue;
      const bool cluster_wants = m.class_of_cluster[i] < 0 || cluster_pos[i][c] < cluster_pos[i][std::size_t(m.class_of_cluster[i])];
      const bool class_wants = m.cluster_of_class[c] < 0 || class_pos[c][i] < class_pos[c][std::size_t(m.cluster_of_class[c])];
      if (cluster_wants && class_wants) return false;
    }
  return true;
}

bool consistent(const ClusterMatching& m) {
  for (std::size_t i = 0; i < m.class_of_cluster.size(); ++i) {
    const int c = m.class_of_cluster[i];
    if (c >= 0 && m.cluster_of_class[std::size_t(c)] != int(i)) return false;
  }
  for (std::size_t c = 0; c < m.cluster_of_class.size(); ++c) {
    const int i = m.cluster_of_class[c];
    if (i >= 0 && m.class_of_cluster[std::size_t(i)] != int(c)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("image similarity examples") {
  const std::vector<ImageRecord> recs = {
      make_image("a", 10, 10, {make_proposal({0, 0, 1, 1}, {1, 0}), make_proposal({0, 0, 2, 2}, {0, 3})}),
      make_image("b", 10, 10, {make_proposal({0, 0, 1, 1}, {0, 2})}),
      make_image("c", 10, 10, {make_proposal({0, 0, 1, 1}, {-1, 0})}),
      make_image("d", 10, 10, {make_proposal({0, 0, 1, 1}, {1, 0})})};
  auto det = pick_all(recs);
  det.images[3].selections.clear();
  const auto sim = image_similarity(det, recs, 2);
  CHECK(sim.at(0, 1) == doctest::Approx(1.0));   // best pair wins
  CHECK(sim.at(0, 2) == doctest::Approx(0.0));   // max(-1, 0)
  CHECK(sim.at(1, 2) == doctest::Approx(0.0));
  CHECK(sim.at(1, 0) == sim.at(0, 1));
  CHECK(std::isnan(sim.at(0, 3)));
  CHECK(sim.undefined == std::vector<std::uint32_t>{3});
  const auto nl = retrieve_neighbors(sim, 1);
  CHECK(nl.neighbors[0] == std::vector<std::uint32_t>{1});
  CHECK(nl.neighbors[2] == std::vector<std::uint32_t>{0});  // tie between 0 and 1 goes low

  auto bad = det;
  bad.images[1].selections[0].proposal = 5;
  CHECK_THROWS_AS(image_similarity(bad, recs), Error);
}

TEST_CASE("representative features are normalized top selections") {
  const std::vector<ImageRecord> recs = {make_image("a", 10, 10, {make_proposal({0, 0, 1, 1}, {3, 4})}),
                                         make_image("b", 10, 10, {make_proposal({0, 0, 1, 1}, {1, 1})})};
  auto det = pick_all(recs);
  det.images[1].selections.clear();
  const auto f = representative_features(det, recs);
  CHECK(f[0] == std::vector<double>{0.6, 0.8});
  CHECK(f[1] == std::vector<double>{0.0, 0.0});
  CHECK(l2_normalized(std::vector<float>{0, 0}) == std::vector<double>{0, 0});
}

TEST_CASE("kmeans") {
  SUBCASE("three separated blobs are recovered") {
    Rng rng(2);
    std::vector<std::vector<double>> pts;
    std::vector<std::uint32_t> truth;
    const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
    for (std::uint32_t c = 0; c < 3; ++c)
      for (int i = 0; i < 30; ++i) {
        pts.push_back({centers[c][0] + 0.5 * rng.normal(), centers[c][1] + 0.5 * rng.normal()});
        truth.push_back(c);
      }
    const auto km = kmeans(pts, 3, 5);
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = 0; j < pts.size(); ++j) CHECK((km.assignment[i] == km.assignment[j]) == (truth[i] == truth[j]));
    std::vector<std::string> labels;
    for (auto t : truth) labels.push_back(std::to_string(t));
    CHECK(purity(km.assignment, labels) == 100.0);
  }
  SUBCASE("k = n puts every point alone") {
    const std::vector<std::vector<double>> pts = {{0}, {1}, {5}, {9}};
    const auto km = kmeans(pts, 4, 1);
    std::vector<std::uint32_t> a = km.assignment;
    std::sort(a.begin(), a.end());
    CHECK(a == std::vector<std::uint32_t>{0, 1, 2, 3});
    CHECK(km.objective.back() == 0.0);
  }
  SUBCASE("objective never increases and runs are deterministic") {
    Rng rng(8);
    std::vector<std::vector<double>> pts(200, std::vector<double>(5));
    for (auto& p : pts)
      for (auto& x : p) x = rng.normal();
    const auto km = kmeans(pts, 7, 3);
    for (std::size_t i = 1; i < km.objective.size(); ++i) CHECK(km.objective[i] <= km.objective[i - 1] * (1 + 1e-12));
    const auto again = kmeans(pts, 7, 3);
    CHECK(again.assignment == km.assignment);
    std::vector<bool> used(7, false);
    for (auto a : km.assignment) used[a] = true;
    CHECK(std::all_of(used.begin(), used.end(), [](bool b) { return b; }));
  }
  SUBCASE("errors") {
    const std::vector<std::vector<double>> pts = {{0}, {1}};
    CHECK_THROWS_AS(kmeans(pts, 3, 1), Error);
    CHECK_THROWS_AS(kmeans(pts, 0, 1), Error);
    const std::vector<std::vector<double>> ragged = {{0}, {1, 2}};
    CHECK_THROWS_AS(kmeans(ragged, 1, 1), Error);
  }
}

TEST_CASE("purity") {
  const std::vector<std::uint32_t> a = {0, 0, 0, 0, 0};
  const std::vector<std::string> l = {"x", "x", "x", "y", "y"};
  CHECK(purity(a, l) == 60.0);
  const std::vector<std::uint32_t> split = {0, 0, 0, 1, 1};
  CHECK(purity(split, l) == 100.0);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto d = test::micro_dataset(seed);
    CHECK(std::abs(purity(d.assignment, d.single_labels) - test::ref_purity(d.assignment, d.single_labels)) <= 1e-9);
  }
  CHECK_THROWS_AS(purity(std::vector<std::uint32_t>{0}, l), Error);
}

TEST_CASE("cluster histograms") {
  const std::vector<std::string> classes = {"a", "b"};
  const std::vector<std::uint32_t> a = {0, 0};
  const std::vector<std::vector<std::string>> labels = {{"a", "b"}, {"a"}};
  const auto h = cluster_histograms(a, 1, labels, classes);
  CHECK(h[0][0] == 0.75);
  CHECK(h[0][1] == 0.25);
  // Every non-empty cluster's row sums to one.
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto d = test::micro_dataset(seed);
    const std::size_t k = *std::max_element(d.assignment.begin(), d.assignment.end()) + 1;
    const auto hist = cluster_histograms(d.assignment, k, d.labels, std::vector<std::string>{"a", "b", "c"});
    for (std::size_t c = 0; c < k; ++c) {
      const double s = std::accumulate(hist[c].begin(), hist[c].end(), 0.0);
      const bool nonempty = std::find(d.assignment.begin(), d.assignment.end(), c) != d.assignment.end();
      CHECK(s == doctest::Approx(nonempty ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(cluster_histograms(a, 1, std::vector<std::vector<std::string>>{{"z"}, {"a"}}, classes), Error);
  CHECK(histograms_csv(h, classes) == "cluster,a,b\n0,0.75,0.25\n");
}

TEST_CASE("cluster matching") {
  SUBCASE("1x1") {
    const auto m = match_clusters({{0.4}});
    CHECK(m.class_of_cluster == std::vector<int>{0});
    CHECK(m.cluster_of_class == std::vector<int>{0});
  }
  SUBCASE("2x2 exhaustive over score orders") {
    // Enumerate every relative ordering of four distinct scores.
    std::vector<double> vals = {0.1, 0.2, 0.3, 0.4};
    do {
      const std::vector<std::vector<double>> h = {{vals[0], vals[1]}, {vals[2], vals[3]}};
      const auto m = match_clusters(h);
      CHECK(consistent(m));
      CHECK(m.class_of_cluster[0] >= 0);
      CHECK(m.class_of_cluster[1] >= 0);
      CHECK(is_stable(h, m));
    } while (std::next_permutation(vals.begin(), vals.end()));
  }
  SUBCASE("cluster-optimal on a known instance") {
    // Both clusters prefer class 0; class 0 prefers cluster 1.
    const auto m = match_clusters({{0.6, 0.4}, {0.9, 0.1}});
    CHECK(m.class_of_cluster == std::vector<int>{1, 0});
  }
  SUBCASE("no blocking pair on random rectangular instances") {
    Rng rng(12);
    for (int t = 0; t < 300; ++t) {
      const std::size_t nk = 1 + rng.below(8), nc = 1 + rng.below(8);
      std::vector<std::vector<double>> h(nk, std::vector<double>(nc));
      for (auto& row : h)
        for (auto& x : row) x = std::floor(rng.uniform(0, 4)) / 4;  // coarse values create ties
      const auto m = match_clusters(h);
      REQUIRE(consistent(m));
      CHECK(is_stable(h, m));
      const auto matched = std::count_if(m.class_of_cluster.begin(), m.class_of_cluster.end(), [](int c) { return c >= 0; });
      CHECK(std::size_t(matched) == std::min(nk, nc));
    }
  }
  CHECK_THROWS_AS(match_clusters({}), Error);
  CHECK_THROWS_AS(match_clusters({{0.1, 0.2}, {0.3}}), Error);
}
