#include <doctest.h>

#include <cmath>

#include "json.hpp"
#include "lod/error.hpp"
#include "lod/eval.hpp"
#include "oracles.hpp"

using namespace lod;

namespace {

Selection pred(BoundingBox b, double score = 1.0) { return {0, score, b, 0}; }

DiscoveryResult result_of(std::vector<std::vector<Selection>> per_image, std::size_t m) {
  DiscoveryResult r;
  r.params.max_regions = m;
  for (std::size_t p = 0; p < per_image.size(); ++p) r.images.push_back({"img" + std::to_string(p), per_image[p]});
  return r;
}

}  // namespace

TEST_CASE("corloc examples") {
  const auto r = result_of({{pred({0, 0, 10, 10})}, {pred({0, 0, 10, 10})}}, 1);
  const GroundTruthBoxes gt = {{{0, 0, 10, 10}}, {{50, 50, 60, 60}}};
  CHECK(corloc(r, gt) == 50.0);

  SUBCASE("IoU of exactly one half counts as correct") {
    const auto half = result_of({{pred({0, 0, 2, 1})}}, 1);
    const GroundTruthBoxes g = {{{0, 0, 1, 1}}};
    REQUIRE(iou({0, 0, 2, 1}, {0, 0, 1, 1}) == 0.5);
    CHECK(corloc(half, g, 0.5) == 100.0);
    CHECK(det_rate(half, g, 1, 0.5) == 100.0);
    CHECK(average_precision(half, g, 0.5, 1) == 1.0);
  }
  SUBCASE("images without ground truth are skipped") {
    const GroundTruthBoxes g = {{{0, 0, 10, 10}}, {}};
    CHECK(corloc(r, g) == 100.0);
    const GroundTruthBoxes none = {{}, {}};
    CHECK_THROWS_AS(corloc(r, none), Error);
  }
  SUBCASE("any ground-truth box may match the top prediction") {
    const GroundTruthBoxes g = {{{40, 40, 50, 50}, {0, 0, 10, 10}}, {{0, 0, 10, 9}}};
    CHECK(corloc(r, g) == 100.0);
  }
  CHECK_THROWS_AS(corloc(r, GroundTruthBoxes{{}}), Error);
}

TEST_CASE("pr curve and average precision examples") {
  // Two GT objects; the top prediction hits one, the second misses.
  const auto r = result_of({{pred({0, 0, 10, 10}), pred({80, 80, 90, 90}, 0.5)}}, 2);
  const GroundTruthBoxes gt = {{{0, 0, 10, 10}, {40, 40, 50, 50}}};
  const auto curve = pr_curve(r, gt, 0.5, 2);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].precision == 1.0);
  CHECK(curve[0].recall == 0.5);
  CHECK(curve[1].precision == 0.5);
  CHECK(curve[1].recall == 0.5);
  CHECK(average_precision(r, gt, 0.5, 2) == 0.5);
  CHECK(det_rate(r, gt, 2) == 50.0);

  SUBCASE("one-to-one: two predictions on the same object count once") {
    const auto dup = result_of({{pred({0, 0, 10, 10}), pred({0, 0, 10, 10}, 0.5)}}, 2);
    const auto c = pr_curve(dup, {{{0, 0, 10, 10}}}, 0.5, 2);
    CHECK(c[1].matched == 1);
    CHECK(c[1].precision == 0.5);
  }
  SUBCASE("a prediction takes the highest-IoU unclaimed box") {
    // The first prediction prefers g1 (IoU 0.9 over 0.6), which leaves g0 for the second.
    const auto two = result_of({{pred({4, 0, 14, 10}), pred({0, 0, 10, 10}, 0.5)}}, 2);
    const GroundTruthBoxes g = {{{4, 0, 10, 10}, {4, 0, 13, 10}}};
    CHECK(pr_curve(two, g, 0.5, 2)[1].matched == 2);
  }
  SUBCASE("ap over the threshold range") {
    // IoU 0.62 survives sigma = 0.50, 0.55 and 0.60 only.
    const auto one = result_of({{pred({0, 0, 1, 1})}}, 1);
    const GroundTruthBoxes g = {{{0, 0, 1, 0.62}}};
    CHECK(ap_range(one, g, 1) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(ap_thresholds().size() == 10);
    CHECK(ap_thresholds().back() == 0.95);
  }
  CHECK_THROWS_AS(average_precision(r, gt, 0.5, 0), Error);
  CHECK_THROWS_AS(pr_curve(r, GroundTruthBoxes{}, 0.5, 1), Error);
}

TEST_CASE("corret examples") {
  const std::vector<std::vector<std::string>> labels = {{"a"}, {"a"}, {"b"}};
  const NeighborList nl{1, {{1}, {0}, {0}}};
  CHECK(corret(nl, labels, 1) == doctest::Approx(200.0 / 3.0));
  // Shorter lists are charged against k.
  CHECK(corret(nl, labels, 2) == doctest::Approx(100.0 / 3.0));
  const std::vector<std::vector<std::string>> multi = {{"a", "b"}, {"c"}, {"b"}};
  CHECK(corret(nl, multi, 1) == doctest::Approx(100.0 / 3.0));
  CHECK_THROWS_AS(corret(nl, labels, 0), Error);
}

TEST_CASE("metrics agree with the reference loops on random micro-datasets") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto d = test::micro_dataset(seed);
    const std::size_t m = d.result.params.max_regions;
    for (double sigma : {0.3, 0.5, 0.7}) {
      CHECK(std::abs(corloc(d.result, d.gt, sigma) - test::ref_corloc(d.result, d.gt, sigma)) <= 1e-9);
      CHECK(std::abs(average_precision(d.result, d.gt, sigma, m) - test::ref_ap(d.result, d.gt, sigma, m)) <= 1e-9);
      for (std::size_t k = 1; k <= m; ++k) {
        const auto c = pr_curve(d.result, d.gt, sigma, m)[k - 1];
        const auto [p, r] = test::ref_pr(d.result, d.gt, sigma, k);
        CHECK(std::abs(c.precision - p) <= 1e-12);
        CHECK(std::abs(c.recall - r) <= 1e-12);
        CHECK(std::abs(det_rate(d.result, d.gt, k, sigma) - test::ref_det_rate(d.result, d.gt, k, sigma)) <= 1e-9);
      }
    }
    CHECK(std::abs(ap_range(d.result, d.gt, m) - test::ref_ap_range(d.result, d.gt, m)) <= 1e-9);
    for (std::size_t k = 1; k <= 4; ++k)
      CHECK(std::abs(corret(d.neighbors, d.labels, k) - test::ref_corret(d.neighbors, d.labels, k)) <= 1e-9);
  }
}

TEST_CASE("corloc equals precision at one when every image has a prediction and ground truth") {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto d = test::micro_dataset(seed);
    DiscoveryResult r;
    GroundTruthBoxes gt;
    for (std::size_t p = 0; p < d.gt.size(); ++p) {
      if (d.gt[p].empty() || d.result.images[p].selections.empty()) continue;
      r.images.push_back(d.result.images[p]);
      gt.push_back(d.gt[p]);
    }
    if (gt.empty()) continue;
    ++checked;
    CHECK(corloc(r, gt, 0.5) == doctest::Approx(100.0 * pr_curve(r, gt, 0.5, 1)[0].precision).epsilon(1e-12));
  }
  CHECK(checked >= 100);
}

TEST_CASE("evaluate bundles every metric") {
  const auto d = test::micro_dataset(3);
  EvalSettings s;
  s.detrate_m = {1, 2};
  const auto rep = evaluate(d.result, d.gt, s);
  CHECK(rep.n_images == d.gt.size());
  CHECK(rep.corloc == corloc(d.result, d.gt, 0.5));
  CHECK(rep.ap.size() == 10);
  CHECK(rep.ap50 == average_precision(d.result, d.gt, 0.5, d.result.params.max_regions));
  CHECK(rep.ap_range == doctest::Approx(ap_range(d.result, d.gt, d.result.params.max_regions)).epsilon(1e-15));
  CHECK(rep.detrate == std::vector<double>{det_rate(d.result, d.gt, 1), det_rate(d.result, d.gt, 2)});
  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j.contains("corloc_percent"));
  CHECK(!pr_curve_csv(rep.pr50).empty());
}
