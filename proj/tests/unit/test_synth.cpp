#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "lod/error.hpp"
#include "lod/storage.hpp"
#include "lod/synth.hpp"
#include "oracles.hpp"

using namespace lod;

namespace {

SynthConfig small() {
  SynthConfig c;
  c.n_images = 30;
  c.proposals_per_image = 12;
  c.feature_dim = 16;
  return c;
}

double dot(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
  return s;
}

std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = test::slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("generation is byte-identical for a fixed seed") {
  test::TempDir a, b;
  write_synthetic(a.path(), generate_synthetic(small()));
  write_synthetic(b.path(), generate_synthetic(small()));
  const auto ta = tree_contents(a.path()), tb = tree_contents(b.path());
  CHECK(ta.size() == 30 + 2);  // features, manifest, sidecar
  CHECK(ta == tb);

  auto other = small();
  other.seed = 8;
  test::TempDir c;
  write_synthetic(c.path(), generate_synthetic(other));
  CHECK(tree_contents(c.path()) != ta);
}

TEST_CASE("generated datasets validate and carry consistent planted truth") {
  for (std::size_t planted : {1, 2, 3}) {
    auto cfg = small();
    cfg.planted_per_image = planted;
    const auto data = generate_synthetic(cfg);
    test::TempDir dir;
    write_synthetic(dir.path(), data);
    const auto ds = storage::Dataset::open(dir / "manifest.json");
    const auto report = ds.validate();
    CHECK(report.ok());
    CHECK(ds.manifest().classes == data.classes);

    const auto sidecar = read_planted(dir / "planted.json", ds.manifest());
    CHECK(sidecar == data.planted);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto rec = ds.load(i);
      REQUIRE(sidecar[i].size() == planted);
      REQUIRE(rec.ground_truth.size() == planted);
      CHECK(rec.proposals.size() == cfg.proposals_per_image);
      for (std::size_t g = 0; g < planted; ++g) {
        CHECK(rec.ground_truth[g].box == rec.proposals[sidecar[i][g]].box);
        CHECK(data.roles[i][sidecar[i][g]] == ProposalRole::Object);
      }
      CHECK(std::count(data.roles[i].begin(), data.roles[i].end(), ProposalRole::Object) == std::ptrdiff_t(planted));
    }
  }
}

TEST_CASE("strong signal without noise makes planted matches dominate") {
  auto cfg = small();
  cfg.signal_strength = 1e4;
  cfg.noise_sigma = 1e-6;
  const auto data = generate_synthetic(cfg);
  // Smallest same-class planted product against the largest planted-distractor product.
  double min_planted = 1e300, max_distractor = -1e300;
  for (std::size_t p = 0; p < data.records.size(); ++p) {
    const auto& pa = data.records[p].proposals[data.planted[p][0]];
    const auto& label = data.records[p].ground_truth[0].label;
    for (std::size_t q = 0; q < data.records.size(); ++q) {
      if (q == p) continue;
      const auto& rq = data.records[q];
      for (std::size_t j = 0; j < rq.proposals.size(); ++j) {
        const double v = dot(pa.feature, rq.proposals[j].feature);
        if (data.roles[q][j] == ProposalRole::Object) {
          if (rq.ground_truth[0].label == label) min_planted = std::min(min_planted, v);
        } else {
          max_distractor = std::max(max_distractor, v);
        }
      }
    }
  }
  REQUIRE(min_planted < 1e300);
  CHECK(min_planted > max_distractor);
}

TEST_CASE("config validation") {
  auto c = small();
  c.planted_per_image = 4;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
  c = small();
  c.signal_strength = 0;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
  c = small();
  c.proposals_per_image = 0;
  CHECK_THROWS_AS(generate_synthetic(c), Error);
}

TEST_CASE("sidecar errors") {
  test::TempDir dir;
  const auto data = generate_synthetic(small());
  write_synthetic(dir.path(), data);
  auto m = storage::read_manifest(dir / "manifest.json");
  m.entries[0].image_id = "unknown";
  CHECK_THROWS_AS(read_planted(dir / "planted.json", m), Error);
}
