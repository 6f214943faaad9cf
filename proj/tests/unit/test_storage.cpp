#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "lod/error.hpp"
#include "lod/random.hpp"
#include "lod/storage.hpp"
#include "oracles.hpp"

using namespace lod;
using lod::test::TempDir;

namespace {

SimilarityBlock random_block(std::uint64_t seed, std::uint32_t rows, std::uint32_t cols, double density) {
  Rng rng(seed);
  SimilarityBlock b{3, 9, rows, cols, {}};
  for (std::uint32_t k = 0; k < rows; ++k)
    for (std::uint32_t l = 0; l < cols; ++l)
      if (rng.uniform() < density) b.entries.push_back({k, l, static_cast<float>(rng.uniform(0, 1000))});
  return b;
}

ImageRecord random_record(Rng& rng, const std::string& id, std::size_t n, std::size_t d, std::size_t dd) {
  ImageRecord r;
  r.image_id = id;
  r.width = 640;
  r.height = 480;
  for (std::size_t i = 0; i < n; ++i) {
    Proposal p;
    const double x = rng.uniform(0, 300), y = rng.uniform(0, 200);
    p.box = {x, y, x + 1 + std::floor(rng.uniform(0, 300)), y + 1 + std::floor(rng.uniform(0, 200))};
    for (std::size_t t = 0; t < d; ++t) p.feature.push_back(static_cast<float>(rng.normal()));
    p.group_id = static_cast<std::uint16_t>(rng.below(4));
    if (rng.uniform() < 0.5) p.saliency = static_cast<float>(rng.uniform());
    r.proposals.push_back(std::move(p));
  }
  for (std::size_t t = 0; t < dd; ++t) r.image_feature.push_back(static_cast<float>(rng.normal()));
  return r;
}

std::size_t resident_kib() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("VmRSS:", 0) == 0) return std::stoul(line.substr(6));
  return 0;
}

}  // namespace

TEST_CASE("block round trips") {
  TempDir dir;
  SUBCASE("empty block") {
    const SimilarityBlock b{0, 1, 4, 5, {}};
    storage::write_block(dir / "b.lodb", b);
    CHECK(storage::read_block(dir / "b.lodb") == b);
  }
  SUBCASE("1x1 block with 0.5, golden bytes") {
    const SimilarityBlock b{0, 1, 1, 1, {{0, 0, 0.5f}}};
    const auto bytes = storage::encode_block(b);
    const std::vector<std::uint8_t> expected = {
        'L', 'O', 'D', 'B', 1, 0, 0, 0,  // magic, version
        0, 0, 0, 0, 1, 0, 0, 0,          // image p, image q
        1, 0, 0, 0, 1, 0, 0, 0,          // rows, cols
        1, 0, 0, 0, 0, 0, 0, 0,          // nnz (u64)
        0, 0, 0, 0, 0, 0, 0, 0,          // k, l
        0, 0, 0, 0x3f};                  // 0.5f little-endian
    CHECK(bytes == expected);
    storage::write_block(dir / "b.lodb", b);
    const auto back = storage::read_block(dir / "b.lodb");
    REQUIRE(back.entries.size() == 1);
    CHECK(std::memcmp(&back.entries[0].score, &b.entries[0].score, sizeof(float)) == 0);
  }
  SUBCASE("random 50x80 block, identical bytes on rewrite") {
    const auto b = random_block(5, 50, 80, 0.3);
    storage::write_block(dir / "a.lodb", b);
    const auto back = storage::read_block(dir / "a.lodb");
    CHECK(back == b);
    storage::write_block(dir / "b.lodb", back);
    CHECK(test::slurp(dir / "a.lodb") == test::slurp(dir / "b.lodb"));
  }
}

TEST_CASE("block reader rejects corrupt payloads") {
  TempDir dir;
  const auto b = random_block(6, 4, 4, 0.8);
  auto bytes = storage::encode_block(b);
  auto write_raw = [&](const std::vector<std::uint8_t>& raw) {
    std::ofstream out(dir / "x.lodb", std::ios::binary);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  };
  auto expect_format = [&] {
    try {
      storage::read_block(dir / "x.lodb");
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
    }
  };
  SUBCASE("magic") {
    bytes[0] = 'X';
    write_raw(bytes);
    expect_format();
  }
  SUBCASE("version") {
    bytes[4] = 2;
    write_raw(bytes);
    expect_format();
  }
  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 5);
    write_raw(bytes);
    expect_format();
  }
  SUBCASE("unsorted triplets") {
    REQUIRE(b.entries.size() >= 2);
    std::vector<std::uint8_t> swapped = bytes;
    std::memcpy(swapped.data() + 32, bytes.data() + 44, 12);
    std::memcpy(swapped.data() + 44, bytes.data() + 32, 12);
    write_raw(swapped);
    expect_format();
  }
  SUBCASE("negative score is refused on write") {
    SimilarityBlock bad{0, 1, 1, 1, {{0, 0, -1.0f}}};
    CHECK_THROWS_AS(storage::encode_block(bad), Error);
  }
}

TEST_CASE("block bundles stream in order") {
  TempDir dir;
  std::vector<SimilarityBlock> blocks;
  for (std::uint32_t i = 0; i < 20; ++i) blocks.push_back(random_block(100 + i, 1 + i % 7, 1 + i % 5, 0.5));
  storage::write_blocks(dir / "all.lodb", blocks);
  CHECK(storage::read_blocks(dir / "all.lodb") == blocks);
}

TEST_CASE("feature files round trip bit-exactly") {
  TempDir dir;
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    auto r = random_record(rng, "img" + std::to_string(t), rng.below(12), 1 + rng.below(16), rng.below(8));
    for (auto& p : r.proposals) {  // boxes are stored as float32
      p.box = {static_cast<float>(p.box.x_min), static_cast<float>(p.box.y_min), static_cast<float>(p.box.x_max),
               static_cast<float>(p.box.y_max)};
    }
    const ManifestEntry entry{r.image_id, r.width, r.height, "x", {}};
    const auto path = dir / (r.image_id + ".lodf");
    storage::write_features(path, r);
    const auto back = storage::read_features(path, entry);
    REQUIRE(back.proposals.size() == r.proposals.size());
    for (std::size_t i = 0; i < r.proposals.size(); ++i) {
      CHECK(back.proposals[i].feature == r.proposals[i].feature);
      CHECK(back.proposals[i].box == r.proposals[i].box);
      CHECK(back.proposals[i].group_id == r.proposals[i].group_id);
      CHECK(back.proposals[i].saliency == r.proposals[i].saliency);
    }
    CHECK(back.image_feature == r.image_feature);
    CHECK(storage::encode_features(back) == storage::encode_features(r));
  }
}

TEST_CASE("rank files") {
  TempDir dir;
  RankVector rv;
  rv.scores = {0.25, 0.5, 0.25};
  rv.norm = Norm::L1;
  rv.solver = Solver::Lod;
  storage::write_rank(dir / "r.lodr", rv);
  const auto back = storage::read_rank(dir / "r.lodr");
  CHECK(back.scores == rv.scores);
  CHECK(back.solver == Solver::Lod);
  CHECK(back.norm == Norm::L1);

  rv.scores = {0.5, 0.6};  // not a unit L1 vector
  storage::write_rank(dir / "bad.lodr", rv);
  CHECK_THROWS_AS(storage::read_rank(dir / "bad.lodr"), Error);
}

TEST_CASE("dataset loading") {
  TempDir dir;
  Rng rng(9);
  std::vector<ImageRecord> recs = {random_record(rng, "a", 3, 4, 2), random_record(rng, "b", 2, 4, 2)};
  for (auto& r : recs)
    for (auto& p : r.proposals) p.box = {1, 1, 10, 10};
  storage::write_dataset(dir.path(), recs, {"cat"});

  SUBCASE("two images load") {
    const auto ds = storage::Dataset::open(dir / "manifest.json");
    CHECK(ds.size() == 2);
    CHECK(ds.manifest().n_images == 2);
    CHECK(ds.load(1).proposals.size() == 2);
    CHECK(ds.validate().ok());
  }
  SUBCASE("deleted feature file names the id") {
    std::filesystem::remove(dir / "features/b.lodf");
    const auto ds = storage::Dataset::open(dir / "manifest.json");
    try {
      ds.load(1);
      FAIL("expected missing input");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingInput);
      CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
    const auto report = ds.validate();
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].image_id == "b");
    CHECK(report.violations[0].kind == ViolationKind::MissingFile);
  }
  SUBCASE("missing manifest") {
    CHECK_THROWS_AS(storage::Dataset::open(dir / "nope.json"), Error);
  }
}

TEST_CASE("10K-image manifest opens and streams without materializing the payloads") {
  TempDir dir;
  constexpr std::size_t n = 10000, r = 10, d = 128;
  {
    // Written via the manifest + per-file API so the records never coexist in memory.
    DatasetManifest m;
    m.n_images = n;
    m.feature_dim = d;
    m.descriptor_dim = 8;
    Rng rng(1);
    for (std::size_t i = 0; i < n; ++i) {
      auto rec = random_record(rng, "im" + std::to_string(i), r, d, 8);
      for (auto& p : rec.proposals) p.box = {0, 0, 10, 10};
      const std::string rel = "features/" + rec.image_id + ".lodf";
      storage::write_features(dir / rel, rec);
      m.entries.push_back({rec.image_id, rec.width, rec.height, rel, {}});
    }
    storage::write_manifest(dir / "manifest.json", m);
  }
  const std::size_t payload_kib = n * r * d * 4 / 1024;  // ~50 MiB of features on disk
  const std::size_t before = resident_kib();
  const auto ds = storage::Dataset::open(dir / "manifest.json");
  CHECK(ds.size() == n);
  double checksum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) checksum += ds.load(i).proposals[0].feature[0];
  const std::size_t after = resident_kib();
  CHECK(std::isfinite(checksum));
  MESSAGE("payload " << payload_kib << " KiB, resident growth " << (after - before) << " KiB");
  CHECK(after - before < payload_kib / 4);
}

TEST_CASE("structured text artifacts round trip") {
  NeighborList nl{2, {{1, 2}, {0, 2}, {1, 0}}};
  CHECK(storage::neighbors_from_json(storage::neighbors_to_json(nl, {})) == nl);

  DiscoveryResult r;
  r.params = {3, 0.3, true};
  r.images.push_back({"a", {{2, 0.75, {1, 2, 3, 4}, 1}, {0, 0.5, {5, 6, 7, 8}, 2}}});
  r.images.push_back({"b", {}});
  CHECK(storage::discovery_from_json(storage::discovery_to_json(r)) == r);
  CHECK_THROWS_AS(storage::discovery_from_json("{\"format\": \"other\"}"), Error);
  CHECK_THROWS_AS(storage::neighbors_from_json("not json"), Error);
}
