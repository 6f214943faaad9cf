#include "lod/storage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "json.hpp"
#include "lod/error.hpp"

namespace lod {

SimilarityBlock SimilarityBlock::transposed() const {
  SimilarityBlock t{image_q, image_p, cols, rows, {}};
  t.entries.reserve(entries.size());
  for (const auto& e : entries) t.entries.push_back({e.l, e.k, e.score});
  std::sort(t.entries.begin(), t.entries.end(), [](const SparseEntry& a, const SparseEntry& b) {
    return a.k != b.k ? a.k < b.k : a.l < b.l;
  });
  return t;
}

void check_block(const SimilarityBlock& block) {
  const std::string tag =
      "block (" + std::to_string(block.image_p) + ", " + std::to_string(block.image_q) + ")";
  for (std::size_t i = 0; i < block.entries.size(); ++i) {
    const auto& e = block.entries[i];
    if (e.k >= block.rows || e.l >= block.cols) {
      fail(ErrorKind::Format, tag + ": entry index out of range");
    }
    if (!(e.score >= 0.0f) || !std::isfinite(e.score)) {
      fail(ErrorKind::Format, tag + ": negative or non-finite score");
    }
    if (i > 0) {
      const auto& prev = block.entries[i - 1];
      if (prev.k > e.k || (prev.k == e.k && prev.l >= e.l)) {
        fail(ErrorKind::Format, tag + ": triplets unsorted or duplicated");
      }
    }
  }
}

const char* to_string(Solver s) noexcept {
  switch (s) {
    case Solver::Quadratic: return "quadratic";
    case Solver::PageRank: return "pagerank";
    case Solver::Lod: return "lod";
  }
  return "unknown";
}

const char* to_string(Norm n) noexcept { return n == Norm::L1 ? "L1" : "L2"; }

Solver parse_solver(const std::string& name) {
  if (name == "quadratic" || name == "q" || name == "Q") return Solver::Quadratic;
  if (name == "pagerank" || name == "p" || name == "P") return Solver::PageRank;
  if (name == "lod" || name == "LOD") return Solver::Lod;
  fail(ErrorKind::InvalidArgument, "unknown solver '" + name + "'");
}

}  // namespace lod

namespace lod::storage {

using nlohmann::json;

namespace {

constexpr char kFeatureMagic[] = "LODF";
constexpr char kBlockMagic[] = "LODB";
constexpr char kRankMagic[] = "LODR";
constexpr std::size_t kBlockHeaderBytes = 4 + 4 + 4 + 4 + 4 + 4 + 8;
constexpr std::size_t kTripletBytes = 12;

void check_version(std::uint32_t got, std::uint32_t want, const std::string& ctx) {
  if (got != want) {
    fail(ErrorKind::Format, ctx + ": unsupported format version " + std::to_string(got) +
                                " (expected " + std::to_string(want) + ")");
  }
}

std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorKind::InvalidArgument, std::string(what) + " exceeds 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

// ---- feature files -------------------------------------------------------

std::vector<std::uint8_t> encode_features(const ImageRecord& record) {
  const std::size_t n = record.proposals.size();
  const std::size_t d = n > 0 ? record.proposals.front().feature.size() : 0;
  const std::size_t dd = record.image_feature.size();
  io::ByteWriter w;
  w.reserve(20 + n * (4 * d + 16 + 2 + 4) + 4 * dd);
  w.put_magic(kFeatureMagic);
  w.put_u32(kFeatureFormatVersion);
  w.put_u32(narrow_u32(n, "proposal count"));
  w.put_u32(narrow_u32(d, "feature dimension"));
  w.put_u32(narrow_u32(dd, "descriptor dimension"));
  for (const auto& p : record.proposals) {
    if (p.feature.size() != d) {
      fail(ErrorKind::InvalidArgument, record.image_id + ": proposals have unequal feature dimensions");
    }
    for (float f : p.feature) w.put_f32(f);
  }
  for (const auto& p : record.proposals) {
    w.put_f32(static_cast<float>(p.box.x_min));
    w.put_f32(static_cast<float>(p.box.y_min));
    w.put_f32(static_cast<float>(p.box.x_max));
    w.put_f32(static_cast<float>(p.box.y_max));
  }
  for (const auto& p : record.proposals) w.put_u16(p.group_id);
  for (const auto& p : record.proposals) {
    w.put_f32(p.saliency ? *p.saliency : std::numeric_limits<float>::quiet_NaN());
  }
  for (float f : record.image_feature) w.put_f32(f);
  return w.take();
}

ImageRecord decode_features(std::span<const std::uint8_t> bytes, const ManifestEntry& entry) {
  io::ByteReader r(bytes, "feature file for '" + entry.image_id + "'");
  r.expect_magic(kFeatureMagic);
  check_version(r.u32(), kFeatureFormatVersion, r.context());
  const std::size_t n = r.u32();
  const std::size_t d = r.u32();
  const std::size_t dd = r.u32();
  const std::size_t expected = n * (4 * d + 16 + 2 + 4) + 4 * dd;
  if (r.remaining() != expected) {
    fail(ErrorKind::Format, r.context() + ": payload is " + std::to_string(r.remaining()) +
                                " bytes, header implies " + std::to_string(expected));
  }
  ImageRecord rec;
  rec.image_id = entry.image_id;
  rec.width = entry.width;
  rec.height = entry.height;
  rec.ground_truth = entry.ground_truth;
  rec.proposals.resize(n);
  for (auto& p : rec.proposals) {
    p.feature.resize(d);
    for (auto& f : p.feature) f = r.f32();
  }
  for (auto& p : rec.proposals) {
    p.box.x_min = r.f32();
    p.box.y_min = r.f32();
    p.box.x_max = r.f32();
    p.box.y_max = r.f32();
  }
  for (auto& p : rec.proposals) p.group_id = r.u16();
  for (auto& p : rec.proposals) {
    const float s = r.f32();
    if (!std::isnan(s)) p.saliency = s;
  }
  rec.image_feature.resize(dd);
  for (auto& f : rec.image_feature) f = r.f32();
  return rec;
}

void write_features(const std::filesystem::path& path, const ImageRecord& record) {
  io::write_file_atomic(path, encode_features(record));
}

ImageRecord read_features(const std::filesystem::path& path, const ManifestEntry& entry) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorKind::MissingInput,
         "feature file for image '" + entry.image_id + "' is missing: " + path.string());
  }
  return decode_features(io::read_file(path), entry);
}

// ---- similarity blocks ---------------------------------------------------

std::vector<std::uint8_t> encode_block(const SimilarityBlock& block) {
  check_block(block);
  io::ByteWriter w;
  w.reserve(kBlockHeaderBytes + kTripletBytes * block.entries.size());
  w.put_magic(kBlockMagic);
  w.put_u32(kBlockFormatVersion);
  w.put_u32(block.image_p);
  w.put_u32(block.image_q);
  w.put_u32(block.rows);
  w.put_u32(block.cols);
  w.put_u64(block.entries.size());
  for (const auto& e : block.entries) {
    w.put_u32(e.k);
    w.put_u32(e.l);
    w.put_f32(e.score);
  }
  return w.take();
}

namespace {

struct BlockHeader {
  SimilarityBlock shell;
  std::uint64_t nnz = 0;
};

BlockHeader decode_block_header(io::ByteReader& r) {
  r.expect_magic(kBlockMagic);
  check_version(r.u32(), kBlockFormatVersion, r.context());
  BlockHeader h;
  h.shell.image_p = r.u32();
  h.shell.image_q = r.u32();
  h.shell.rows = r.u32();
  h.shell.cols = r.u32();
  h.nnz = r.u64();
  return h;
}

void decode_triplets(io::ByteReader& r, BlockHeader& h) {
  if (h.nnz > r.remaining() / kTripletBytes) {
    fail(ErrorKind::Format, r.context() + ": truncated payload (" + std::to_string(h.nnz) +
                                " triplets declared)");
  }
  h.shell.entries.resize(h.nnz);
  for (auto& e : h.shell.entries) {
    e.k = r.u32();
    e.l = r.u32();
    e.score = r.f32();
  }
  check_block(h.shell);
}

}  // namespace

void write_block(const std::filesystem::path& path, const SimilarityBlock& block) {
  io::write_file_atomic(path, encode_block(block));
}

SimilarityBlock read_block(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes, path.string());
  auto h = decode_block_header(r);
  decode_triplets(r, h);
  if (r.remaining() != 0) fail(ErrorKind::Format, path.string() + ": trailing bytes after block");
  return std::move(h.shell);
}

BlockWriter::BlockWriter(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  tmp_ = path_;
  tmp_ += ".tmp";
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) fail(ErrorKind::InvalidArgument, "cannot write " + tmp_.string());
}

BlockWriter::~BlockWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void BlockWriter::append(const SimilarityBlock& block) {
  const auto bytes = encode_block(block);
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out_) fail(ErrorKind::InvalidArgument, "write failed on " + tmp_.string());
  ++count_;
}

void BlockWriter::close() {
  if (closed_) return;
  closed_ = true;
  out_.close();
  std::error_code ec;
  std::filesystem::rename(tmp_, path_, ec);
  if (ec) fail(ErrorKind::InvalidArgument, "cannot rename " + tmp_.string() + ": " + ec.message());
}

BlockReader::BlockReader(const std::filesystem::path& path)
    : name_(path.string()), in_(path, std::ios::binary) {
  if (!in_) fail(ErrorKind::MissingInput, "cannot open " + name_);
}

std::optional<SimilarityBlock> BlockReader::next() {
  std::vector<std::uint8_t> header(kBlockHeaderBytes);
  in_.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(header.size()));
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got == 0 && in_.eof()) return std::nullopt;
  header.resize(got);
  io::ByteReader hr(header, name_);
  auto h = decode_block_header(hr);
  if (h.nnz > (std::uint64_t{1} << 40)) fail(ErrorKind::Format, name_ + ": implausible triplet count");
  std::vector<std::uint8_t> payload(static_cast<std::size_t>(h.nnz) * kTripletBytes);
  in_.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  payload.resize(static_cast<std::size_t>(in_.gcount()));
  io::ByteReader pr(payload, name_);
  decode_triplets(pr, h);
  return std::move(h.shell);
}

std::vector<SimilarityBlock> read_blocks(const std::filesystem::path& path) {
  BlockReader reader(path);
  std::vector<SimilarityBlock> out;
  while (auto b = reader.next()) out.push_back(std::move(*b));
  return out;
}

void write_blocks(const std::filesystem::path& path, std::span<const SimilarityBlock> blocks) {
  BlockWriter w(path);
  for (const auto& b : blocks) w.append(b);
  w.close();
}

// ---- rank vectors --------------------------------------------------------

std::vector<std::uint8_t> encode_rank(const RankVector& rank) {
  io::ByteWriter w;
  w.reserve(20 + 8 * rank.scores.size());
  w.put_magic(kRankMagic);
  w.put_u32(kRankFormatVersion);
  w.put_u64(rank.scores.size());
  w.put_u8(static_cast<std::uint8_t>(rank.norm));
  w.put_u8(static_cast<std::uint8_t>(rank.solver));
  w.put_u16(0);
  for (double s : rank.scores) w.put_f64(s);
  return w.take();
}

RankVector decode_rank(std::span<const std::uint8_t> bytes, const std::string& context) {
  io::ByteReader r(bytes, context);
  r.expect_magic(kRankMagic);
  check_version(r.u32(), kRankFormatVersion, context);
  const std::uint64_t n = r.u64();
  const auto norm = r.u8();
  const auto solver = r.u8();
  r.u16();
  if (norm != 1 && norm != 2) fail(ErrorKind::Format, context + ": unknown norm tag");
  if (solver > 2) fail(ErrorKind::Format, context + ": unknown solver tag");
  if (r.remaining() != n * 8) {
    fail(ErrorKind::Format, context + ": payload does not match N = " + std::to_string(n));
  }
  RankVector rv;
  rv.norm = static_cast<Norm>(norm);
  rv.solver = static_cast<Solver>(solver);
  rv.scores.resize(n);
  double total = 0.0;
  for (auto& s : rv.scores) {
    s = r.f64();
    if (!(s >= 0.0)) fail(ErrorKind::Format, context + ": negative or NaN rank entry");
    total += rv.norm == Norm::L1 ? s : s * s;
  }
  if (n > 0) {
    const double norm_value = rv.norm == Norm::L1 ? total : std::sqrt(total);
    if (std::abs(norm_value - 1.0) > 1e-6) {
      fail(ErrorKind::Format, context + ": declared " + to_string(rv.norm) + " norm is " +
                                  std::to_string(norm_value));
    }
  }
  return rv;
}

void write_rank(const std::filesystem::path& path, const RankVector& rank) {
  io::write_file_atomic(path, encode_rank(rank));
}

RankVector read_rank(const std::filesystem::path& path) {
  return decode_rank(io::read_file(path), path.string());
}

// ---- manifest ------------------------------------------------------------

namespace {

json box_to_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) fail(ErrorKind::Format, "box must be an array of 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json parse_json(const std::string& text, const std::string& context) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, context + ": " + e.what());
  }
}

template <typename F>
auto with_format_errors(const std::string& context, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, context + ": " + e.what());
  }
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingInput, "manifest not found: " + path.string());
  const auto j = parse_json(io::read_text(path), path.string());
  return with_format_errors(path.string(), [&] {
    if (j.at("format").get<std::string>() != "lod-manifest") {
      fail(ErrorKind::Format, path.string() + ": not a dataset manifest");
    }
    if (j.at("version").get<int>() != 1) fail(ErrorKind::Format, path.string() + ": unsupported manifest version");
    DatasetManifest m;
    m.n_images = j.at("n_images").get<std::size_t>();
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.descriptor_dim = j.at("descriptor_dim").get<std::size_t>();
    if (j.contains("classes")) m.classes = j["classes"].get<std::vector<std::string>>();
    for (const auto& e : j.at("images")) {
      ManifestEntry entry;
      entry.image_id = e.at("id").get<std::string>();
      entry.width = e.at("width").get<double>();
      entry.height = e.at("height").get<double>();
      entry.feature_path = e.at("features").get<std::string>();
      if (e.contains("ground_truth")) {
        for (const auto& g : e["ground_truth"]) {
          entry.ground_truth.push_back({box_from_json(g.at("box")), g.value("label", std::string{})});
        }
      }
      m.entries.push_back(std::move(entry));
    }
    return m;
  });
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  json images = json::array();
  for (const auto& e : m.entries) {
    json gt = json::array();
    for (const auto& g : e.ground_truth) gt.push_back({{"box", box_to_json(g.box)}, {"label", g.label}});
    images.push_back({{"id", e.image_id},
                      {"width", e.width},
                      {"height", e.height},
                      {"features", e.feature_path},
                      {"ground_truth", gt}});
  }
  json j = {{"format", "lod-manifest"},
            {"version", 1},
            {"n_images", m.n_images},
            {"feature_dim", m.feature_dim},
            {"descriptor_dim", m.descriptor_dim},
            {"classes", m.classes},
            {"images", images}};
  io::write_text_atomic(path, j.dump(1) + "\n");
}

Dataset Dataset::open(const std::filesystem::path& manifest_path) {
  Dataset ds;
  ds.manifest_ = read_manifest(manifest_path);
  ds.root_ = manifest_path.parent_path();
  return ds;
}

ImageRecord Dataset::load(std::size_t i) const {
  const auto& entry = manifest_.entries.at(i);
  return read_features(root_ / entry.feature_path, entry);
}

std::vector<ImageRecord> Dataset::load_all() const {
  std::vector<ImageRecord> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(load(i));
  return out;
}

ValidationReport Dataset::validate() const {
  return validate_dataset(manifest_, [this](std::size_t i) { return load(i); });
}

DatasetManifest write_dataset(const std::filesystem::path& dir, std::span<const ImageRecord> records,
                              std::vector<std::string> classes) {
  DatasetManifest m;
  m.n_images = records.size();
  m.classes = std::move(classes);
  if (!records.empty()) {
    m.descriptor_dim = records.front().image_feature.size();
    for (const auto& r : records) {
      if (!r.proposals.empty()) {
        m.feature_dim = r.proposals.front().feature.size();
        break;
      }
    }
  }
  for (const auto& r : records) {
    const std::string rel = "features/" + r.image_id + ".lodf";
    write_features(dir / rel, r);
    m.entries.push_back({r.image_id, r.width, r.height, rel, r.ground_truth});
  }
  write_manifest(dir / "manifest.json", m);
  return m;
}

// ---- structured text artifacts ------------------------------------------

std::string neighbors_to_json(const NeighborList& list, std::span<const std::string> ids) {
  json j = {{"format", "lod-neighbors"}, {"version", 1}, {"k", list.k}, {"neighbors", list.neighbors}};
  if (!ids.empty()) j["image_ids"] = std::vector<std::string>(ids.begin(), ids.end());
  return j.dump() + "\n";
}

NeighborList neighbors_from_json(const std::string& text) {
  const auto j = parse_json(text, "neighbor list");
  return with_format_errors("neighbor list", [&] {
    if (j.at("format").get<std::string>() != "lod-neighbors") fail(ErrorKind::Format, "not a neighbor list");
    NeighborList list;
    list.k = j.at("k").get<std::size_t>();
    list.neighbors = j.at("neighbors").get<std::vector<std::vector<std::uint32_t>>>();
    return list;
  });
}

std::string discovery_to_json(const DiscoveryResult& result) {
  json images = json::array();
  for (const auto& img : result.images) {
    json sel = json::array();
    for (std::size_t rank = 0; rank < img.selections.size(); ++rank) {
      const auto& s = img.selections[rank];
      sel.push_back({{"rank", rank},
                     {"proposal", s.proposal},
                     {"score", s.score},
                     {"box", box_to_json(s.box)},
                     {"group", s.group_id}});
    }
    images.push_back({{"image_id", img.image_id}, {"selections", sel}});
  }
  json j = {{"format", "lod-detections"},
            {"version", 1},
            {"max_regions", result.params.max_regions},
            {"iou_threshold", result.params.iou_threshold},
            {"use_groups", result.params.use_groups},
            {"images", images}};
  return j.dump(1) + "\n";
}

DiscoveryResult discovery_from_json(const std::string& text) {
  const auto j = parse_json(text, "detections");
  return with_format_errors("detections", [&] {
    if (j.at("format").get<std::string>() != "lod-detections") fail(ErrorKind::Format, "not a detections file");
    DiscoveryResult r;
    r.params.max_regions = j.at("max_regions").get<std::size_t>();
    r.params.iou_threshold = j.at("iou_threshold").get<double>();
    r.params.use_groups = j.at("use_groups").get<bool>();
    for (const auto& img : j.at("images")) {
      ImageDetections det;
      det.image_id = img.at("image_id").get<std::string>();
      for (const auto& s : img.at("selections")) {
        det.selections.push_back({s.at("proposal").get<std::uint32_t>(), s.at("score").get<double>(),
                                  box_from_json(s.at("box")), s.value("group", std::uint16_t{0})});
      }
      r.images.push_back(std::move(det));
    }
    return r;
  });
}

}  // namespace lod::storage
