#include "lod/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "binary_io.hpp"
#include "json.hpp"
#include "lod/error.hpp"
#include "lod/parallel.hpp"
#include "lod/storage.hpp"

namespace lod {

std::vector<std::size_t> balanced_chunks(const NodeIndex& index, std::size_t chunks) {
  const std::size_t n = index.n_images();
  const std::size_t m = std::clamp<std::size_t>(chunks, 1, std::max<std::size_t>(n, 1));
  std::vector<std::size_t> bounds{0};
  const double total = static_cast<double>(index.size());
  std::size_t image = 0;
  for (std::size_t c = 1; c < m; ++c) {
    const double target = total * static_cast<double>(c) / static_cast<double>(m);
    // Leave at least one image for each remaining chunk.
    const std::size_t max_end = n - (m - c);
    std::size_t end = std::max(image + 1, bounds.back() + 1);
    while (end < max_end && static_cast<double>(index.offset(end)) < target) ++end;
    if (end > bounds.back() + 1 && end <= max_end) {
      const double over = static_cast<double>(index.offset(end)) - target;
      const double under = target - static_cast<double>(index.offset(end - 1));
      if (under < over) --end;
    }
    bounds.push_back(end);
    image = end;
  }
  bounds.push_back(n);
  return bounds;
}

namespace {

struct BlockView {
  std::uint32_t other = 0;
  const SimilarityBlock* block = nullptr;
  bool transposed = false;
};

// Per-block row or column index built by counting sort; stable, so within a column the
// original (k-ascending) order is preserved.
struct BlockIndex {
  std::vector<std::uint32_t> row_ptr;
  std::vector<std::uint32_t> col_ptr;
  std::vector<std::uint32_t> by_col;
};

BlockIndex index_block(const SimilarityBlock& b) {
  BlockIndex ix;
  ix.row_ptr.assign(b.rows + 1, 0);
  ix.col_ptr.assign(b.cols + 1, 0);
  for (const auto& e : b.entries) {
    ++ix.row_ptr[e.k + 1];
    ++ix.col_ptr[e.l + 1];
  }
  for (std::uint32_t i = 0; i < b.rows; ++i) ix.row_ptr[i + 1] += ix.row_ptr[i];
  for (std::uint32_t i = 0; i < b.cols; ++i) ix.col_ptr[i + 1] += ix.col_ptr[i];
  ix.by_col.resize(b.entries.size());
  std::vector<std::uint32_t> fill(ix.col_ptr.begin(), ix.col_ptr.end() - 1);
  for (std::uint32_t i = 0; i < b.entries.size(); ++i) ix.by_col[fill[b.entries[i].l]++] = i;
  return ix;
}

}  // namespace

BlockAdjacency BlockAdjacency::assemble(const NodeIndex& index, std::span<const SimilarityBlock> blocks,
                                        double gamma, std::size_t chunks, const NeighborList* neighbors) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail(ErrorKind::InvalidArgument, "gamma must be finite and >= 0");
  if (index.size() > std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorKind::InvalidArgument, "node count exceeds 32-bit column indices");
  }
  const std::size_t n_images = index.n_images();

  std::vector<std::pair<std::uint32_t, std::uint32_t>> linked;
  if (neighbors) linked = symmetric_pairs(*neighbors);

  std::vector<std::vector<BlockView>> views(n_images);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
  seen.reserve(blocks.size());
  for (const auto& b : blocks) {
    const std::string tag = "block (" + std::to_string(b.image_p) + ", " + std::to_string(b.image_q) + ")";
    if (b.image_p >= n_images || b.image_q >= n_images) fail(ErrorKind::InvalidArgument, tag + " references an unknown image");
    if (b.image_p == b.image_q) fail(ErrorKind::InvalidArgument, tag + " is a diagonal block");
    if (b.rows != index.count(b.image_p) || b.cols != index.count(b.image_q)) {
      fail(ErrorKind::InvalidArgument, tag + " shape does not match proposal counts");
    }
    check_block(b);
    const auto key = std::minmax(b.image_p, b.image_q);
    if (neighbors && !std::binary_search(linked.begin(), linked.end(), std::pair(key.first, key.second))) {
      fail(ErrorKind::InvalidArgument, tag + " links images that are not neighbors");
    }
    seen.emplace_back(key.first, key.second);
    views[b.image_p].push_back({b.image_q, &b, false});
    views[b.image_q].push_back({b.image_p, &b, true});
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    fail(ErrorKind::InvalidArgument, "an image pair has more than one block");
  }
  for (auto& v : views) {
    std::sort(v.begin(), v.end(), [](const BlockView& a, const BlockView& b) { return a.other < b.other; });
  }

  std::vector<BlockIndex> block_index(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) block_index[i] = index_block(blocks[i]);
  auto index_of = [&](const SimilarityBlock* b) { return static_cast<std::size_t>(b - blocks.data()); };

  BlockAdjacency adj;
  adj.index_ = index;
  adj.gamma_ = gamma;
  const auto bounds = balanced_chunks(index, chunks);
  adj.chunks_.resize(bounds.size() - 1);
  for (std::size_t c = 0; c + 1 < bounds.size(); ++c) {
    auto& ch = adj.chunks_[c];
    ch.first_image = bounds[c];
    ch.end_image = bounds[c + 1];
    ch.first_node = index.offset(ch.first_image);
    ch.end_node = ch.end_image < n_images ? index.offset(ch.end_image) : index.size();
    ch.row_ptr.reserve(ch.rows() + 1);
    ch.row_ptr.push_back(0);
    for (std::size_t p = ch.first_image; p < ch.end_image; ++p) {
      for (std::size_t k = 0; k < index.count(p); ++k) {
        for (const auto& v : views[p]) {
          const auto& b = *v.block;
          const auto& ix = block_index[index_of(v.block)];
          const auto col_base = static_cast<std::uint32_t>(index.offset(v.other));
          if (!v.transposed) {
            for (auto i = ix.row_ptr[k]; i < ix.row_ptr[k + 1]; ++i) {
              ch.cols.push_back(col_base + b.entries[i].l);
              ch.values.push_back(b.entries[i].score);
            }
          } else {
            for (auto i = ix.col_ptr[k]; i < ix.col_ptr[k + 1]; ++i) {
              const auto& e = b.entries[ix.by_col[i]];
              ch.cols.push_back(col_base + e.k);
              ch.values.push_back(e.score);
            }
          }
        }
        ch.row_ptr.push_back(ch.cols.size());
      }
    }
  }
  adj.compute_degrees();
  return adj;
}

void BlockAdjacency::compute_degrees() {
  degrees_.assign(size(), gamma_);
  for (const auto& ch : chunks_) {
    for (std::size_t r = 0; r < ch.rows(); ++r) {
      double sum = 0.0;
      for (auto i = ch.row_ptr[r]; i < ch.row_ptr[r + 1]; ++i) sum += ch.values[i];
      degrees_[ch.first_node + r] = sum + gamma_;
    }
  }
}

std::size_t BlockAdjacency::stored_entries() const noexcept {
  std::size_t total = 0;
  for (const auto& ch : chunks_) total += ch.values.size();
  return total;
}

std::vector<double> BlockAdjacency::matvec(std::span<const double> x, std::size_t workers) const {
  const std::size_t n = size();
  if (x.size() != n) {
    fail(ErrorKind::InvalidArgument,
         "matvec dimension mismatch: got " + std::to_string(x.size()) + ", expected " + std::to_string(n));
  }
  std::vector<double> y(n, 0.0);
  if (n == 0) return y;
  double total = 0.0;
  for (double v : x) total += v;
  const double shift = gamma_ * total / static_cast<double>(n);
  parallel_for(chunks_.size(), workers, [&](std::size_t c) {
    const auto& ch = chunks_[c];
    for (std::size_t r = 0; r < ch.rows(); ++r) {
      double acc = 0.0;
      for (auto i = ch.row_ptr[r]; i < ch.row_ptr[r + 1]; ++i) {
        acc += static_cast<double>(ch.values[i]) * x[ch.cols[i]];
      }
      y[ch.first_node + r] = acc + shift;
    }
  });
  return y;
}

std::vector<double> BlockAdjacency::transition_matvec(std::span<const double> x, std::size_t workers) const {
  if (x.size() != size()) fail(ErrorKind::InvalidArgument, "transition_matvec dimension mismatch");
  std::vector<double> scaled(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(degrees_[j] > 0.0)) {
      fail(ErrorKind::Numerical, "dangling node " + std::to_string(j) + " has zero degree (gamma = 0)");
    }
    scaled[j] = x[j] / degrees_[j];
  }
  return matvec(scaled, workers);
}

std::vector<double> BlockAdjacency::to_dense() const {
  const std::size_t n = size();
  const double fill = n > 0 ? gamma_ / static_cast<double>(n) : 0.0;
  std::vector<double> dense(n * n, fill);
  for (const auto& ch : chunks_) {
    for (std::size_t r = 0; r < ch.rows(); ++r) {
      for (auto i = ch.row_ptr[r]; i < ch.row_ptr[r + 1]; ++i) {
        dense[(ch.first_node + r) * n + ch.cols[i]] += ch.values[i];
      }
    }
  }
  return dense;
}

namespace {

std::string chunk_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chunk_%04zu.lodb", c);
  return buf;
}

}  // namespace

void BlockAdjacency::spill(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json meta = {{"format", "lod-chunks"}, {"version", 1}, {"gamma", gamma_}, {"nodes", size()}};
  nlohmann::json bounds = nlohmann::json::array();
  for (std::size_t c = 0; c < chunks_.size(); ++c) {
    const auto& ch = chunks_[c];
    bounds.push_back({ch.first_image, ch.end_image});
    storage::BlockWriter writer(dir / chunk_name(c));
    for (std::size_t p = ch.first_image; p < ch.end_image; ++p) {
      std::map<std::size_t, std::vector<SparseEntry>> by_image;
      for (std::size_t k = 0; k < index_.count(p); ++k) {
        const std::size_t r = index_.offset(p) + k - ch.first_node;
        for (auto i = ch.row_ptr[r]; i < ch.row_ptr[r + 1]; ++i) {
          const auto loc = index_.from_global(ch.cols[i]);
          by_image[loc.image].push_back(
              {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(loc.proposal), ch.values[i]});
        }
      }
      for (auto& [q, entries] : by_image) {
        writer.append({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q),
                       static_cast<std::uint32_t>(index_.count(p)), static_cast<std::uint32_t>(index_.count(q)),
                       std::move(entries)});
      }
    }
    writer.close();
  }
  meta["chunks"] = bounds;
  io::write_text_atomic(dir / "chunks.json", meta.dump(1) + "\n");
}

BlockAdjacency BlockAdjacency::load_spilled(const std::filesystem::path& dir, const NodeIndex& index) {
  const auto meta = nlohmann::json::parse(io::read_text(dir / "chunks.json"));
  if (meta.at("format") != "lod-chunks") fail(ErrorKind::Format, "not a chunk directory: " + dir.string());
  if (meta.at("nodes").get<std::size_t>() != index.size()) {
    fail(ErrorKind::Format, "spilled chunks were built for a different node count");
  }
  BlockAdjacency adj;
  adj.index_ = index;
  adj.gamma_ = meta.at("gamma").get<double>();
  const auto& bounds = meta.at("chunks");
  for (std::size_t c = 0; c < bounds.size(); ++c) {
    AdjacencyChunk ch;
    ch.first_image = bounds[c][0].get<std::size_t>();
    ch.end_image = bounds[c][1].get<std::size_t>();
    ch.first_node = index.offset(ch.first_image);
    ch.end_node = ch.end_image < index.n_images() ? index.offset(ch.end_image) : index.size();
    // Bundles hold blocks in (p, q) order, so one pass per image row-range restores row order.
    std::map<std::size_t, std::vector<SimilarityBlock>> by_row_image;
    for (auto& b : storage::read_blocks(dir / chunk_name(c))) by_row_image[b.image_p].push_back(std::move(b));
    ch.row_ptr.push_back(0);
    for (std::size_t p = ch.first_image; p < ch.end_image; ++p) {
      const auto& row_blocks = by_row_image[p];
      std::vector<BlockIndex> ix;
      for (const auto& b : row_blocks) ix.push_back(index_block(b));
      for (std::size_t k = 0; k < index.count(p); ++k) {
        for (std::size_t bi = 0; bi < row_blocks.size(); ++bi) {
          const auto& b = row_blocks[bi];
          const auto col_base = static_cast<std::uint32_t>(index.offset(b.image_q));
          for (auto i = ix[bi].row_ptr[k]; i < ix[bi].row_ptr[k + 1]; ++i) {
            ch.cols.push_back(col_base + b.entries[i].l);
            ch.values.push_back(b.entries[i].score);
          }
        }
        ch.row_ptr.push_back(ch.cols.size());
      }
    }
    adj.chunks_.push_back(std::move(ch));
  }
  adj.compute_degrees();
  return adj;
}

}  // namespace lod
