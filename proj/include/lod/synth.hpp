#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lod/dataset.hpp"

namespace lod {

/// Planted-object dataset generator.
///
/// Every class has a latent prototype (a shared "objectness" direction plus a class-specific
/// one) and a canonical normalized box. Each image plants `planted_per_image` objects whose
/// features are prototype * signal_strength + noise and whose boxes are the class box with
/// small jitter, so the Hough kernel fires consistently across images. The remaining proposals
/// are distractors: object parts (consistent geometry, weaker signal), boxes that contain an
/// object together with background, background regions sharing a global context prototype,
/// and pure-noise regions with random geometry.
struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t n_images = 200;
  std::size_t proposals_per_image = 20;
  std::size_t feature_dim = 32;
  std::size_t n_classes = 8;
  double class_skew = 1.0;           // class c is drawn with weight (c + 1)^-skew
  double signal_strength = 8.0;
  double noise_sigma = 1.0;
  std::size_t planted_per_image = 1;
  double geometry_jitter = 0.02;

  double objectness_share = 0.1;     // weight of the shared direction in class prototypes
  std::size_t parts_per_object = 2;
  double part_strength = 0.6;        // part signal relative to the whole object
  std::size_t containers_per_object = 1;
  double container_object_share = 0.6;
  double context_strength = 2.7;     // background prototype signal
  double context_fraction = 0.5;     // share of background distractors carrying context
  double context_spread = 0.5;       // context strength drawn from [1 - spread, 1] * context_strength

  void validate() const;
};

enum class ProposalRole : std::uint8_t { Object, Part, Container, Context, Noise };

const char* to_string(ProposalRole role) noexcept;

struct SynthDataset {
  SynthConfig config;
  std::vector<ImageRecord> records;
  std::vector<std::vector<std::uint32_t>> planted;  // per image, proposal indices of planted objects
  std::vector<std::vector<ProposalRole>> roles;      // per image, per proposal
  std::vector<std::string> classes;
};

SynthDataset generate_synthetic(const SynthConfig& cfg);

/// Writes the dataset (manifest + feature files) and `planted.json` into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SynthDataset& data);

/// Reads `planted.json` (image id -> planted proposal indices) in manifest order.
std::vector<std::vector<std::uint32_t>> read_planted(const std::filesystem::path& path,
                                                     const DatasetManifest& manifest);

}  // namespace lod
