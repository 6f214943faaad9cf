#include "lod/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "binary_io.hpp"
#include "json.hpp"
#include "lod/error.hpp"
#include "lod/random.hpp"
#include "lod/storage.hpp"

namespace lod {

void SynthConfig::validate() const {
  if (n_images < 1 || feature_dim < 1 || n_classes < 1) fail(ErrorKind::InvalidArgument, "synth: empty dimensions");
  if (!(signal_strength > 0.0)) fail(ErrorKind::InvalidArgument, "synth: signal_strength must be > 0");
  if (!(noise_sigma >= 0.0)) fail(ErrorKind::InvalidArgument, "synth: noise_sigma must be >= 0");
  if (planted_per_image < 1 || planted_per_image > 3) fail(ErrorKind::InvalidArgument, "synth: planted_per_image must be 1..3");
  if (proposals_per_image < planted_per_image) {
    fail(ErrorKind::InvalidArgument, "synth: proposals_per_image must cover the planted objects");
  }
  if (!(context_spread >= 0.0 && context_spread <= 1.0)) fail(ErrorKind::InvalidArgument, "synth: context_spread must lie in [0, 1]");
  if (!(class_skew >= 0.0)) fail(ErrorKind::InvalidArgument, "synth: class_skew must be >= 0");
  if (n_classes < planted_per_image) fail(ErrorKind::InvalidArgument, "synth: need at least one class per planted slot");
}

namespace {

using Vec = std::vector<double>;

Vec random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  double s = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    s += x * x;
  }
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

Vec normalized(Vec v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

std::vector<Vec> orthonormal_directions(Rng& rng, std::size_t count, std::size_t d) {
  std::vector<Vec> out;
  while (out.size() < count) {
    Vec v = random_unit(rng, d);
    if (out.size() < d) {
      for (const auto& u : out) {
        double dot = 0.0;
        for (std::size_t t = 0; t < d; ++t) dot += u[t] * v[t];
        for (std::size_t t = 0; t < d; ++t) v[t] -= dot * u[t];
      }
      double s = 0.0;
      for (double x : v) s += x * x;
      if (s < 1e-12) continue;
      v = normalized(std::move(v));
    }
    out.push_back(std::move(v));
  }
  return out;
}

// Normalized box: center and side lengths as fractions of the image.
struct NBox {
  double cx, cy, w, h;
};

// Snap to 1/16 pixel so coordinates survive the float32 round trip exactly.
double snap(double v) { return std::round(v * 16.0) / 16.0; }

BoundingBox to_pixels(const NBox& b, double width, double height) {
  double x0 = std::clamp(b.cx - b.w / 2, 0.0, 1.0) * width;
  double x1 = std::clamp(b.cx + b.w / 2, 0.0, 1.0) * width;
  double y0 = std::clamp(b.cy - b.h / 2, 0.0, 1.0) * height;
  double y1 = std::clamp(b.cy + b.h / 2, 0.0, 1.0) * height;
  x0 = snap(x0);
  y0 = snap(y0);
  x1 = std::max(snap(x1), x0 + 1.0);
  y1 = std::max(snap(y1), y0 + 1.0);
  return {x0, y0, std::min(x1, width), std::min(y1, height)};
}

NBox jittered(const NBox& b, Rng& rng, double jitter) {
  const double s = std::exp(jitter * rng.normal());
  return {b.cx + jitter * rng.normal(), b.cy + jitter * rng.normal(), b.w * s, b.h * s};
}

NBox random_box(Rng& rng) {
  const double w = rng.uniform(0.1, 0.6);
  const double h = rng.uniform(0.1, 0.6);
  return {rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h};
}

std::vector<float> make_feature(const Vec& direction, double strength, double sigma, Rng& rng) {
  std::vector<float> f(direction.size());
  for (std::size_t t = 0; t < f.size(); ++t) f[t] = static_cast<float>(strength * direction[t] + sigma * rng.normal());
  return f;
}

std::string class_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "class_%02zu", c);
  return buf;
}

std::string image_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%06zu", i);
  return buf;
}

}  // namespace

const char* to_string(ProposalRole role) noexcept {
  switch (role) {
    case ProposalRole::Object: return "object";
    case ProposalRole::Part: return "part";
    case ProposalRole::Container: return "container";
    case ProposalRole::Context: return "context";
    case ProposalRole::Noise: return "noise";
  }
  return "?";
}

SynthDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t d = cfg.feature_dim;
  const std::size_t slots = cfg.planted_per_image;

  // Shared objectness, background context and one direction per class, mutually orthogonal
  // while the dimension allows.
  const auto directions = orthonormal_directions(rng, cfg.n_classes + 2, d);
  const Vec& objectness = directions[0];
  const Vec& context = directions[1];
  std::vector<Vec> prototypes;
  std::vector<NBox> class_box;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    const Vec& own = directions[c + 2];
    Vec p(d);
    for (std::size_t t = 0; t < d; ++t) p[t] = cfg.objectness_share * objectness[t] + (1 - cfg.objectness_share) * own[t];
    prototypes.push_back(normalized(std::move(p)));
    // Multi-object images place classes in disjoint horizontal slots.
    const std::size_t slot = c % slots;
    const double slot_w = 1.0 / static_cast<double>(slots);
    const double w = slots == 1 ? rng.uniform(0.3, 0.5) : slot_w * rng.uniform(0.6, 0.8);
    const double h = rng.uniform(0.3, 0.5);
    const double cx = slots == 1 ? rng.uniform(0.35, 0.65) : slot_w * (static_cast<double>(slot) + 0.5);
    class_box.push_back({cx, rng.uniform(0.35, 0.65), w, h});
  }
  // Parts sit at fixed offsets inside the object, so part matches vote coherently too.
  std::vector<NBox> part_layout;
  for (std::size_t j = 0; j < cfg.parts_per_object; ++j) {
    part_layout.push_back({rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), rng.uniform(0.35, 0.5), rng.uniform(0.35, 0.5)});
  }

  // Zipf-like class frequencies; a skew of 0 gives balanced classes.
  std::vector<double> class_weight;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) class_weight.push_back(std::pow(static_cast<double>(c + 1), -cfg.class_skew));

  SynthDataset out;
  out.config = cfg;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) out.classes.push_back(class_name(c));

  for (std::size_t i = 0; i < cfg.n_images; ++i) {
    ImageRecord rec;
    rec.image_id = image_name(i);
    rec.width = std::round(rng.uniform(320.0, 512.0));
    rec.height = std::round(rng.uniform(320.0, 512.0));

    std::vector<std::size_t> classes;
    for (std::size_t s = 0; s < slots; ++s) {
      std::vector<std::size_t> options;
      double total = 0.0;
      for (std::size_t c = s; c < cfg.n_classes; c += slots) {
        options.push_back(c);
        total += class_weight[c];
      }
      double pick = rng.uniform() * total;
      std::size_t chosen = options.back();
      for (std::size_t c : options) {
        pick -= class_weight[c];
        if (pick < 0.0) {
          chosen = c;
          break;
        }
      }
      classes.push_back(chosen);
    }

    struct Draft {
      Proposal proposal;
      ProposalRole role;
    };
    std::vector<Draft> drafts;
    for (std::size_t c : classes) {
      const NBox obj = jittered(class_box[c], rng, cfg.geometry_jitter);
      const BoundingBox obj_px = to_pixels(obj, rec.width, rec.height);
      drafts.push_back({{obj_px, make_feature(prototypes[c], cfg.signal_strength, cfg.noise_sigma, rng), 0, {}}, ProposalRole::Object});
      rec.ground_truth.push_back({obj_px, out.classes[c]});
      for (const auto& pl : part_layout) {
        if (drafts.size() >= cfg.proposals_per_image) break;
        const NBox part{obj.cx + pl.cx * obj.w, obj.cy + pl.cy * obj.h, obj.w * pl.w, obj.h * pl.h};
        drafts.push_back({{to_pixels(part, rec.width, rec.height),
                           make_feature(prototypes[c], cfg.part_strength * cfg.signal_strength, cfg.noise_sigma, rng), 0, {}},
                          ProposalRole::Part});
      }
      for (std::size_t j = 0; j < cfg.containers_per_object && drafts.size() < cfg.proposals_per_image; ++j) {
        const double grow = rng.uniform(1.6, 2.0);
        const NBox big{obj.cx + rng.uniform(-0.1, 0.1), obj.cy + rng.uniform(-0.1, 0.1), obj.w * grow, obj.h * grow};
        Vec mix(d);
        for (std::size_t t = 0; t < d; ++t) {
          mix[t] = cfg.container_object_share * cfg.signal_strength * prototypes[c][t] +
                   (1 - cfg.container_object_share) * cfg.context_strength * context[t];
        }
        drafts.push_back({{to_pixels(big, rec.width, rec.height), make_feature(mix, 1.0, cfg.noise_sigma, rng), 0, {}},
                          ProposalRole::Container});
      }
    }
    while (drafts.size() < cfg.proposals_per_image) {
      const bool with_context = rng.uniform() < cfg.context_fraction;
      const double strength = with_context ? cfg.context_strength * (1.0 - cfg.context_spread * rng.uniform()) : 0.0;
      drafts.push_back({{to_pixels(random_box(rng), rec.width, rec.height), make_feature(context, strength, cfg.noise_sigma, rng), 0, {}},
                        with_context ? ProposalRole::Context : ProposalRole::Noise});
    }
    // Fisher-Yates with the local generator keeps the planted positions seed-determined.
    for (std::size_t j = drafts.size(); j > 1; --j) std::swap(drafts[j - 1], drafts[rng.below(j)]);

    std::vector<std::uint32_t> planted;
    auto& roles = out.roles.emplace_back();
    for (std::size_t j = 0; j < drafts.size(); ++j) {
      if (drafts[j].role == ProposalRole::Object) planted.push_back(static_cast<std::uint32_t>(j));
      roles.push_back(drafts[j].role);
      rec.proposals.push_back(std::move(drafts[j].proposal));
    }
    // Ground truth follows proposal order so planted[g] and ground_truth[g] describe the same object.
    std::vector<GroundTruthObject> gt;
    for (auto j : planted) {
      for (const auto& g : rec.ground_truth)
        if (g.box == rec.proposals[j].box) {
          gt.push_back(g);
          break;
        }
    }
    rec.ground_truth = std::move(gt);

    rec.image_feature.assign(d, 0.0f);
    for (const auto& p : rec.proposals)
      for (std::size_t t = 0; t < d; ++t) rec.image_feature[t] += p.feature[t] / static_cast<float>(rec.proposals.size());

    out.planted.push_back(std::move(planted));
    out.records.push_back(std::move(rec));
  }
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SynthDataset& data) {
  storage::write_dataset(dir, data.records, data.classes);
  nlohmann::json planted = nlohmann::json::object();
  for (std::size_t i = 0; i < data.records.size(); ++i) planted[data.records[i].image_id] = data.planted[i];
  const auto& c = data.config;
  nlohmann::json j = {{"format", "lod-planted"},
                      {"version", 1},
                      {"seed", c.seed},
                      {"n_images", c.n_images},
                      {"proposals_per_image", c.proposals_per_image},
                      {"planted_per_image", c.planted_per_image},
                      {"planted", planted}};
  io::write_text_atomic(dir / "planted.json", j.dump(1) + "\n");
}

std::vector<std::vector<std::uint32_t>> read_planted(const std::filesystem::path& path, const DatasetManifest& manifest) {
  const auto j = nlohmann::json::parse(io::read_text(path));
  if (j.at("format") != "lod-planted") fail(ErrorKind::Format, path.string() + ": not a planted-truth sidecar");
  std::vector<std::vector<std::uint32_t>> out;
  for (const auto& e : manifest.entries) {
    if (!j.at("planted").contains(e.image_id)) fail(ErrorKind::Format, "planted truth is missing image '" + e.image_id + "'");
    out.push_back(j["planted"][e.image_id].get<std::vector<std::uint32_t>>());
  }
  return out;
}

}  // namespace lod
