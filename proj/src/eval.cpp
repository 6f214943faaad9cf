#include "lod/eval.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lod/error.hpp"

namespace lod {

GroundTruthBoxes ground_truth_boxes(std::span<const ImageRecord> records) {
  GroundTruthBoxes gt;
  gt.reserve(records.size());
  for (const auto& r : records) {
    auto& boxes = gt.emplace_back();
    for (const auto& g : r.ground_truth) boxes.push_back(g.box);
  }
  return gt;
}

std::vector<double> ap_thresholds() {
  std::vector<double> s;
  for (int i = 0; i < 10; ++i) s.push_back((50 + 5 * i) / 100.0);
  return s;
}

namespace {

void check_alignment(const DiscoveryResult& results, const GroundTruthBoxes& gt) {
  if (results.images.size() != gt.size()) {
    fail(ErrorKind::InvalidArgument, "detections cover " + std::to_string(results.images.size()) +
                                         " images but ground truth covers " + std::to_string(gt.size()));
  }
}

// Per prediction rank: whether it claimed a GT box under greedy one-to-one matching.
std::vector<bool> match_image(const std::vector<Selection>& preds, const std::vector<BoundingBox>& gt,
                              double sigma, std::size_t max_m) {
  const std::size_t m = std::min(preds.size(), max_m);
  std::vector<bool> matched(m, false);
  std::vector<bool> claimed(gt.size(), false);
  for (std::size_t i = 0; i < m; ++i) {
    double best = -1.0;
    std::size_t best_j = gt.size();
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (claimed[j]) continue;
      const double v = iou(preds[i].box, gt[j]);
      if (v >= sigma && v > best) {
        best = v;
        best_j = j;
      }
    }
    if (best_j < gt.size()) {
      claimed[best_j] = true;
      matched[i] = true;
    }
  }
  return matched;
}

}  // namespace

std::vector<PrPoint> pr_curve(const DiscoveryResult& results, const GroundTruthBoxes& gt, double sigma,
                              std::size_t max_m) {
  check_alignment(results, gt);
  std::size_t total_gt = 0;
  for (const auto& g : gt) total_gt += g.size();
  std::vector<std::size_t> preds(max_m + 1, 0), hits(max_m + 1, 0);
  for (std::size_t p = 0; p < gt.size(); ++p) {
    const auto& sel = results.images[p].selections;
    const auto matched = match_image(sel, gt[p], sigma, max_m);
    for (std::size_t i = 0; i < matched.size(); ++i) {
      ++preds[i + 1];
      if (matched[i]) ++hits[i + 1];
    }
  }
  std::vector<PrPoint> curve;
  std::size_t cum_preds = 0, cum_hits = 0;
  for (std::size_t m = 1; m <= max_m; ++m) {
    cum_preds += preds[m];
    cum_hits += hits[m];
    PrPoint pt;
    pt.m = m;
    pt.predictions = cum_preds;
    pt.matched = cum_hits;
    pt.ground_truth = total_gt;
    pt.precision = cum_preds > 0 ? static_cast<double>(cum_hits) / static_cast<double>(cum_preds) : 0.0;
    pt.recall = total_gt > 0 ? static_cast<double>(cum_hits) / static_cast<double>(total_gt) : 0.0;
    curve.push_back(pt);
  }
  return curve;
}

double corloc(const DiscoveryResult& results, const GroundTruthBoxes& gt, double sigma) {
  check_alignment(results, gt);
  std::size_t evaluated = 0, correct = 0;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt[p].empty()) continue;
    ++evaluated;
    const auto& sel = results.images[p].selections;
    if (sel.empty()) continue;
    for (const auto& g : gt[p]) {
      if (iou(sel.front().box, g) >= sigma) {
        ++correct;
        break;
      }
    }
  }
  if (evaluated == 0) fail(ErrorKind::InvalidArgument, "corloc is undefined without ground truth");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(evaluated);
}

double average_precision(const DiscoveryResult& results, const GroundTruthBoxes& gt, double sigma,
                         std::size_t max_m) {
  if (max_m == 0) fail(ErrorKind::InvalidArgument, "average precision needs M >= 1");
  const auto curve = pr_curve(results, gt, sigma, max_m);
  double area = curve.front().recall * curve.front().precision;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].recall - curve[i - 1].recall) * 0.5 * (curve[i].precision + curve[i - 1].precision);
  }
  return area;
}

double ap_range(const DiscoveryResult& results, const GroundTruthBoxes& gt, std::size_t max_m) {
  double total = 0.0;
  const auto sigmas = ap_thresholds();
  for (double s : sigmas) total += average_precision(results, gt, s, max_m);
  return total / static_cast<double>(sigmas.size());
}

double det_rate(const DiscoveryResult& results, const GroundTruthBoxes& gt, std::size_t m, double sigma) {
  if (m == 0) fail(ErrorKind::InvalidArgument, "detection rate needs m >= 1");
  return 100.0 * pr_curve(results, gt, sigma, m).back().recall;
}

double corret(const NeighborList& retrieved, std::span<const std::vector<std::string>> labels, std::size_t k) {
  if (retrieved.size() != labels.size()) fail(ErrorKind::InvalidArgument, "labels do not cover every image");
  if (k == 0) fail(ErrorKind::InvalidArgument, "corret needs k >= 1");
  const std::size_t n = labels.size();
  if (n == 0) return 0.0;
  std::vector<std::set<std::string>> sets;
  for (const auto& l : labels) sets.emplace_back(l.begin(), l.end());
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t hits = 0;
    const auto& nb = retrieved.neighbors[p];
    for (std::size_t i = 0; i < std::min(k, nb.size()); ++i) {
      const auto q = nb[i];
      if (q == p) continue;
      const bool share = std::any_of(sets[p].begin(), sets[p].end(),
                                     [&](const std::string& c) { return sets[q].count(c) > 0; });
      if (share) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return 100.0 * total / static_cast<double>(n);
}

MetricReport evaluate(const DiscoveryResult& results, const GroundTruthBoxes& gt, const EvalSettings& settings) {
  MetricReport r;
  const std::size_t max_m = settings.max_m > 0 ? settings.max_m : std::max<std::size_t>(results.params.max_regions, 1);
  r.n_images = gt.size();
  r.n_evaluated = static_cast<std::size_t>(std::count_if(gt.begin(), gt.end(), [](const auto& g) { return !g.empty(); }));
  r.corloc = corloc(results, gt, settings.sigma);
  r.sigmas = ap_thresholds();
  for (double s : r.sigmas) r.ap.push_back(average_precision(results, gt, s, max_m));
  r.ap50 = r.ap.front();
  double sum = 0.0;
  for (double a : r.ap) sum += a;
  r.ap_range = sum / static_cast<double>(r.ap.size());
  r.detrate_m = settings.detrate_m;
  for (std::size_t m : settings.detrate_m) r.detrate.push_back(det_rate(results, gt, m, settings.sigma));
  r.pr50 = pr_curve(results, gt, 0.5, max_m);
  return r;
}

std::string report_to_json(const MetricReport& r, const std::string& provenance_json) {
  nlohmann::json ap = nlohmann::json::object();
  for (std::size_t i = 0; i < r.sigmas.size(); ++i) {
    std::ostringstream key;
    key << r.sigmas[i];
    ap[key.str()] = r.ap[i];
  }
  nlohmann::json det = nlohmann::json::object();
  for (std::size_t i = 0; i < r.detrate_m.size(); ++i) det[std::to_string(r.detrate_m[i])] = r.detrate[i];
  nlohmann::json j = {{"format", "lod-metrics"},
                      {"n_images", r.n_images},
                      {"n_evaluated", r.n_evaluated},
                      {"corloc_percent", r.corloc},
                      {"ap50", r.ap50},
                      {"ap_50_95", r.ap_range},
                      {"ap_by_sigma", ap},
                      {"detrate_percent", det}};
  if (!provenance_json.empty()) j["provenance"] = nlohmann::json::parse(provenance_json);
  return j.dump(1) + "\n";
}

std::string report_csv_header(const MetricReport& r) {
  std::ostringstream os;
  os << "label,n_images,corloc,ap50,ap_50_95";
  for (auto m : r.detrate_m) os << ",detrate_m" << m;
  os << "\n";
  return os.str();
}

std::string report_csv_row(const MetricReport& r, const std::string& label) {
  std::ostringstream os;
  os.precision(10);
  os << label << ',' << r.n_images << ',' << r.corloc << ',' << r.ap50 << ',' << r.ap_range;
  for (double d : r.detrate) os << ',' << d;
  os << "\n";
  return os.str();
}

std::string pr_curve_csv(std::span<const PrPoint> curve) {
  std::ostringstream os;
  os.precision(10);
  os << "m,predictions,matched,ground_truth,precision,recall\n";
  for (const auto& p : curve) {
    os << p.m << ',' << p.predictions << ',' << p.matched << ',' << p.ground_truth << ',' << p.precision << ','
       << p.recall << "\n";
  }
  return os.str();
}

}  // namespace lod
