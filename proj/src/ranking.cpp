#include "lod/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lod/error.hpp"

namespace lod {

void RankingConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorKind::InvalidArgument, "beta must lie in [0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail(ErrorKind::InvalidArgument, "gamma must be >= 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1]");
  if (iterations < 1) fail(ErrorKind::InvalidArgument, "iterations must be >= 1");
  if (tolerance && !(*tolerance >= 0.0)) fail(ErrorKind::InvalidArgument, "tolerance must be >= 0");
}

namespace {

double l1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double linf_change(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void normalize_or_abort(std::vector<double>& v, Norm norm, const char* solver, int iteration) {
  const double n = norm == Norm::L1 ? l1(v) : l2(v);
  if (!std::isfinite(n) || !(n > 0.0)) {
    std::ostringstream os;
    os << solver << ": iterate norm became " << n << " at iteration " << iteration
       << " (overflow or an all-zero operator)";
    fail(ErrorKind::Numerical, os.str());
  }
  for (double& x : v) x /= n;
}

bool converged(const RankingConfig& cfg, std::span<const double> prev, std::span<const double> next) {
  return cfg.tolerance && linf_change(prev, next) <= *cfg.tolerance;
}

}  // namespace

RankVector solve_quadratic(const BlockAdjacency& graph, const RankingConfig& cfg) {
  cfg.validate();
  const std::size_t n = graph.size();
  RankVector out;
  out.norm = Norm::L2;
  out.solver = Solver::Quadratic;
  if (n == 0) return out;
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  int t = 0;
  while (t < cfg.iterations) {
    auto next = graph.matvec(x, cfg.workers);
    normalize_or_abort(next, Norm::L2, "quadratic solver", t + 1);
    ++t;
    const bool done = converged(cfg, x, next);
    x = std::move(next);
    if (done) break;
  }
  const auto wx = graph.matvec(x, cfg.workers);
  out.eigenvalue = std::inner_product(x.begin(), x.end(), wx.begin(), 0.0);
  out.iterations = t;
  out.scores = std::move(x);
  return out;
}

RankVector solve_pagerank(const BlockAdjacency& graph, std::span<const double> u,
                          std::span<const double> v0, const RankingConfig& cfg) {
  cfg.validate();
  const std::size_t n = graph.size();
  if (u.size() != n || v0.size() != n) fail(ErrorKind::InvalidArgument, "personalization/initial vector size mismatch");
  auto check_distribution = [](std::span<const double> v, const char* what) {
    double s = 0.0;
    for (double x : v) {
      if (!(x >= 0.0)) fail(ErrorKind::InvalidArgument, std::string(what) + " has a negative entry");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      fail(ErrorKind::InvalidArgument, std::string(what) + " sums to " + std::to_string(s) + ", not 1");
    }
  };
  check_distribution(u, "personalization vector");
  check_distribution(v0, "initial vector");

  RankVector out;
  out.norm = Norm::L1;
  out.solver = Solver::PageRank;
  std::vector<double> v(v0.begin(), v0.end());
  int t = 0;
  while (t < cfg.iterations) {
    auto next = graph.transition_matvec(v, cfg.workers);
    double mass = 0.0;
    for (double x : v) mass += x;
    for (std::size_t i = 0; i < n; ++i) next[i] = (1.0 - cfg.beta) * next[i] + cfg.beta * mass * u[i];
    normalize_or_abort(next, Norm::L1, "pagerank solver", t + 1);
    ++t;
    const bool done = converged(cfg, v, next);
    v = std::move(next);
    if (done) break;
  }
  out.iterations = t;
  out.scores = std::move(v);
  return out;
}

RankVector solve_pagerank(const BlockAdjacency& graph, const RankingConfig& cfg) {
  const std::size_t n = graph.size();
  std::vector<double> uniform(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  return solve_pagerank(graph, uniform, uniform, cfg);
}

namespace {

// Strict "ranks higher" order on nodes: score, then box area, then lower index.
struct RanksHigher {
  std::span<const double> scores;
  std::span<const double> areas;
  bool operator()(std::size_t a, std::size_t b) const {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (areas[a] != areas[b]) return areas[a] > areas[b];
    return a < b;
  }
};

}  // namespace

PersonalizationVector build_personalization(const RankVector& scores, const NodeIndex& index,
                                            std::span<const double> node_areas, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1]");
  if (scores.size() != index.size() || node_areas.size() != index.size()) {
    fail(ErrorKind::InvalidArgument, "score/area vectors do not match the node index");
  }
  const RanksHigher higher{scores.scores, node_areas};
  std::vector<std::size_t> candidates;
  for (std::size_t p = 0; p < index.n_images(); ++p) {
    if (index.count(p) == 0) continue;
    std::size_t best = index.offset(p);
    for (std::size_t i = best + 1; i < index.offset(p) + index.count(p); ++i)
      if (higher(i, best)) best = i;
    candidates.push_back(best);
  }
  if (candidates.empty()) fail(ErrorKind::InvalidArgument, "cannot personalize an empty dataset");

  // The epsilon keeps products such as 0.15 * 200 = 29.999... from losing a whole node.
  const double raw = alpha * static_cast<double>(candidates.size());
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(raw + 1e-9)), 1, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(), higher);

  PersonalizationVector pv;
  pv.u.assign(index.size(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    pv.support.push_back(static_cast<std::uint32_t>(candidates[i]));
    pv.u[candidates[i]] = 1.0 / static_cast<double>(k);
  }
  std::sort(pv.support.begin(), pv.support.end());
  return pv;
}

LodSolution solve_lod(const BlockAdjacency& graph, std::span<const double> node_areas,
                      const RankingConfig& cfg) {
  LodSolution sol;
  sol.quadratic = solve_quadratic(graph, cfg);
  sol.personalization = build_personalization(sol.quadratic, graph.index(), node_areas, cfg.alpha);
  sol.ranking = solve_pagerank(graph, sol.personalization.u, sol.personalization.u, cfg);
  sol.ranking.solver = Solver::Lod;
  return sol;
}

RankVector solve(Solver solver, const BlockAdjacency& graph, std::span<const double> node_areas,
                 const RankingConfig& cfg) {
  switch (solver) {
    case Solver::Quadratic: return solve_quadratic(graph, cfg);
    case Solver::PageRank: return solve_pagerank(graph, cfg);
    case Solver::Lod: return solve_lod(graph, node_areas, cfg).ranking;
  }
  fail(ErrorKind::InvalidArgument, "unknown solver");
}

}  // namespace lod
