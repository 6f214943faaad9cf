#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace lod {

enum class Norm : std::uint8_t { L1 = 1, L2 = 2 };
enum class Solver : std::uint8_t { Quadratic = 0, PageRank = 1, Lod = 2 };

const char* to_string(Solver s) noexcept;
const char* to_string(Norm n) noexcept;
/// Accepts "quadratic"/"q", "pagerank"/"p", "lod".
Solver parse_solver(const std::string& name);

struct RankVector {
  std::vector<double> scores;
  Norm norm = Norm::L1;
  Solver solver = Solver::PageRank;
  int iterations = 0;
  /// Rayleigh quotient estimate of the dominant eigenvalue (quadratic solver only).
  double eigenvalue = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const noexcept { return scores.size(); }
};

}  // namespace lod
