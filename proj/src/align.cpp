#include "fishdip/align.hpp"

#include <algorithm>

namespace fishdip {

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double token_similarity(std::string_view a, std::string_view b, const AlignScoring& scoring) {
  if (scoring.mode == SimilarityMode::exact) return a == b ? scoring.match : scoring.mismatch;
  if (a.empty() && b.empty()) return 1.0;
  const double dist = static_cast<double>(levenshtein(a, b));
  return 1.0 - 2.0 * dist / static_cast<double>(a.size() + b.size());
}

Alignment needleman_wunsch(std::span<const std::string> a, std::span<const std::string> b,
                           const AlignScoring& scoring) {
  const std::size_t n = a.size(), m = b.size();
  // Score matrix, (n+1) x (m+1).
  std::vector<double> d((n + 1) * (m + 1), 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 1; i <= n; ++i) at(i, 0) = static_cast<double>(i) * scoring.gap;
  for (std::size_t j = 1; j <= m; ++j) at(0, j) = static_cast<double>(j) * scoring.gap;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double diag = at(i - 1, j - 1) + token_similarity(a[i - 1], b[j - 1], scoring);
      const double up = at(i - 1, j) + scoring.gap;
      const double left = at(i, j - 1) + scoring.gap;
      at(i, j) = std::max({diag, up, left});
    }
  }

  Alignment out;
  out.score = at(n, m);
  // Traceback; cells were produced by the same arithmetic, so the equality
  // comparisons below are exact. Tie order: diagonal, up, left.
  std::size_t i = n, j = m;
  std::vector<std::pair<int, int>> rev;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + token_similarity(a[i - 1], b[j - 1], scoring)) {
      rev.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + scoring.gap) {
      rev.emplace_back(static_cast<int>(i - 1), kGapIndex);
      --i;
    } else {
      rev.emplace_back(kGapIndex, static_cast<int>(j - 1));
      --j;
    }
  }
  out.pairs.assign(rev.rbegin(), rev.rend());
  return out;
}

}  // namespace fishdip
