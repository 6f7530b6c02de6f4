#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fishdip/errors.hpp"

namespace fishdip {

enum class SimilarityMode {
  exact,            // match/mismatch constants
  normalized_edit,  // 1 - 2*editdist/(len_a+len_b), in [-1, 1]
};

struct AlignScoring {
  double match = 1.0;
  double mismatch = -1.0;
  double gap = -1.0;
  SimilarityMode mode = SimilarityMode::exact;
};

// Pair slot value meaning "aligned to a gap".
inline constexpr int kGapIndex = -1;

// Global alignment of two token sequences. pairs is ordered; every index of
// a and b appears exactly once, in increasing order, possibly paired with
// kGapIndex.
struct Alignment {
  std::vector<std::pair<int, int>> pairs;
  double score = 0.0;
};

std::size_t levenshtein(std::string_view a, std::string_view b);

double token_similarity(std::string_view a, std::string_view b, const AlignScoring& scoring);

// Needleman-Wunsch with linear gap penalty. Traceback ties prefer diagonal,
// then up (gap in b), then left (gap in a), making the result unique.
Alignment needleman_wunsch(std::span<const std::string> a, std::span<const std::string> b,
                           const AlignScoring& scoring = {});

}  // namespace fishdip
