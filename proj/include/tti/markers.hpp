#pragma once

// Gender markers and profession mentions in captions and VQA answers.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tti/corpus.hpp"
#include "tti/embeddings.hpp"

namespace tti {

enum class MarkerSource { Caption, VqaAppearance };
std::string_view to_string(MarkerSource s);

/// Lowercase alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);

std::span<const std::string_view> woman_markers();
std::span<const std::string_view> man_markers();

enum class TextGender { Unmarked, Woman, Man };

/// Gender of the first marker token in the text.
TextGender classify_text(std::string_view text);

struct MarkerStats {
  std::size_t texts = 0;
  std::size_t marked = 0;
  std::size_t woman = 0;
  std::size_t man = 0;
  std::size_t person = 0;  ///< unmarked texts with "person" or "people"

  double pct_gender_marked() const { return texts ? 100.0 * marked / texts : 0.0; }
  double pct_woman() const { return marked ? 100.0 * woman / marked : 0.0; }
  double pct_man() const { return marked ? 100.0 * man / marked : 0.0; }
  double pct_person() const { return texts ? 100.0 * person / texts : 0.0; }

  friend bool operator==(const MarkerStats&, const MarkerStats&) = default;
};

MarkerStats gender_marker_stats(std::span<const std::string> texts);

/// Text of one annotation for the source; empty when the answer is missing.
std::string annotation_text(const Annotation& a, MarkerSource source);

/// Per-system statistics over annotations whose image is in the corpus.
std::map<std::string, MarkerStats> gender_marker_stats(std::span<const Annotation> annotations, const Corpus& corpus,
                                                       MarkerSource source);

/// True when the profession's tokens occur as a contiguous run in the text.
bool mentions_profession(std::string_view text, std::string_view profession);

/// Percentage of texts mentioning the profession.
double profession_mention_rate(std::span<const std::string> texts, std::string_view profession);

/// Per system: percentage of profession-prompt captions naming their own profession.
std::map<std::string, double> profession_mention_by_system(std::span<const Annotation> annotations,
                                                           const Corpus& corpus);

}  // namespace tti
