#include "tti/markers.hpp"

#include <algorithm>
#include <cctype>

namespace tti {

namespace {

constexpr std::string_view kWoman[] = {"woman", "women", "lady", "ladies", "girl", "girls", "female"};
constexpr std::string_view kMan[] = {"man", "men", "guy", "guys", "male", "gentleman", "gentlemen"};

bool contains(std::span<const std::string_view> list, std::string_view w) {
  return std::find(list.begin(), list.end(), w) != list.end();
}

}  // namespace

std::string_view to_string(MarkerSource s) {
  return s == MarkerSource::Caption ? "caption" : "vqa_appearance";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::span<const std::string_view> woman_markers() { return kWoman; }
std::span<const std::string_view> man_markers() { return kMan; }

TextGender classify_text(std::string_view text) {
  for (const auto& t : tokenize(text)) {
    if (contains(kWoman, t)) return TextGender::Woman;
    if (contains(kMan, t)) return TextGender::Man;
  }
  return TextGender::Unmarked;
}

MarkerStats gender_marker_stats(std::span<const std::string> texts) {
  MarkerStats s;
  for (const auto& text : texts) {
    ++s.texts;
    switch (classify_text(text)) {
      case TextGender::Woman:
        ++s.marked;
        ++s.woman;
        break;
      case TextGender::Man:
        ++s.marked;
        ++s.man;
        break;
      case TextGender::Unmarked: {
        const auto toks = tokenize(text);
        if (std::find_if(toks.begin(), toks.end(), [](const std::string& t) {
              return t == "person" || t == "people";
            }) != toks.end()) {
          ++s.person;
        }
        break;
      }
    }
  }
  return s;
}

std::string annotation_text(const Annotation& a, MarkerSource source) {
  if (source == MarkerSource::Caption) return a.caption;
  auto it = a.vqa.find(QuestionKey::Appearance);
  return it == a.vqa.end() ? std::string() : it->second;
}

std::map<std::string, MarkerStats> gender_marker_stats(std::span<const Annotation> annotations, const Corpus& corpus,
                                                       MarkerSource source) {
  std::map<std::string, std::vector<std::string>> texts;
  for (const auto& a : annotations) {
    const auto* r = corpus.find(a.image_id);
    if (!r) continue;
    if (source == MarkerSource::VqaAppearance && !a.vqa.count(QuestionKey::Appearance)) continue;
    texts[r->system].push_back(annotation_text(a, source));
  }
  std::map<std::string, MarkerStats> out;
  for (const auto& [system, t] : texts) out[system] = gender_marker_stats(t);
  return out;
}

bool mentions_profession(std::string_view text, std::string_view profession) {
  const auto needle = tokenize(profession);
  if (needle.empty()) return false;
  const auto hay = tokenize(text);
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

double profession_mention_rate(std::span<const std::string> texts, std::string_view profession) {
  if (texts.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& t : texts) hits += mentions_profession(t, profession);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(texts.size());
}

std::map<std::string, double> profession_mention_by_system(std::span<const Annotation> annotations,
                                                           const Corpus& corpus) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& a : annotations) {
    const auto* r = corpus.find(a.image_id);
    if (!r || r->prompt.kind != PromptKind::Profession) continue;
    auto& [hits, total] = counts[r->system];
    ++total;
    hits += mentions_profession(a.caption, *r->prompt.profession);
  }
  std::map<std::string, double> out;
  for (const auto& [system, c] : counts) out[system] = 100.0 * c.first / c.second;
  return out;
}

}  // namespace tti
