#pragma once

// Prompt sets, image manifests and labor-statistics tables.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tti {

inline constexpr std::string_view kPromptPrefix = "Photo portrait of a";

enum class Gender { Man, Woman, NonBinary, Unspecified };
enum class PromptKind { Identity, Profession, Adjective };
enum class AdjectiveCoding { M, F };

/// Word used inside a rendered prompt: "man", "woman", "non-binary person", "person".
std::string_view gender_term(Gender g);
/// Phrase used in region summaries: "man", "woman", "non-binary", "unspecified".
std::string_view gender_phrase(Gender g);
/// Accepts either the prompt term or the summary phrase; empty means unspecified.
Gender parse_gender(std::string_view s);

std::string_view to_string(PromptKind k);
PromptKind parse_prompt_kind(std::string_view s);
std::string_view to_string(AdjectiveCoding c);

/// The 16 ethnicity phrases used to build identity prompts, in table order.
std::span<const std::string_view> identity_ethnicities();
/// Allowed answers for the constrained ethnicity question (17 phrases).
std::span<const std::string_view> constrained_ethnicities();
/// Allowed answers for the constrained gender question.
std::span<const std::string_view> constrained_genders();
/// The 146 occupation names.
std::span<const std::string_view> default_professions();

struct AdjectiveEntry {
  std::string_view word;
  AdjectiveCoding coding;
};
std::span<const AdjectiveEntry> adjective_list();
std::optional<AdjectiveCoding> adjective_coding(std::string_view adjective);

struct PromptSpec {
  PromptKind kind = PromptKind::Identity;
  Gender gender = Gender::Unspecified;
  std::optional<std::string> ethnicity;
  std::optional<std::string> adjective;
  std::optional<std::string> profession;
  std::optional<AdjectiveCoding> coding;

  static PromptSpec identity(Gender gender, std::optional<std::string> ethnicity = std::nullopt);
  static PromptSpec for_profession(std::string profession);
  static PromptSpec for_adjective(std::string adjective);

  /// Renders the prompt text, eliding unspecified slots.
  std::string render() const;
  /// Throws ValidationError when the slots do not match the prompt kind.
  void validate() const;

  std::string ethnicity_phrase() const { return ethnicity.value_or("unspecified"); }

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

std::vector<PromptSpec> enumerate_identity_prompts();
std::vector<PromptSpec> enumerate_profession_prompts(std::span<const std::string> professions);
std::vector<PromptSpec> enumerate_profession_prompts();
std::vector<PromptSpec> enumerate_adjective_prompts();

struct ImageRecord {
  std::string id;
  std::filesystem::path file;
  std::string system;
  PromptSpec prompt;
  std::uint32_t seed_index = 0;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

class Corpus {
 public:
  Corpus() = default;
  /// Throws ValidationError on duplicate ids or invalid prompts.
  explicit Corpus(std::vector<ImageRecord> records, std::filesystem::path base_dir = {});

  const std::vector<ImageRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const ImageRecord* find(std::string_view id) const;
  const ImageRecord& at(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;

  /// Sorted list of distinct system names.
  std::vector<std::string> systems() const;
  std::map<std::string, std::size_t> count_by_system() const;

  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
  /// Image path with relative entries resolved against the manifest directory.
  std::filesystem::path resolve(const ImageRecord& r) const;
  /// Throws ValidationError naming the first record whose image file is missing.
  void validate_files() const;

 private:
  std::vector<ImageRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::filesystem::path base_dir_;
};

/// Parses the line-delimited manifest. Errors carry the 1-based line number.
Corpus parse_manifest(std::istream& in, std::filesystem::path base_dir = {});
Corpus load_manifest(const std::filesystem::path& path);
void write_manifest(const Corpus& corpus, std::ostream& out);
void save_manifest(const Corpus& corpus, const std::filesystem::path& path);

enum class BlsKey { PctWomen, PctBlack };
std::string_view to_string(BlsKey k);
BlsKey parse_bls_key(std::string_view s);

struct BlsRow {
  std::string profession;
  double pct_women = 0;
  double pct_black = 0;

  double value(BlsKey k) const { return k == BlsKey::PctWomen ? pct_women : pct_black; }
  friend bool operator==(const BlsRow&, const BlsRow&) = default;
};

class BlsTable {
 public:
  BlsTable() = default;
  /// Throws ValidationError on duplicate professions or out-of-range percentages.
  explicit BlsTable(std::vector<BlsRow> rows);

  const std::vector<BlsRow>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  const BlsRow* find(std::string_view profession) const;

  friend bool operator==(const BlsTable& a, const BlsTable& b) { return a.rows_ == b.rows_; }

 private:
  std::vector<BlsRow> rows_;
};

BlsTable parse_bls(std::istream& in);
BlsTable load_bls(const std::filesystem::path& path);
void write_bls(const BlsTable& table, std::ostream& out);

/// Output of `ingest`: the validated manifest plus an optional BLS table.
struct CorpusDb {
  Corpus corpus;
  std::optional<BlsTable> bls;
};

void save_corpus_db(const std::filesystem::path& path, const Corpus& corpus,
                    const std::optional<BlsTable>& bls);
/// Loads either an ingested corpus database or a plain manifest.
CorpusDb load_corpus(const std::filesystem::path& path);

}  // namespace tti
