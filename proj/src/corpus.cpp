#include "tti/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tti/error.hpp"

namespace tti {

using nlohmann::json;

std::string_view gender_term(Gender g) {
  switch (g) {
    case Gender::Man: return "man";
    case Gender::Woman: return "woman";
    case Gender::NonBinary: return "non-binary person";
    case Gender::Unspecified: return "person";
  }
  return "person";
}

std::string_view gender_phrase(Gender g) {
  switch (g) {
    case Gender::Man: return "man";
    case Gender::Woman: return "woman";
    case Gender::NonBinary: return "non-binary";
    case Gender::Unspecified: return "unspecified";
  }
  return "unspecified";
}

Gender parse_gender(std::string_view s) {
  if (s == "man") return Gender::Man;
  if (s == "woman") return Gender::Woman;
  if (s == "non-binary" || s == "non-binary person") return Gender::NonBinary;
  if (s.empty() || s == "unspecified" || s == "person") return Gender::Unspecified;
  throw ValidationError("unknown gender term \"" + std::string(s) + "\"");
}

std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::Identity: return "identity";
    case PromptKind::Profession: return "profession";
    case PromptKind::Adjective: return "adjective";
  }
  return "identity";
}

PromptKind parse_prompt_kind(std::string_view s) {
  if (s == "identity") return PromptKind::Identity;
  if (s == "profession") return PromptKind::Profession;
  if (s == "adjective") return PromptKind::Adjective;
  throw ValidationError("unknown prompt_kind \"" + std::string(s) + "\"");
}

std::string_view to_string(AdjectiveCoding c) { return c == AdjectiveCoding::M ? "M" : "F"; }

PromptSpec PromptSpec::identity(Gender gender, std::optional<std::string> ethnicity) {
  PromptSpec p;
  p.kind = PromptKind::Identity;
  p.gender = gender;
  p.ethnicity = std::move(ethnicity);
  return p;
}

PromptSpec PromptSpec::for_profession(std::string profession) {
  PromptSpec p;
  p.kind = PromptKind::Profession;
  p.profession = std::move(profession);
  return p;
}

PromptSpec PromptSpec::for_adjective(std::string adjective) {
  PromptSpec p;
  p.kind = PromptKind::Adjective;
  p.coding = adjective_coding(adjective);
  p.adjective = std::move(adjective);
  return p;
}

std::string PromptSpec::render() const {
  std::string out(kPromptPrefix);
  switch (kind) {
    case PromptKind::Identity:
      if (ethnicity) out += " " + *ethnicity;
      out += " ";
      out += gender_term(gender);
      out += " at work";
      break;
    case PromptKind::Profession:
      out += " " + profession.value_or("");
      break;
    case PromptKind::Adjective:
      out += " " + adjective.value_or("") + " person";
      break;
  }
  return out;
}

void PromptSpec::validate() const {
  switch (kind) {
    case PromptKind::Identity: {
      if (profession || adjective) {
        throw ValidationError("identity prompt must not set profession or adjective");
      }
      if (ethnicity) {
        auto allowed = constrained_ethnicities();
        if (std::find(allowed.begin(), allowed.end(), *ethnicity) == allowed.end()) {
          throw ValidationError("unknown ethnicity phrase \"" + *ethnicity + "\"");
        }
      }
      break;
    }
    case PromptKind::Profession:
      if (!profession || profession->empty()) throw ValidationError("profession prompt needs a profession");
      if (gender != Gender::Unspecified || ethnicity || adjective) {
        throw ValidationError("profession prompt must not set gender, ethnicity or adjective");
      }
      break;
    case PromptKind::Adjective:
      if (!adjective || adjective->empty()) throw ValidationError("adjective prompt needs an adjective");
      if (!adjective_coding(*adjective)) {
        throw ValidationError("adjective \"" + *adjective + "\" is not in the adjective list");
      }
      if (gender != Gender::Unspecified || ethnicity || profession) {
        throw ValidationError("adjective prompt must not set gender, ethnicity or profession");
      }
      break;
  }
}

std::vector<PromptSpec> enumerate_identity_prompts() {
  constexpr Gender kGenders[] = {Gender::Woman, Gender::Man, Gender::NonBinary, Gender::Unspecified};
  std::vector<PromptSpec> out;
  out.reserve(68);
  for (Gender g : kGenders) out.push_back(PromptSpec::identity(g));
  for (auto eth : identity_ethnicities()) {
    for (Gender g : kGenders) out.push_back(PromptSpec::identity(g, std::string(eth)));
  }
  return out;
}

std::vector<PromptSpec> enumerate_profession_prompts(std::span<const std::string> professions) {
  if (professions.empty()) throw ValidationError("profession list is empty");
  std::set<std::string_view> seen;
  std::vector<PromptSpec> out;
  out.reserve(professions.size());
  for (const auto& p : professions) {
    if (p.empty()) throw ValidationError("empty profession name");
    if (!seen.insert(p).second) throw ValidationError("duplicate profession \"" + p + "\"");
    out.push_back(PromptSpec::for_profession(p));
  }
  return out;
}

std::vector<PromptSpec> enumerate_profession_prompts() {
  auto names = default_professions();
  std::vector<std::string> list(names.begin(), names.end());
  return enumerate_profession_prompts(list);
}

std::vector<PromptSpec> enumerate_adjective_prompts() {
  std::vector<PromptSpec> out;
  for (const auto& e : adjective_list()) out.push_back(PromptSpec::for_adjective(std::string(e.word)));
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<ImageRecord> records, std::filesystem::path base_dir)
    : records_(std::move(records)), base_dir_(std::move(base_dir)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.id.empty()) throw ValidationError("record " + std::to_string(i) + " has an empty id");
    r.prompt.validate();
    if (!by_id_.emplace(r.id, i).second) throw ValidationError("duplicate id \"" + r.id + "\"");
  }
}

const ImageRecord* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

const ImageRecord& Corpus::at(std::string_view id) const {
  if (const auto* r = find(id)) return *r;
  throw ValidationError("unknown image id \"" + std::string(id) + "\"");
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Corpus::systems() const {
  std::set<std::string> s;
  for (const auto& r : records_) s.insert(r.system);
  return {s.begin(), s.end()};
}

std::map<std::string, std::size_t> Corpus::count_by_system() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records_) ++counts[r.system];
  return counts;
}

std::filesystem::path Corpus::resolve(const ImageRecord& r) const {
  if (r.file.is_absolute() || base_dir_.empty()) return r.file;
  return base_dir_ / r.file;
}

void Corpus::validate_files() const {
  for (const auto& r : records_) {
    if (!std::filesystem::exists(resolve(r))) {
      throw ValidationError("image file for \"" + r.id + "\" not found: " + resolve(r).string());
    }
  }
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::optional<std::string> optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ValidationError(std::string("field \"") + key + "\" must be a string");
  std::string s = it->get<std::string>();
  if (s.empty() || s == "unspecified") return std::nullopt;
  return s;
}

std::string required_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw ValidationError(std::string("missing \"") + key + "\" field");
  if (!it->is_string()) throw ValidationError(std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

ImageRecord record_from_json(const json& obj) {
  if (!obj.is_object()) throw ValidationError("record is not an object");
  ImageRecord r;
  r.id = required_string(obj, "id");
  r.file = required_string(obj, "file");
  r.system = required_string(obj, "system");
  PromptSpec p;
  p.kind = parse_prompt_kind(required_string(obj, "prompt_kind"));
  p.gender = parse_gender(optional_string(obj, "gender").value_or(""));
  p.ethnicity = optional_string(obj, "ethnicity");
  p.adjective = optional_string(obj, "adjective");
  p.profession = optional_string(obj, "profession");
  if (p.adjective) p.coding = adjective_coding(*p.adjective);
  p.validate();
  r.prompt = std::move(p);
  if (auto it = obj.find("seed"); it != obj.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0 ||
        it->get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
      throw ValidationError("\"seed\" must be a non-negative integer");
    }
    r.seed_index = it->get<std::uint32_t>();
  }
  return r;
}

json record_to_json(const ImageRecord& r) {
  json obj = json::object();
  obj["id"] = r.id;
  obj["file"] = r.file.generic_string();
  obj["system"] = r.system;
  obj["prompt_kind"] = std::string(to_string(r.prompt.kind));
  if (r.prompt.gender != Gender::Unspecified) obj["gender"] = std::string(gender_term(r.prompt.gender));
  if (r.prompt.ethnicity) obj["ethnicity"] = *r.prompt.ethnicity;
  if (r.prompt.adjective) obj["adjective"] = *r.prompt.adjective;
  if (r.prompt.profession) obj["profession"] = *r.prompt.profession;
  obj["seed"] = r.seed_index;
  return obj;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

constexpr std::string_view kCorpusDbFormat = "tti-corpus-db";

}  // namespace

Corpus parse_manifest(std::istream& in, std::filesystem::path base_dir) {
  std::vector<ImageRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    if (obj.is_object() && obj.value("format", "") == kCorpusDbFormat) continue;
    try {
      auto r = record_from_json(obj);
      if (!ids.insert(r.id).second) throw ValidationError("duplicate id \"" + r.id + "\"");
      records.push_back(std::move(r));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return Corpus(std::move(records), std::move(base_dir));
}

Corpus load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  return parse_manifest(in, path.parent_path());
}

void write_manifest(const Corpus& corpus, std::ostream& out) {
  for (const auto& r : corpus.records()) out << record_to_json(r).dump() << '\n';
}

void save_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_manifest(corpus, out);
}

// ---------------------------------------------------------------------------
// BLS

std::string_view to_string(BlsKey k) { return k == BlsKey::PctWomen ? "pct_women" : "pct_black"; }

BlsKey parse_bls_key(std::string_view s) {
  if (s == "pct_women") return BlsKey::PctWomen;
  if (s == "pct_black") return BlsKey::PctBlack;
  throw ValidationError("unknown BLS key \"" + std::string(s) + "\"");
}

BlsTable::BlsTable(std::vector<BlsRow> rows) : rows_(std::move(rows)) {
  std::set<std::string_view> seen;
  for (const auto& r : rows_) {
    if (r.profession.empty()) throw ValidationError("BLS row with empty profession");
    if (!seen.insert(r.profession).second) {
      throw ValidationError("duplicate BLS profession \"" + r.profession + "\"");
    }
    for (double v : {r.pct_women, r.pct_black}) {
      if (!(v >= 0.0 && v <= 100.0)) {
        throw ValidationError("BLS percentage out of range [0,100] for \"" + r.profession + "\"");
      }
    }
  }
}

const BlsRow* BlsTable::find(std::string_view profession) const {
  auto it = std::find_if(rows_.begin(), rows_.end(),
                         [&](const BlsRow& r) { return r.profession == profession; });
  return it == rows_.end() ? nullptr : &*it;
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(cur));
  return fields;
}

double parse_percentage(const std::string& s, std::size_t line_no) {
  auto first = s.data();
  auto last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  double v = 0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    throw ParseError("not a number: \"" + s + "\"", line_no);
  }
  return v;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

BlsTable parse_bls(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) header = split_csv_line(line, line_no);
  }
  if (header.empty()) throw ParseError("BLS file is empty");
  auto column = [&](std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing column \"" + std::string(name) + "\"", 1);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_prof = column("profession");
  const auto c_women = column("pct_women");
  const auto c_black = column("pct_black");

  std::vector<BlsRow> rows;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto f = split_csv_line(line, line_no);
    if (f.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(f.size()), line_no);
    }
    BlsRow r{f[c_prof], parse_percentage(f[c_women], line_no), parse_percentage(f[c_black], line_no)};
    if (r.profession.empty()) throw ParseError("empty profession", line_no);
    if (!seen.insert(r.profession).second) {
      throw ParseError("duplicate profession \"" + r.profession + "\"", line_no);
    }
    for (double v : {r.pct_women, r.pct_black}) {
      if (!(v >= 0.0 && v <= 100.0)) throw ParseError("percentage out of range [0,100]", line_no);
    }
    rows.push_back(std::move(r));
  }
  return BlsTable(std::move(rows));
}

BlsTable load_bls(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open BLS file: " + path.string());
  return parse_bls(in);
}

void write_bls(const BlsTable& table, std::ostream& out) {
  out << "profession,pct_women,pct_black\n";
  for (const auto& r : table.rows()) {
    out << csv_quote(r.profession) << ',' << r.pct_women << ',' << r.pct_black << '\n';
  }
}

// ---------------------------------------------------------------------------
// Corpus database

void save_corpus_db(const std::filesystem::path& path, const Corpus& corpus,
                    const std::optional<BlsTable>& bls) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  json header = {{"format", kCorpusDbFormat},
                 {"version", 1},
                 {"base_dir", std::filesystem::absolute(corpus.base_dir()).lexically_normal().generic_string()},
                 {"records", corpus.size()}};
  if (bls) {
    json rows = json::array();
    for (const auto& r : bls->rows()) {
      rows.push_back({{"profession", r.profession}, {"pct_women", r.pct_women}, {"pct_black", r.pct_black}});
    }
    header["bls"] = std::move(rows);
  }
  out << header.dump() << '\n';
  write_manifest(corpus, out);
}

CorpusDb load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  std::string first;
  std::getline(in, first);
  CorpusDb db;
  std::filesystem::path base = path.parent_path();
  json header;
  try {
    header = json::parse(first);
  } catch (const json::parse_error&) {
  }
  if (header.is_object() && header.value("format", "") == kCorpusDbFormat) {
    if (header.value("version", 0) != 1) throw FormatError("unsupported corpus db version");
    base = header.value("base_dir", base.string());
    if (auto it = header.find("bls"); it != header.end()) {
      std::vector<BlsRow> rows;
      for (const auto& r : *it) {
        rows.push_back({r.at("profession").get<std::string>(), r.at("pct_women").get<double>(),
                        r.at("pct_black").get<double>()});
      }
      db.bls = BlsTable(std::move(rows));
    }
  }
  in.clear();
  in.seekg(0);
  db.corpus = parse_manifest(in, base);
  return db;
}

}  // namespace tti
