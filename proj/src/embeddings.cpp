#include "tti/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "tti/binary_io.hpp"
#include "tti/error.hpp"

namespace tti {

using nlohmann::json;

void normalize_embedding(Eigen::Ref<Eigen::RowVectorXf> v) {
  if (!v.allFinite()) throw ValidationError("degenerate embedding: non-finite entries");
  const double norm = v.cast<double>().norm();
  if (norm == 0.0) throw ValidationError("degenerate embedding: zero vector");
  v = (v.cast<double>() / norm).cast<float>();
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, RowMatrixXf rows)
    : ids_(std::move(ids)), rows_(std::move(rows)) {
  if (static_cast<Eigen::Index>(ids_.size()) != rows_.rows()) {
    throw ValidationError("embedding ids/rows count mismatch");
  }
  if (rows_.rows() > 0 && rows_.cols() == 0) throw ValidationError("embedding dimension must be positive");
  std::set<std::string_view> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw ValidationError("duplicate embedding id \"" + id + "\"");
  }
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    auto row = rows_.row(i);
    if (!row.allFinite()) throw ValidationError("embedding row \"" + ids_[i] + "\" has NaN or Inf entries");
    const double norm = row.cast<double>().norm();
    if (std::abs(norm - 1.0) > 1e-6) {
      try {
        normalize_embedding(row);
      } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + " (row \"" + ids_[i] + "\")");
      }
    }
  }
}

std::optional<Eigen::Index> EmbeddingMatrix::row_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

EmbeddingMatrix EmbeddingMatrix::select(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string_view, Eigen::Index> index;
  for (std::size_t i = 0; i < ids_.size(); ++i) index.emplace(ids_[i], static_cast<Eigen::Index>(i));
  RowMatrixXf out(static_cast<Eigen::Index>(ids.size()), dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = index.find(ids[i]);
    if (it == index.end()) throw ValidationError("no embedding for image \"" + ids[i] + "\"");
    out.row(static_cast<Eigen::Index>(i)) = rows_.row(it->second);
  }
  return EmbeddingMatrix(ids, std::move(out));
}

std::vector<char> encode_embeddings(const EmbeddingMatrix& m) {
  io::ByteWriter w;
  w.magic("EMB1");
  w.u32(static_cast<std::uint32_t>(m.count()));
  w.u32(static_cast<std::uint32_t>(m.dim()));
  for (const auto& id : m.ids()) w.short_string(id);
  for (Eigen::Index i = 0; i < m.count(); ++i) {
    for (Eigen::Index j = 0; j < m.dim(); ++j) w.f32(m.rows()(i, j));
  }
  return w.bytes();
}

EmbeddingMatrix decode_embeddings(std::vector<char> bytes, const std::string& what) {
  io::ByteReader r(std::move(bytes), what);
  r.expect_magic("EMB1");
  const auto count = r.u32();
  const auto dim = r.u32();
  if (count > 0 && dim == 0) throw FormatError(what + ": zero embedding dimension");
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) ids.push_back(r.short_string());
  r.require(std::size_t{count} * dim * 4, "embedding payload");
  RowMatrixXf rows(count, dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) {
      const float v = r.f32();
      if (!std::isfinite(v)) {
        throw FormatError(what + ": non-finite value in row " + std::to_string(i));
      }
      rows(i, j) = v;
    }
  }
  r.expect_end();
  return EmbeddingMatrix(std::move(ids), std::move(rows));
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  auto bytes = encode_embeddings(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(io::read_file_bytes(path), path.string());
}

std::string_view to_string(QuestionKey q) {
  switch (q) {
    case QuestionKey::Appearance: return "appearance";
    case QuestionKey::Gender: return "gender";
    case QuestionKey::Ethnicity: return "ethnicity";
  }
  return "appearance";
}

QuestionKey parse_question_key(std::string_view s) {
  if (s == "appearance") return QuestionKey::Appearance;
  if (s == "gender") return QuestionKey::Gender;
  if (s == "ethnicity") return QuestionKey::Ethnicity;
  throw ValidationError("unknown question key \"" + std::string(s) + "\"");
}

std::string_view question_text(QuestionKey q) {
  switch (q) {
    case QuestionKey::Appearance: return "What word best describes this person's appearance?";
    case QuestionKey::Gender: return "What word best describes this person's gender?";
    case QuestionKey::Ethnicity: return "What word best describes this person's ethnicity?";
  }
  return "";
}

std::vector<Annotation> parse_annotations(std::istream& in) {
  std::vector<Annotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto obj = json::parse(line);
      Annotation a;
      a.image_id = obj.at("image_id").get<std::string>();
      a.caption = obj.value("caption", "");
      a.source = AnnotationSource::File;
      if (auto it = obj.find("vqa"); it != obj.end() && it->is_object()) {
        for (const auto& [k, v] : it->items()) {
          if (v.is_null()) continue;
          a.vqa[parse_question_key(k)] = v.get<std::string>();
        }
      }
      out.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed annotation: ") + e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations: " + path.string());
  return parse_annotations(in);
}

void write_annotations(const std::vector<Annotation>& anns, std::ostream& out) {
  for (const auto& a : anns) {
    json vqa = json::object();
    for (const auto& [k, v] : a.vqa) vqa[std::string(to_string(k))] = v;
    json obj = {{"image_id", a.image_id}, {"caption", a.caption}, {"vqa", vqa}};
    out << obj.dump() << '\n';
  }
}

void save_annotations(const std::vector<Annotation>& anns, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_annotations(anns, out);
}

}  // namespace tti
