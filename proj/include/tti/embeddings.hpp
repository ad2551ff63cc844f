#pragma once

// Dense image embeddings (EMB1 files) and caption/VQA annotations.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tti {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row i holds the embedding of image ids[i]. Rows have unit L2 norm.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Validates shape, uniqueness and finiteness. Rows are normalized when
  /// their norm is off by more than 1e-6; a zero row is rejected.
  EmbeddingMatrix(std::vector<std::string> ids, RowMatrixXf rows);

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const RowMatrixXf& rows() const noexcept { return rows_; }
  Eigen::Index count() const noexcept { return rows_.rows(); }
  Eigen::Index dim() const noexcept { return rows_.cols(); }
  std::optional<Eigen::Index> row_of(const std::string& id) const;

  /// Rows for the given ids, in that order. Throws on unknown ids.
  EmbeddingMatrix select(const std::vector<std::string>& ids) const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.ids_ == b.ids_ && a.rows_.rows() == b.rows_.rows() && a.rows_.cols() == b.rows_.cols() &&
           a.rows_ == b.rows_;
  }

 private:
  std::vector<std::string> ids_;
  RowMatrixXf rows_;
};

/// Scales `v` to unit norm; throws ValidationError("degenerate embedding") for
/// a zero or non-finite vector.
void normalize_embedding(Eigen::Ref<Eigen::RowVectorXf> v);

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
std::vector<char> encode_embeddings(const EmbeddingMatrix& m);
EmbeddingMatrix decode_embeddings(std::vector<char> bytes, const std::string& what = "EMB1");

enum class QuestionKey { Appearance, Gender, Ethnicity };
std::string_view to_string(QuestionKey q);
QuestionKey parse_question_key(std::string_view s);
/// The natural-language question sent to the VQA model.
std::string_view question_text(QuestionKey q);

/// Answer stored when a constrained answer falls outside its vocabulary.
inline constexpr std::string_view kUnresolved = "UNRESOLVED";

enum class AnnotationSource { Remote, File };

struct Annotation {
  std::string image_id;
  std::string caption;
  std::map<QuestionKey, std::string> vqa;
  AnnotationSource source = AnnotationSource::File;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

std::vector<Annotation> parse_annotations(std::istream& in);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);
void write_annotations(const std::vector<Annotation>& anns, std::ostream& out);
void save_annotations(const std::vector<Annotation>& anns, const std::filesystem::path& path);

}  // namespace tti
