#pragma once

// HTTP boundary to the external captioning, VQA and embedding models.
//
// Any backend must serve:
//   POST /caption {image: base64}                       -> {text}
//   POST /vqa     {image, question, allowed?: [string]} -> {answer}
//   POST /embed   {image, question}                     -> {vector: [f32]}

#include <chrono>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tti/corpus.hpp"
#include "tti/embeddings.hpp"

namespace tti {

struct GatewayOptions {
  /// Base URL, e.g. "http://127.0.0.1:9000" or "http://host:9000/api".
  std::string endpoint;
  unsigned parallelism = 8;
  unsigned attempts = 3;
  std::chrono::milliseconds backoff{250};
  std::chrono::milliseconds timeout{30000};
};

/// Allowed answer lists per constrained question.
using Constraints = std::map<QuestionKey, std::vector<std::string>>;

/// Gender and ethnicity vocabularies used for constrained decoding.
Constraints default_constraints();

/// Returns the vocabulary entry equal to `answer` (ignoring ASCII case), or
/// kUnresolved when there is none.
std::string constrain_answer(std::string_view answer, std::span<const std::string> allowed);

struct ImageFailure {
  std::string image_id;
  std::string message;
};

struct AnnotationBatch {
  /// Successful annotations, in corpus order.
  std::vector<Annotation> annotations;
  std::vector<ImageFailure> failures;
  bool ok() const noexcept { return failures.empty(); }
};

class InferenceGateway {
 public:
  explicit InferenceGateway(GatewayOptions options);

  /// Captions every image and asks each question. Network errors and 5xx
  /// responses are retried with exponential backoff, then recorded as a
  /// per-image failure; a 4xx response aborts the batch with GatewayError.
  AnnotationBatch fetch_annotations(const Corpus& corpus, std::span<const QuestionKey> questions,
                                    const Constraints& constraints) const;

  /// Fetches one embedding per image and L2-normalizes it. Any failure,
  /// including a dimension mismatch between responses, aborts.
  EmbeddingMatrix fetch_embeddings(const Corpus& corpus, QuestionKey question) const;

  const GatewayOptions& options() const noexcept { return options_; }

 private:
  GatewayOptions options_;
  std::string scheme_host_port_;
  std::string base_path_;
};

}  // namespace tti
