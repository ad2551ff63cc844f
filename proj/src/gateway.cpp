#include "tti/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <optional>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tti/binary_io.hpp"
#include "tti/error.hpp"
#include "tti/parallel.hpp"

namespace tti {

using nlohmann::json;

namespace {

// Thrown for 4xx responses; never retried.
struct RejectedRequest : GatewayError {
  using GatewayError::GatewayError;
};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n.");
  return std::string(s.substr(b, e - b + 1));
}

class Session {
 public:
  Session(const std::string& scheme_host_port, std::string base_path, const GatewayOptions& opt)
      : client_(scheme_host_port), base_path_(std::move(base_path)), opt_(opt), where_(scheme_host_port) {
    const auto ms = opt.timeout.count();
    client_.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
    client_.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
    client_.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
  }

  json post(const std::string& route, const json& body) {
    const std::string path = base_path_ + route;
    const std::string payload = body.dump();
    std::string last_error;
    auto delay = opt_.backoff;
    for (unsigned attempt = 1; attempt <= std::max(1u, opt_.attempts); ++attempt) {
      auto res = client_.Post(path, payload, "application/json");
      if (!res) {
        last_error = "network error: " + httplib::to_string(res.error());
      } else if (res->status >= 400 && res->status < 500) {
        throw RejectedRequest("endpoint " + where_ + path + " rejected request with HTTP " +
                              std::to_string(res->status) + ": " + res->body.substr(0, 200));
      } else if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
      } else {
        try {
          return json::parse(res->body);
        } catch (const json::parse_error&) {
          last_error = "malformed JSON response from " + path;
        }
      }
      if (attempt < opt_.attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
    throw GatewayError(where_ + path + ": " + last_error + " after " + std::to_string(opt_.attempts) +
                       " attempts");
  }

 private:
  httplib::Client client_;
  std::string base_path_;
  const GatewayOptions& opt_;
  std::string where_;
};

std::string encode_image(const Corpus& corpus, const ImageRecord& rec) {
  auto bytes = io::read_file_bytes(corpus.resolve(rec));
  return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

}  // namespace

Constraints default_constraints() {
  Constraints c;
  for (auto g : constrained_genders()) c[QuestionKey::Gender].emplace_back(g);
  for (auto e : constrained_ethnicities()) c[QuestionKey::Ethnicity].emplace_back(e);
  return c;
}

std::string constrain_answer(std::string_view answer, std::span<const std::string> allowed) {
  const std::string a = trim(answer);
  for (const auto& w : allowed) {
    if (iequals(a, w)) return w;
  }
  return std::string(kUnresolved);
}

InferenceGateway::InferenceGateway(GatewayOptions options) : options_(std::move(options)) {
  const auto& ep = options_.endpoint;
  const auto scheme = ep.find("://");
  if (scheme == std::string::npos) throw ValidationError("endpoint must be an http:// URL: " + ep);
  const auto path = ep.find('/', scheme + 3);
  scheme_host_port_ = ep.substr(0, path);
  if (path != std::string::npos) {
    base_path_ = ep.substr(path);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  }
}

AnnotationBatch InferenceGateway::fetch_annotations(const Corpus& corpus,
                                                    std::span<const QuestionKey> questions,
                                                    const Constraints& constraints) const {
  const auto& records = corpus.records();
  std::vector<std::optional<Annotation>> results(records.size());
  std::vector<std::optional<std::string>> errors(records.size());

  parallel_for(records.size(), options_.parallelism, [&](std::size_t i) {
    const auto& rec = records[i];
    Session session(scheme_host_port_, base_path_, options_);
    try {
      const std::string image = encode_image(corpus, rec);
      Annotation a;
      a.image_id = rec.id;
      a.source = AnnotationSource::Remote;
      a.caption = session.post("/caption", {{"image", image}}).at("text").get<std::string>();
      for (QuestionKey q : questions) {
        json req = {{"image", image}, {"question", question_text(q)}};
        auto allowed = constraints.find(q);
        if (allowed != constraints.end()) req["allowed"] = allowed->second;
        auto answer = session.post("/vqa", req).at("answer").get<std::string>();
        a.vqa[q] = allowed == constraints.end() ? answer : constrain_answer(answer, allowed->second);
      }
      results[i] = std::move(a);
    } catch (const RejectedRequest&) {
      throw;
    } catch (const GatewayError& e) {
      errors[i] = e.what();
    } catch (const IoError& e) {
      errors[i] = e.what();
    } catch (const json::exception& e) {
      errors[i] = std::string("unexpected response shape: ") + e.what();
    }
  });

  AnnotationBatch batch;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (results[i]) batch.annotations.push_back(std::move(*results[i]));
    if (errors[i]) batch.failures.push_back({records[i].id, *errors[i]});
  }
  return batch;
}

EmbeddingMatrix InferenceGateway::fetch_embeddings(const Corpus& corpus, QuestionKey question) const {
  const auto& records = corpus.records();
  std::vector<std::vector<float>> vectors(records.size());

  parallel_for(records.size(), options_.parallelism, [&](std::size_t i) {
    Session session(scheme_host_port_, base_path_, options_);
    const auto& rec = records[i];
    json res = session.post("/embed", {{"image", encode_image(corpus, rec)}, {"question", question_text(question)}});
    try {
      vectors[i] = res.at("vector").get<std::vector<float>>();
    } catch (const json::exception& e) {
      throw GatewayError("unexpected /embed response for \"" + rec.id + "\": " + e.what());
    }
  });

  const std::size_t dim = records.empty() ? 0 : vectors.front().size();
  RowMatrixXf rows(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(dim));
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (vectors[i].size() != dim || dim == 0) {
      throw GatewayError("embedding dimension mismatch: \"" + records[i].id + "\" has " +
                         std::to_string(vectors[i].size()) + ", expected " + std::to_string(dim));
    }
    auto row = rows.row(static_cast<Eigen::Index>(i));
    row = Eigen::Map<const Eigen::RowVectorXf>(vectors[i].data(), static_cast<Eigen::Index>(dim));
    try {
      normalize_embedding(row);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " for \"" + records[i].id + "\"");
    }
    ids.push_back(records[i].id);
  }
  return EmbeddingMatrix(std::move(ids), std::move(rows));
}

}  // namespace tti
