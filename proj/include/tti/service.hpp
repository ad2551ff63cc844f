#pragma once

// Read-only HTTP view over an audit bundle, the corpus and the k-NN index.
//
//   GET /images/{id}                                   image bytes
//   GET /images?system=&profession=&gender=&ethnicity=&limit=&offset=
//   GET /knn?id=&by=bovw|colorfulness&k=
//   GET /clusters
//   GET /clusters/{i}/examples?limit=&offset=
//   GET /professions/{name}/distribution?system=
//   GET /compare?systems=s1,s2&profession=p&limit=&offset=
//   GET /reports/{diversity|quintiles|markers|regions|provenance}

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tti/clusters.hpp"
#include "tti/corpus.hpp"
#include "tti/knn_graph.hpp"

namespace tti {

struct ImageFilter {
  std::optional<std::string> system;
  std::optional<std::string> profession;
  std::optional<std::string> gender;     ///< woman, man, non-binary or unspecified
  std::optional<std::string> ethnicity;  ///< phrase or "unspecified"
};

/// Ids of matching records in corpus order.
std::vector<std::string> filter_images(const Corpus& corpus, const ImageFilter& filter);

struct ServiceState {
  Corpus corpus;
  KnnGraph graph;
  VectorSet vectors;
  std::map<std::string, double> colorfulness;
  ClusterModel model;
  std::vector<RegionSummary> regions;
  std::map<std::string, std::uint32_t> assignments;
  std::map<std::string, nlohmann::json> reports;

  /// Throws ValidationError naming the first dangling reference.
  void validate() const;
};

struct ServiceInputs {
  std::filesystem::path bundle;
  std::filesystem::path corpus;
  std::filesystem::path index_dir;     ///< holds vectors.spv and index.knn
  std::filesystem::path colorfulness;  ///< defaults to <index_dir>/colorfulness.csv
};

/// Loads and validates every artifact; a missing file raises ValidationError
/// naming the artifact.
ServiceState load_service_state(const ServiceInputs& inputs);

struct ServiceOptions {
  std::string cors_origin;  ///< empty disables the CORS header
  int default_limit = 60;
  int default_k = 12;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

using HttpParams = std::multimap<std::string, std::string>;

class Service {
 public:
  Service(std::shared_ptr<const ServiceState> state, ServiceOptions options = {});

  /// Routes a GET request. `path` is already percent-decoded.
  Response handle(std::string_view path, const HttpParams& params) const;

  /// Binds and serves until stop(). Port 0 picks a free port; the bound
  /// port is returned through `on_bound` before the accept loop starts.
  void listen(const std::string& host, int port, const std::function<void(int)>& on_bound = {});
  void stop();

 private:
  struct Impl;
  std::shared_ptr<const ServiceState> state_;
  ServiceOptions options_;
  std::shared_ptr<Impl> impl_;
};

}  // namespace tti
