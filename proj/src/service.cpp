#include "tti/service.hpp"

#include <charconv>
#include <set>

#include <httplib.h>

#include "tti/binary_io.hpp"
#include "tti/error.hpp"
#include "tti/pipeline.hpp"
#include "tti/reports.hpp"

namespace tti {

namespace {

struct HttpError : std::runtime_error {
  HttpError(int status, const std::string& what) : std::runtime_error(what), status(status) {}
  int status;
};

Response json_response(const json& body, int status = 200) {
  Response r;
  r.status = status;
  r.body = body.dump();
  return r;
}

Response error_response(int status, const std::string& message) {
  return json_response({{"error", {{"status", status}, {"message", message}}}}, status);
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const auto j = path.find('/', i);
    const auto end = j == std::string_view::npos ? path.size() : j;
    if (end > i) out.push_back(path.substr(i, end - i));
    i = end;
  }
  return out;
}

std::optional<std::string> param(const HttpParams& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) return std::nullopt;
  return it->second;
}

long parse_int(std::string_view s, const char* name, long lo, long hi) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < lo || v > hi) {
    throw HttpError(400, std::string("invalid ") + name + " \"" + std::string(s) + "\"");
  }
  return v;
}

long int_param(const HttpParams& p, const std::string& key, long fallback, long lo, long hi) {
  const auto v = param(p, key);
  return v ? parse_int(*v, key.c_str(), lo, hi) : fallback;
}

json page(const std::vector<std::string>& ids, long offset, long limit) {
  const auto b = std::min<std::size_t>(ids.size(), static_cast<std::size_t>(offset));
  const auto e = std::min<std::size_t>(ids.size(), b + static_cast<std::size_t>(limit));
  return {{"total", ids.size()},
          {"offset", offset},
          {"limit", limit},
          {"ids", std::vector<std::string>(ids.begin() + b, ids.begin() + e)}};
}

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".ppm") return "image/x-portable-pixmap";
  return "application/octet-stream";
}

json load_json(const std::filesystem::path& p) {
  const auto bytes = io::read_file_bytes(p);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> filter_images(const Corpus& corpus, const ImageFilter& f) {
  std::vector<std::string> out;
  for (const auto& r : corpus.records()) {
    if (f.system && r.system != *f.system) continue;
    if (f.profession && r.prompt.profession != *f.profession) continue;
    if (f.gender && gender_phrase(r.prompt.gender) != *f.gender) continue;
    if (f.ethnicity && r.prompt.ethnicity_phrase() != *f.ethnicity) continue;
    out.push_back(r.id);
  }
  return out;
}

void ServiceState::validate() const {
  for (const auto& id : graph.ids()) {
    if (!corpus.find(id)) throw ValidationError("index references unknown image \"" + id + "\"");
  }
  if (vectors.ids != graph.ids()) throw ValidationError("vectors and index list different images");
  for (const auto& [id, _] : colorfulness) {
    if (!corpus.find(id)) throw ValidationError("colorfulness references unknown image \"" + id + "\"");
  }
  for (const auto& [id, c] : assignments) {
    if (!corpus.find(id)) throw ValidationError("assignment references unknown image \"" + id + "\"");
    if (c >= model.n_clusters) throw ValidationError("assignment of \"" + id + "\" to unknown cluster");
  }
  for (const auto& id : model.ids) {
    if (!corpus.find(id)) throw ValidationError("cluster model references unknown image \"" + id + "\"");
  }
  if (regions.size() != model.n_clusters) throw ValidationError("region summaries do not match the cluster model");
}

ServiceState load_service_state(const ServiceInputs& in) {
  auto need = [](const std::filesystem::path& p, const std::string& what) {
    if (p.empty() || !std::filesystem::exists(p)) {
      throw ValidationError("missing artifact: " + what + " (" + p.string() + ")");
    }
    return p;
  };
  ServiceState s;
  s.corpus = load_corpus(need(in.corpus, "corpus")).corpus;
  s.vectors = load_vectors(need(in.index_dir / kVectorsFile, "vectors"));
  s.graph = load_graph(need(in.index_dir / kGraphFile, "knn index"));
  s.colorfulness = load_colorfulness(
      need(in.colorfulness.empty() ? in.index_dir / kColorfulnessFile : in.colorfulness, "colorfulness scores"));
  s.model = load_model(need(in.bundle / "model.clm", "cluster model"));
  const json regions = load_json(need(in.bundle / "regions.json", "region summaries"));
  for (const auto& r : regions.at("regions")) s.regions.push_back(region_from_json(r));
  const json assignments = load_json(need(in.bundle / "assignments.json", "assignments"));
  s.assignments = assignments.at("assignments").get<std::map<std::string, std::uint32_t>>();
  for (const char* name : {"diversity", "quintiles", "markers", "regions", "provenance"}) {
    const auto p = in.bundle / (std::string(name) + ".json");
    if (std::filesystem::exists(p)) s.reports[name] = load_json(p);
  }
  s.validate();
  return s;
}

struct Service::Impl {
  httplib::Server server;
};

Service::Service(std::shared_ptr<const ServiceState> state, ServiceOptions options)
    : state_(std::move(state)), options_(std::move(options)), impl_(std::make_shared<Impl>()) {
  if (!state_) throw ValidationError("service state is required");
}

Response Service::handle(std::string_view path, const HttpParams& params) const {
  const ServiceState& s = *state_;
  const auto parts = split_path(path);
  Response res;
  try {
    const long limit_max = 100000;
    if (parts.size() == 2 && parts[0] == "images") {
      const auto* r = s.corpus.find(parts[1]);
      if (!r) throw HttpError(404, "unknown image id \"" + std::string(parts[1]) + "\"");
      const auto file = s.corpus.resolve(*r);
      const auto bytes = io::read_file_bytes(file);
      res.content_type = content_type_for(file);
      res.body.assign(bytes.begin(), bytes.end());
    } else if (parts.size() == 1 && parts[0] == "images") {
      ImageFilter f{param(params, "system"), param(params, "profession"), param(params, "gender"),
                    param(params, "ethnicity")};
      res = json_response(page(filter_images(s.corpus, f), int_param(params, "offset", 0, 0, limit_max),
                               int_param(params, "limit", options_.default_limit, 1, limit_max)));
    } else if (parts.size() == 1 && parts[0] == "knn") {
      const auto id = param(params, "id");
      if (!id || id->empty()) throw HttpError(400, "missing id");
      const std::string by = param(params, "by").value_or("bovw");
      const int k = static_cast<int>(int_param(params, "k", options_.default_k, 1, limit_max));
      json out = {{"id", *id}, {"by", by}, {"k", k}};
      if (by == "bovw") {
        if (!s.graph.index_of(*id)) throw HttpError(404, "unknown image id \"" + *id + "\"");
        if (static_cast<std::size_t>(k) >= s.graph.size()) throw HttpError(400, "k too large");
        QueryParams q;
        q.k = k;
        out["neighbors"] = to_json(query(s.graph, s.vectors, *id, q));
      } else if (by == "colorfulness") {
        if (!s.colorfulness.count(*id)) throw HttpError(404, "unknown image id \"" + *id + "\"");
        if (static_cast<std::size_t>(k) >= s.colorfulness.size()) throw HttpError(400, "k too large");
        json n = json::array();
        for (const auto& nid : colorfulness_neighbors(s.colorfulness, *id, k)) {
          n.push_back({{"id", nid}, {"score", s.colorfulness.at(nid)}});
        }
        out["neighbors"] = n;
      } else {
        throw HttpError(400, "by must be bovw or colorfulness");
      }
      res = json_response(out);
    } else if (parts.size() == 1 && parts[0] == "clusters") {
      res = json_response({{"n_clusters", s.model.n_clusters}, {"regions", to_json(s.regions)}});
    } else if (parts.size() == 3 && parts[0] == "clusters" && parts[2] == "examples") {
      const long c = parse_int(parts[1], "cluster index", 0, limit_max);
      if (c >= static_cast<long>(s.model.n_clusters)) throw HttpError(404, "unknown cluster " + std::string(parts[1]));
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < s.model.ids.size(); ++i) {
        if (s.model.labels[i] == static_cast<std::uint32_t>(c)) ids.push_back(s.model.ids[i]);
      }
      json out = page(ids, int_param(params, "offset", 0, 0, limit_max),
                      int_param(params, "limit", options_.default_limit, 1, limit_max));
      out["cluster"] = c;
      res = json_response(out);
    } else if (parts.size() == 3 && parts[0] == "professions" && parts[2] == "distribution") {
      ImageFilter f;
      f.profession = std::string(parts[1]);
      f.system = param(params, "system");
      const auto ids = filter_images(s.corpus, {std::nullopt, f.profession, std::nullopt, std::nullopt});
      if (ids.empty()) throw HttpError(404, "unknown profession \"" + *f.profession + "\"");
      const auto selected = filter_images(s.corpus, f);
      std::size_t assigned = 0;
      for (const auto& id : selected) assigned += s.assignments.count(id);
      res = json_response({{"profession", *f.profession},
                           {"system", f.system ? json(*f.system) : json(nullptr)},
                           {"images", assigned},
                           {"shares", cluster_distribution(s.assignments, selected, s.model.n_clusters)}});
    } else if (parts.size() == 1 && parts[0] == "compare") {
      const auto systems = param(params, "systems");
      const auto profession = param(params, "profession");
      if (!systems || systems->empty()) throw HttpError(400, "missing systems");
      if (!profession || profession->empty()) throw HttpError(400, "missing profession");
      std::vector<std::string> names;
      for (std::size_t i = 0; i <= systems->size();) {
        const auto j = std::min(systems->find(',', i), systems->size());
        if (j == i) throw HttpError(400, "empty system name in \"" + *systems + "\"");
        names.push_back(systems->substr(i, j - i));
        i = j + 1;
      }
      const long offset = int_param(params, "offset", 0, 0, limit_max);
      const long limit = int_param(params, "limit", options_.default_limit, 1, limit_max);
      json lists = json::object();
      for (const auto& n : names) lists[n] = page(filter_images(s.corpus, {n, *profession, {}, {}}), offset, limit);
      res = json_response({{"profession", *profession}, {"systems", lists}});
    } else if (parts.size() == 2 && parts[0] == "reports") {
      auto it = s.reports.find(std::string(parts[1]));
      if (it == s.reports.end()) throw HttpError(404, "no report \"" + std::string(parts[1]) + "\" in the bundle");
      res = json_response(it->second);
    } else {
      throw HttpError(404, "no route for " + std::string(path));
    }
  } catch (const HttpError& e) {
    res = error_response(e.status, e.what());
  } catch (const NotFoundError& e) {
    res = error_response(404, e.what());
  } catch (const ValidationError& e) {
    res = error_response(400, e.what());
  } catch (const std::exception& e) {
    res = error_response(500, e.what());
  }
  if (!options_.cors_origin.empty()) res.headers["Access-Control-Allow-Origin"] = options_.cors_origin;
  return res;
}

void Service::listen(const std::string& host, int port, const std::function<void(int)>& on_bound) {
  auto& srv = impl_->server;
  srv.Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& out) {
    HttpParams params(req.params.begin(), req.params.end());
    const Response r = handle(req.path, params);
    out.status = r.status;
    for (const auto& [k, v] : r.headers) out.set_header(k, v);
    out.set_content(r.body, r.content_type);
  });
  auto method_not_allowed = [](const httplib::Request&, httplib::Response& out) {
    out.status = 405;
    out.set_content(R"({"error":{"status":405,"message":"read-only API"}})", "application/json");
  };
  srv.Post(R"(/.*)", method_not_allowed);
  srv.Put(R"(/.*)", method_not_allowed);
  srv.Delete(R"(/.*)", method_not_allowed);
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  if (on_bound) on_bound(bound);
  srv.listen_after_bind();
}

void Service::stop() { impl_->server.stop(); }

}  // namespace tti
