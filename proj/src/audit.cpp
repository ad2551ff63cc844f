#include "tti/audit.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>

#include "tti/binary_io.hpp"
#include "tti/clusters.hpp"
#include "tti/corpus.hpp"
#include "tti/embeddings.hpp"
#include "tti/error.hpp"
#include "tti/markers.hpp"
#include "tti/metrics.hpp"
#include "tti/reports.hpp"

namespace tti {

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v, const std::string& key, std::size_t line) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ParseError("config key \"" + key + "\": invalid number \"" + v + "\"", line);
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& key, std::size_t line) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ParseError("config key \"" + key + "\": expected true or false, got \"" + v + "\"", line);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string file_hash(const std::filesystem::path& path) {
  const auto bytes = io::read_file_bytes(path);
  return io::hex64(io::fnv1a64(std::string_view(bytes.data(), bytes.size())));
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json stamp(const AuditConfig& c, std::string_view report) {
  return {{"report", report}, {"config_hash", c.hash()}, {"seeds", c.seeds()}};
}

}  // namespace

std::string AuditConfig::to_text() const {
  std::ostringstream os;
  os << "corpus = " << corpus.generic_string() << "\n"
     << "bls = " << bls.generic_string() << "\n"
     << "embeddings = " << embeddings.generic_string() << "\n"
     << "annotations = " << annotations.generic_string() << "\n"
     << "n_clusters = " << n_clusters << "\n"
     << "diversity_level = " << diversity_level << "\n"
     << "quintile_level = " << quintile_level << "\n"
     << "bootstrap_b = " << bootstrap_b << "\n"
     << "seed = " << seed << "\n"
     << "gender_phrase = " << gender_phrase << "\n"
     << "gender_rank = " << gender_rank << "\n"
     << "ethnicity_phrase = " << ethnicity_phrase << "\n"
     << "ethnicity_rank = " << ethnicity_rank << "\n"
     << "quintiles = " << (quintiles ? "true" : "false") << "\n"
     << "markers = " << (markers ? "true" : "false") << "\n";
  // canonical and workers do not change results and are left out.
  return os.str();
}

std::string AuditConfig::hash() const { return io::hex64(io::fnv1a64(to_text())); }

json AuditConfig::seeds() const { return {{"audit", seed}, {"bootstrap", seed}}; }

AuditConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  AuditConfig c;
  std::string raw;
  std::size_t line = 0;
  auto path_of = [&](const std::string& v) -> std::filesystem::path {
    if (v.empty()) return {};
    std::filesystem::path p(v);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string text = trim(raw);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line);
    const std::string key = trim(std::string_view(text).substr(0, eq));
    std::string value = trim(std::string_view(text).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "corpus") c.corpus = path_of(value);
    else if (key == "bls") c.bls = path_of(value);
    else if (key == "embeddings") c.embeddings = path_of(value);
    else if (key == "annotations") c.annotations = path_of(value);
    else if (key == "n_clusters") c.n_clusters = parse_number<std::uint32_t>(value, key, line);
    else if (key == "diversity_level") c.diversity_level = parse_number<double>(value, key, line);
    else if (key == "quintile_level") c.quintile_level = parse_number<double>(value, key, line);
    else if (key == "bootstrap_b") c.bootstrap_b = parse_number<int>(value, key, line);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(value, key, line);
    else if (key == "gender_phrase") c.gender_phrase = value;
    else if (key == "gender_rank") c.gender_rank = parse_number<std::size_t>(value, key, line);
    else if (key == "ethnicity_phrase") c.ethnicity_phrase = value;
    else if (key == "ethnicity_rank") c.ethnicity_rank = parse_number<std::size_t>(value, key, line);
    else if (key == "quintiles") c.quintiles = parse_bool(value, key, line);
    else if (key == "markers") c.markers = parse_bool(value, key, line);
    else if (key == "canonical") c.canonical = parse_bool(value, key, line);
    else if (key == "workers") c.workers = parse_number<unsigned>(value, key, line);
    else throw ParseError("unknown config key \"" + key + "\"", line);
  }
  return c;
}

AuditConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return parse_config(in, path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void validate_config(const AuditConfig& c) {
  auto need = [](const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw ValidationError(std::string("config: missing required key \"") + key + "\"");
    if (!std::filesystem::exists(p)) {
      throw ValidationError(std::string("config: ") + key + " file not found: " + p.string());
    }
  };
  need(c.corpus, "corpus");
  need(c.embeddings, "embeddings");
  if (!c.annotations.empty()) need(c.annotations, "annotations");
  if (c.n_clusters < 2) throw ValidationError("config: n_clusters must be at least 2");
  for (double level : {c.diversity_level, c.quintile_level}) {
    if (!(level > 0 && level < 1)) throw ValidationError("config: confidence levels must be in (0, 1)");
  }
  if (c.bootstrap_b < 100) throw ValidationError("config: bootstrap_b must be at least 100");
  if (c.gender_rank == 0 || c.ethnicity_rank == 0) throw ValidationError("config: ranks must be positive");
  if (c.quintiles) {
    if (!c.bls.empty()) {
      need(c.bls, "bls");
    } else if (!load_corpus(c.corpus).bls) {
      throw ValidationError("config: quintiles requested but no \"bls\" path is set and the corpus has no BLS table");
    }
  }
}

std::vector<std::string> bundle_files(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

AuditBundle run_audit(const AuditConfig& config, const std::filesystem::path& out_dir) {
  validate_config(config);
  std::filesystem::create_directories(out_dir);

  AuditBundle bundle;
  bundle.dir = out_dir;
  json stages = json::array();
  json inputs = json::object();

  auto write_provenance = [&] {
    json p = stamp(config, "provenance");
    p["tool"] = "tti-audit";
    p["version"] = kToolVersion;
    std::istringstream cfg(config.to_text());
    json cfg_obj = json::object();
    for (std::string l; std::getline(cfg, l);) {
      const auto eq = l.find(" = ");
      cfg_obj[l.substr(0, eq)] = l.substr(eq + 3);
    }
    p["config"] = cfg_obj;
    p["inputs"] = inputs;
    p["stages"] = stages;
    if (!config.canonical) p["created_at"] = now_utc();
    bundle.provenance = p;
    write_json(out_dir / "provenance.json", p);
  };

  auto stage = [&](const std::string& name, const std::function<std::vector<std::string>()>& body) {
    try {
      const auto outputs = body();
      json outs = json::object();
      for (const auto& f : outputs) outs[f] = file_hash(out_dir / f);
      stages.push_back({{"name", name}, {"status", "ok"}, {"outputs", outs}});
    } catch (const std::exception& e) {
      stages.push_back({{"name", name}, {"status", "failed"}, {"error", e.what()}});
      write_provenance();
      throw Error("stage " + name + ": " + e.what());
    }
  };
  auto skip = [&](const std::string& name, const std::string& why) {
    stages.push_back({{"name", name}, {"status", "skipped"}, {"reason", why}});
  };

  CorpusDb db;
  std::vector<std::string> identity_ids, eval_ids;
  std::optional<BlsTable> bls;
  EmbeddingMatrix emb;
  std::vector<Annotation> annotations;
  stage("load", [&] {
    db = load_corpus(config.corpus);
    inputs["corpus"] = {{"path", config.corpus.generic_string()}, {"fnv1a64", file_hash(config.corpus)}};
    emb = load_embeddings(config.embeddings);
    inputs["embeddings"] = {{"path", config.embeddings.generic_string()}, {"fnv1a64", file_hash(config.embeddings)}};
    if (!config.bls.empty()) {
      bls = load_bls(config.bls);
      inputs["bls"] = {{"path", config.bls.generic_string()}, {"fnv1a64", file_hash(config.bls)}};
    } else {
      bls = db.bls;
    }
    if (!config.annotations.empty()) {
      annotations = load_annotations(config.annotations);
      inputs["annotations"] = {{"path", config.annotations.generic_string()},
                               {"fnv1a64", file_hash(config.annotations)}};
    }
    for (const auto& id : emb.ids()) {
      const auto* r = db.corpus.find(id);
      if (!r) throw ValidationError("embedded image \"" + id + "\" is not in the corpus");
      (r->prompt.kind == PromptKind::Identity ? identity_ids : eval_ids).push_back(id);
    }
    return std::vector<std::string>{};
  });
  const Corpus& corpus = db.corpus;

  ClusterModel model;
  stage("cluster", [&] {
    model = ward_cluster(emb.select(identity_ids), config.n_clusters);
    model.provenance = "config=" + config.hash() + ";seed=" + std::to_string(config.seed);
    save_model(model, out_dir / "model.clm");
    return std::vector<std::string>{"model.clm"};
  });

  std::map<std::string, std::uint32_t> assignments = model.assignments();
  std::map<std::string, std::uint32_t> profession_assignments;
  stage("assign", [&] {
    if (!eval_ids.empty()) {
      for (const auto& [id, c] : assign_map(model, emb.select(eval_ids))) {
        assignments[id] = c;
        if (corpus.at(id).prompt.kind == PromptKind::Profession) profession_assignments[id] = c;
      }
    }
    json doc = stamp(config, "assignments");
    doc["n_clusters"] = config.n_clusters;
    doc["model_source_hash"] = model.source_hash;
    doc["assignments"] = assignments;
    write_json(out_dir / "assignments.json", doc);
    return std::vector<std::string>{"assignments.json"};
  });

  // Images of one prompt kind per system, in corpus order.
  auto by_system = [&](PromptKind kind) {
    std::map<std::string, std::vector<std::uint32_t>> out;
    for (const auto& r : corpus.records()) {
      if (r.prompt.kind != kind) continue;
      auto it = assignments.find(r.id);
      if (it != assignments.end()) out[r.system].push_back(it->second);
    }
    return out;
  };

  std::vector<RegionSummary> regions;
  stage("summarize", [&] {
    regions = summarize_regions(model, corpus, profession_assignments);
    json doc = stamp(config, "regions");
    doc["n_clusters"] = config.n_clusters;
    doc["regions"] = to_json(regions);
    json shares = json::object();
    for (const auto& [system, labels] : by_system(PromptKind::Profession)) {
      std::vector<double> s(config.n_clusters, 0.0);
      for (auto l : labels) s[l] += 1.0 / static_cast<double>(labels.size());
      shares[system] = s;
    }
    doc["profession_shares_by_system"] = shares;
    bundle.regions = doc;
    write_json(out_dir / "regions.json", doc);
    write_text(out_dir / "regions.md", "# Regions\n\n" + regions_markdown(regions) + "\nconfig " + config.hash() +
                                           ", seed " + std::to_string(config.seed) + "\n");
    return std::vector<std::string>{"regions.json", "regions.md"};
  });

  stage("diversity", [&] {
    json doc = stamp(config, "diversity");
    doc["n_clusters"] = config.n_clusters;
    doc["level"] = config.diversity_level;
    doc["bootstrap_b"] = config.bootstrap_b;
    json datasets = json::object();
    const std::pair<const char*, PromptKind> kinds[] = {{"identities", PromptKind::Identity},
                                                        {"professions", PromptKind::Profession},
                                                        {"adjectives", PromptKind::Adjective}};
    BootstrapOptions o{config.diversity_level, config.bootstrap_b, config.seed, config.workers};
    for (const auto& [name, kind] : kinds) {
      json systems = json::object();
      for (const auto& [system, labels] : by_system(kind)) {
        if (labels.size() < 2) continue;
        systems[system] = to_json(diversity_score(labels, config.n_clusters, o));
      }
      if (!systems.empty()) datasets[name] = systems;
    }
    doc["datasets"] = datasets;
    bundle.diversity = doc;
    write_json(out_dir / "diversity.json", doc);
    write_text(out_dir / "diversity.md", diversity_markdown(doc));
    return std::vector<std::string>{"diversity.json", "diversity.md"};
  });

  if (config.quintiles) {
    stage("quintiles", [&] {
      if (!bls) throw ValidationError("no BLS table available");
      ProfessionAssignments pa;
      for (const auto& r : corpus.records()) {
        if (r.prompt.kind != PromptKind::Profession) continue;
        auto it = profession_assignments.find(r.id);
        if (it != profession_assignments.end()) pa[r.system][*r.prompt.profession].push_back(it->second);
      }
      json doc = stamp(config, "quintiles");
      json analyses = json::array();
      BootstrapOptions o{config.quintile_level, config.bootstrap_b, config.seed, config.workers};
      const std::tuple<BlsKey, Attribute, std::string, std::size_t> specs[] = {
          {BlsKey::PctWomen, Attribute::Gender, config.gender_phrase, config.gender_rank},
          {BlsKey::PctBlack, Attribute::Ethnicity, config.ethnicity_phrase, config.ethnicity_rank}};
      for (const auto& [key, attr, phrase, rank] : specs) {
        const auto group = select_region_group(regions, attr, phrase, rank);
        analyses.push_back({{"phrase", phrase},
                            {"attribute", std::string(to_string(attr))},
                            {"rank_max", rank},
                            {"report", to_json(quintile_report(pa, group, *bls, key, o))}});
      }
      doc["analyses"] = analyses;
      bundle.quintiles = doc;
      write_json(out_dir / "quintiles.json", doc);
      write_text(out_dir / "quintiles.md", quintiles_markdown(doc));
      return std::vector<std::string>{"quintiles.json", "quintiles.md"};
    });
  } else {
    skip("quintiles", "disabled in config");
  }

  if (config.markers && !config.annotations.empty()) {
    stage("markers", [&] {
      json doc = stamp(config, "markers");
      doc["woman_markers"] = std::vector<std::string>(woman_markers().begin(), woman_markers().end());
      doc["man_markers"] = std::vector<std::string>(man_markers().begin(), man_markers().end());
      json systems = json::object();
      for (auto src : {MarkerSource::Caption, MarkerSource::VqaAppearance}) {
        for (const auto& [system, stats] : gender_marker_stats(annotations, corpus, src)) {
          systems[system][std::string(to_string(src))] = to_json(stats);
        }
      }
      for (const auto& [system, pct] : profession_mention_by_system(annotations, corpus)) {
        systems[system]["pct_profession_mention"] = pct;
      }
      doc["systems"] = systems;
      bundle.markers = doc;
      write_json(out_dir / "markers.json", doc);
      write_text(out_dir / "markers.md", markers_markdown(doc));
      return std::vector<std::string>{"markers.json", "markers.md"};
    });
  } else {
    skip("markers", config.markers ? "no annotations configured" : "disabled in config");
  }

  write_provenance();
  return bundle;
}

}  // namespace tti
