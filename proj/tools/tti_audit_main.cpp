#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tti/audit.hpp"
#include "tti/clusters.hpp"
#include "tti/error.hpp"
#include "tti/gateway.hpp"
#include "tti/knn_graph.hpp"
#include "tti/markers.hpp"
#include "tti/pipeline.hpp"
#include "tti/reports.hpp"
#include "tti/service.hpp"

namespace fs = std::filesystem;
using namespace tti;

namespace {

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

void emit(const json& doc, const fs::path& out) {
  if (out.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw IoError("cannot write " + out.string());
  f << doc.dump(2) << "\n";
}

std::map<std::string, std::uint32_t> read_assignments(const fs::path& p) {
  return read_json(p).at("assignments").get<std::map<std::string, std::uint32_t>>();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    const auto j = std::min(s.find(',', i), s.size());
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias audit toolkit for text-to-image corpora"};
  app.require_subcommand(1);
  unsigned workers = 1;
  app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(1u, 256u));

  // ingest
  fs::path manifest, bls_path, corpus_out;
  auto* ingest = app.add_subcommand("ingest", "Validate a manifest and write a corpus database");
  ingest->add_option("--manifest", manifest)->required();
  ingest->add_option("--bls", bls_path);
  ingest->add_option("--out", corpus_out)->required();

  // annotate / embed
  fs::path corpus_path, ann_out, emb_out;
  std::string endpoint, constrain = "gender,ethnicity", question = "appearance";
  unsigned parallelism = 8;
  auto* annotate = app.add_subcommand("annotate", "Caption and question every image through the inference API");
  annotate->add_option("--corpus", corpus_path)->required();
  annotate->add_option("--endpoint", endpoint)->required();
  annotate->add_option("--constrain", constrain, "Constrained questions");
  annotate->add_option("--parallel", parallelism)->check(CLI::Range(1u, 256u));
  annotate->add_option("--out", ann_out)->required();
  auto* embed = app.add_subcommand("embed", "Fetch normalized VQA embeddings");
  embed->add_option("--corpus", corpus_path)->required();
  embed->add_option("--endpoint", endpoint)->required();
  embed->add_option("--question", question)->check(CLI::IsMember({"appearance", "gender", "ethnicity"}));
  embed->add_option("--parallel", parallelism)->check(CLI::Range(1u, 256u));
  embed->add_option("--out", emb_out)->required();

  // features / codebook / vectorize / index / knn
  fs::path feats, codebook_path, vecs, colorfulness_path, out_path;
  int k_words = 1024, k_graph = 20, k_query = 12, max_iter = 100;
  std::uint64_t seed = 17;
  std::string probe, by = "bovw";
  auto* features = app.add_subcommand("features", "Extract SIFT descriptors and colorfulness");
  features->add_option("--corpus", corpus_path)->required();
  features->add_option("--out", feats)->required();
  auto* codebook = app.add_subcommand("codebook", "Train the visual-word codebook");
  codebook->add_option("--feats", feats)->required();
  codebook->add_option("--k", k_words)->check(CLI::Range(2, 1 << 20));
  codebook->add_option("--seed", seed);
  codebook->add_option("--max-iter", max_iter)->check(CLI::Range(1, 100000));
  codebook->add_option("--out", codebook_path);
  auto* vectorize = app.add_subcommand("vectorize", "Write tf-idf vectors for every image");
  vectorize->add_option("--codebook", codebook_path)->required();
  vectorize->add_option("--feats", feats)->required();
  vectorize->add_option("--out", vecs)->required();
  auto* index = app.add_subcommand("index", "Build the NN-descent graph over the vectors");
  index->add_option("--vecs", vecs)->required();
  index->add_option("--k", k_graph)->check(CLI::Range(1, 1000));
  index->add_option("--seed", seed);
  auto* knn = app.add_subcommand("knn", "Nearest neighbors of one image");
  knn->add_option("--vecs", vecs, "Directory with vectors and index");
  knn->add_option("--colorfulness", colorfulness_path);
  knn->add_option("--probe", probe)->required();
  knn->add_option("--k", k_query)->check(CLI::Range(1, 100000));
  knn->add_option("--by", by)->check(CLI::IsMember({"bovw", "colorfulness"}));

  // cluster / assign
  fs::path emb_path, model_path, assignments_path;
  std::uint32_t n_clusters = 24;
  auto* cluster = app.add_subcommand("cluster", "Ward clustering of identity embeddings");
  cluster->add_option("--emb", emb_path)->required();
  cluster->add_option("--n", n_clusters)->check(CLI::Range(2u, 1000000u));
  cluster->add_option("--out", model_path)->required();
  auto* assign_cmd = app.add_subcommand("assign", "Assign embeddings to the nearest cluster");
  assign_cmd->add_option("--model", model_path)->required();
  assign_cmd->add_option("--emb", emb_path)->required();
  assign_cmd->add_option("--out", out_path);

  // reports
  double level = 0.95;
  int resamples = 1000;
  std::string key = "pct_women", group = "woman", kind = "professions";
  std::size_t rank = 2;
  fs::path regions_path, annotations_path;
  auto* diversity = app.add_subcommand("diversity", "Entropy of cluster assignments with a bootstrap interval");
  diversity->add_option("--assignments", assignments_path)->required();
  diversity->add_option("--corpus", corpus_path, "Group by system and prompt kind");
  diversity->add_option("--kind", kind)->check(CLI::IsMember({"identities", "professions", "adjectives"}));
  diversity->add_option("--n", n_clusters)->check(CLI::Range(1u, 1000000u));
  diversity->add_option("--ci", level)->check(CLI::Range(0.0, 1.0));
  diversity->add_option("--b", resamples)->check(CLI::Range(100, 10000000));
  diversity->add_option("--seed", seed);
  diversity->add_option("--out", out_path);
  auto* quintiles = app.add_subcommand("quintiles", "Region-group share per BLS quintile");
  quintiles->add_option("--bls", bls_path, "Defaults to the table stored in the corpus database");
  quintiles->add_option("--key", key)->check(CLI::IsMember({"pct_women", "pct_black"}));
  quintiles->add_option("--group", group, "Prompt phrase selecting the region group");
  quintiles->add_option("--rank", rank, "Phrase must rank within this many entries");
  quintiles->add_option("--regions", regions_path)->required();
  quintiles->add_option("--assignments", assignments_path)->required();
  quintiles->add_option("--corpus", corpus_path)->required();
  quintiles->add_option("--ci", level)->check(CLI::Range(0.0, 1.0));
  quintiles->add_option("--b", resamples)->check(CLI::Range(100, 10000000));
  quintiles->add_option("--seed", seed);
  quintiles->add_option("--out", out_path);
  auto* markers = app.add_subcommand("markers", "Gender-marker and profession-mention rates");
  markers->add_option("--annotations", annotations_path)->required();
  markers->add_option("--corpus", corpus_path, "Group by system");
  markers->add_option("--out", out_path);

  // run / serve
  fs::path config_path, bundle_dir, index_dir;
  std::string addr = "127.0.0.1:8787", cors;
  auto* run = app.add_subcommand("run", "Run every audit stage from a config file");
  run->add_option("--config", config_path)->required();
  run->add_option("--out", bundle_dir)->required();
  run->add_flag("--canonical", "Omit timestamps from the bundle");
  auto* serve = app.add_subcommand("serve", "Serve the bundle, corpus and index over HTTP");
  serve->add_option("--bundle", bundle_dir)->required();
  serve->add_option("--corpus", corpus_path)->required();
  serve->add_option("--index", index_dir)->required();
  serve->add_option("--colorfulness", colorfulness_path);
  serve->add_option("--addr", addr);
  serve->add_option("--cors-origin", cors);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      auto corpus = load_manifest(manifest);
      corpus.validate_files();
      std::optional<BlsTable> bls;
      if (!bls_path.empty()) bls = load_bls(bls_path);
      save_corpus_db(corpus_out, corpus, bls);
      std::cerr << "ingested " << corpus.size() << " images from " << corpus.systems().size() << " systems\n";
    } else if (*annotate || *embed) {
      const auto db = load_corpus(corpus_path);
      GatewayOptions opts;
      opts.endpoint = endpoint;
      opts.parallelism = parallelism;
      InferenceGateway gw(opts);
      if (*embed) {
        save_embeddings(gw.fetch_embeddings(db.corpus, parse_question_key(question)), emb_out);
      } else {
        Constraints all = default_constraints(), chosen;
        for (const auto& q : split_list(constrain)) {
          const auto qk = parse_question_key(q);
          if (!all.count(qk)) throw ValidationError("question \"" + q + "\" has no vocabulary");
          chosen[qk] = all[qk];
        }
        const QuestionKey qs[] = {QuestionKey::Appearance, QuestionKey::Gender, QuestionKey::Ethnicity};
        const auto batch = gw.fetch_annotations(db.corpus, qs, chosen);
        save_annotations(batch.annotations, ann_out);
        for (const auto& f : batch.failures) std::cerr << "failed: " << f.image_id << ": " << f.message << "\n";
        if (!batch.ok()) return 3;
      }
    } else if (*features) {
      const auto s = extract_features(load_corpus(corpus_path).corpus, feats, {}, workers);
      std::cerr << s.images << " images, " << s.descriptors << " descriptors\n";
    } else if (*codebook) {
      const auto sets = load_feature_dir(feats);
      const auto cb = build_codebook(sets, k_words, seed, max_iter, workers);
      save_codebook(cb, codebook_path.empty() ? feats / "codebook.cbk" : codebook_path);
      std::cerr << "codebook k=" << cb.k() << " inertia=" << cb.inertia << "\n";
    } else if (*vectorize) {
      const auto sets = load_feature_dir(feats);
      fs::create_directories(vecs);
      save_vectors(vectorize_all(sets, load_codebook(codebook_path), workers), vecs / kVectorsFile);
      fs::copy_file(feats / kColorfulnessFile, vecs / kColorfulnessFile, fs::copy_options::overwrite_existing);
    } else if (*index) {
      NnDescentParams p;
      p.k = k_graph;
      p.seed = seed;
      p.workers = workers;
      NnDescentStats stats;
      save_graph(build_index(load_vectors(vecs / kVectorsFile), p, &stats), vecs / kGraphFile);
      std::cerr << "nn-descent: " << stats.iterations << " iterations\n";
    } else if (*knn) {
      json out = {{"id", probe}, {"by", by}, {"k", k_query}};
      if (by == "bovw") {
        if (vecs.empty()) throw ValidationError("--vecs is required for --by bovw");
        const auto graph = load_graph(vecs / kGraphFile);
        QueryParams q;
        q.k = k_query;
        out["neighbors"] = to_json(query(graph, load_vectors(vecs / kVectorsFile), probe, q));
      } else {
        if (colorfulness_path.empty()) colorfulness_path = vecs / kColorfulnessFile;
        const auto scores = load_colorfulness(colorfulness_path);
        json n = json::array();
        for (const auto& id : colorfulness_neighbors(scores, probe, k_query)) {
          n.push_back({{"id", id}, {"score", scores.at(id)}});
        }
        out["neighbors"] = n;
      }
      emit(out, {});
    } else if (*cluster) {
      const auto model = ward_cluster(load_embeddings(emb_path), n_clusters);
      save_model(model, model_path);
      for (std::size_t c = 0; c < model.sizes().size(); ++c) std::cerr << c << "\t" << model.sizes()[c] << "\n";
    } else if (*assign_cmd) {
      const auto model = load_model(model_path);
      emit({{"n_clusters", model.n_clusters},
            {"model_source_hash", model.source_hash},
            {"assignments", assign_map(model, load_embeddings(emb_path))}},
           out_path);
    } else if (*diversity) {
      const auto assignments = read_assignments(assignments_path);
      const BootstrapOptions o{level, resamples, seed, workers};
      json doc = {{"report", "diversity"}, {"n_clusters", n_clusters}, {"level", level}, {"bootstrap_b", resamples}};
      std::map<std::string, std::vector<std::uint32_t>> groups;
      if (corpus_path.empty()) {
        for (const auto& [id, c] : assignments) groups["all"].push_back(c);
      } else {
        const auto want = kind == "identities"    ? PromptKind::Identity
                          : kind == "adjectives" ? PromptKind::Adjective
                                                  : PromptKind::Profession;
        for (const auto& r : load_corpus(corpus_path).corpus.records()) {
          auto it = assignments.find(r.id);
          if (r.prompt.kind == want && it != assignments.end()) groups[r.system].push_back(it->second);
        }
      }
      json systems = json::object();
      for (const auto& [name, labels] : groups) systems[name] = to_json(diversity_score(labels, n_clusters, o));
      doc["datasets"] = {{corpus_path.empty() ? "all" : kind, systems}};
      emit(doc, out_path);
    } else if (*quintiles) {
      const auto db = load_corpus(corpus_path);
      std::optional<BlsTable> bls = db.bls;
      if (!bls_path.empty()) bls = load_bls(bls_path);
      if (!bls) throw ValidationError("no BLS table: pass --bls or ingest one with the corpus");
      std::vector<RegionSummary> regions;
      for (const auto& r : read_json(regions_path).at("regions")) regions.push_back(region_from_json(r));
      const auto bkey = parse_bls_key(key);
      const auto attr = bkey == BlsKey::PctWomen ? Attribute::Gender : Attribute::Ethnicity;
      const auto region_group = select_region_group(regions, attr, group, rank);
      const auto assignments = read_assignments(assignments_path);
      ProfessionAssignments pa;
      for (const auto& r : db.corpus.records()) {
        auto it = assignments.find(r.id);
        if (r.prompt.kind == PromptKind::Profession && it != assignments.end()) {
          pa[r.system][*r.prompt.profession].push_back(it->second);
        }
      }
      const BootstrapOptions o{level, resamples, seed, workers};
      emit({{"report", "quintiles"},
            {"analyses",
             {{{"phrase", group},
               {"attribute", std::string(to_string(attr))},
               {"rank_max", rank},
               {"report", to_json(quintile_report(pa, region_group, *bls, bkey, o))}}}}},
           out_path);
    } else if (*markers) {
      const auto anns = load_annotations(annotations_path);
      json doc = {{"report", "markers"}};
      json systems = json::object();
      if (corpus_path.empty()) {
        for (auto src : {MarkerSource::Caption, MarkerSource::VqaAppearance}) {
          std::vector<std::string> texts;
          for (const auto& a : anns) texts.push_back(annotation_text(a, src));
          systems["all"][std::string(to_string(src))] = to_json(gender_marker_stats(texts));
        }
      } else {
        const auto corpus = load_corpus(corpus_path).corpus;
        for (auto src : {MarkerSource::Caption, MarkerSource::VqaAppearance}) {
          for (const auto& [system, stats] : gender_marker_stats(anns, corpus, src)) {
            systems[system][std::string(to_string(src))] = to_json(stats);
          }
        }
        for (const auto& [system, pct] : profession_mention_by_system(anns, corpus)) {
          systems[system]["pct_profession_mention"] = pct;
        }
      }
      doc["systems"] = systems;
      emit(doc, out_path);
    } else if (*run) {
      auto config = load_config(config_path);
      config.workers = workers;
      if (run->count("--canonical")) config.canonical = true;
      const auto bundle = run_audit(config, bundle_dir);
      for (const auto& f : bundle_files(bundle.dir)) std::cerr << (bundle.dir / f).string() << "\n";
    } else if (*serve) {
      const auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw ValidationError("--addr must be host:port");
      const std::string host = addr.substr(0, colon);
      const int port = std::stoi(addr.substr(colon + 1));
      auto state = std::make_shared<const ServiceState>(
          load_service_state({bundle_dir, corpus_path, index_dir, colorfulness_path}));
      ServiceOptions opts;
      opts.cors_origin = cors;
      Service svc(state, opts);
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      svc.listen(host, port, [&](int p) { std::cerr << "listening on " << host << ":" << p << "\n"; });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
