#include "tti/reports.hpp"

#include <cstdio>
#include <sstream>

namespace tti {

namespace {

constexpr const char* kQuintileLabels[] = {"Low 20%", "20-40%", "40-60%", "60-80%", "Top 20%"};

json phrase_list(const std::vector<PhraseShare>& v) {
  json a = json::array();
  for (const auto& p : v) a.push_back({{"phrase", p.phrase}, {"pct", p.pct}});
  return a;
}

std::string join_top(const std::vector<PhraseShare>& v, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < v.size() && i < n; ++i) {
    if (i) out += ", ";
    out += v[i].phrase;
  }
  return out;
}

std::string footer(const json& doc) {
  std::ostringstream os;
  os << "\nconfig " << doc.value("config_hash", std::string("-"));
  if (doc.contains("seeds")) {
    for (const auto& [k, v] : doc["seeds"].items()) os << ", seed " << k << "=" << v.dump();
  }
  os << "\n";
  return os.str();
}

std::string ci_cell(const json& c) {
  return fixed(c.at("share_pct").get<double>(), 1) + " [" + fixed(c.at("ci_low").get<double>(), 1) + ", " +
         fixed(c.at("ci_high").get<double>(), 1) + "]";
}

}  // namespace

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json to_json(const RegionSummary& s) {
  return {{"cluster", s.cluster},
          {"members", s.members},
          {"share", s.share},
          {"top_gender", phrase_list(s.top_gender)},
          {"top_ethnicity", phrase_list(s.top_ethnicity)}};
}

json to_json(const std::vector<RegionSummary>& s) {
  json a = json::array();
  for (const auto& r : s) a.push_back(to_json(r));
  return a;
}

RegionSummary region_from_json(const json& j) {
  RegionSummary s;
  s.cluster = j.at("cluster").get<std::uint32_t>();
  s.members = j.at("members").get<std::size_t>();
  s.share = j.at("share").get<double>();
  for (const auto& p : j.at("top_gender")) s.top_gender.push_back({p.at("phrase"), p.at("pct")});
  for (const auto& p : j.at("top_ethnicity")) s.top_ethnicity.push_back({p.at("phrase"), p.at("pct")});
  return s;
}

json to_json(const DiversityScore& d) {
  return {{"entropy_bits", d.entropy_bits}, {"ci_low", d.ci_low},          {"ci_high", d.ci_high},
          {"n", d.n},                       {"n_clusters", d.n_clusters},  {"level", d.level},
          {"bootstrap_b", d.bootstrap_b},   {"seed", d.seed}};
}

json to_json(const QuintileReport& q) {
  json rows = json::array();
  for (std::size_t i = 0; i < q.rows.size(); ++i) {
    const auto& r = q.rows[i];
    json systems = json::object();
    for (const auto& [name, c] : r.systems) {
      systems[name] = {{"share_pct", c.share_pct}, {"ci_low", c.ci_low}, {"ci_high", c.ci_high}, {"images", c.images}};
    }
    rows.push_back({{"quintile", i + 1},
                    {"label", kQuintileLabels[i]},
                    {"bls_mean", r.bls_mean},
                    {"professions", r.professions},
                    {"systems", systems}});
  }
  return {{"key", std::string(to_string(q.key))},
          {"region_group", q.region_group},
          {"level", q.level},
          {"bootstrap_b", q.bootstrap_b},
          {"seed", q.seed},
          {"rows", rows},
          {"errata", q.errata}};
}

json to_json(const MarkerStats& m) {
  return {{"texts", m.texts},
          {"marked", m.marked},
          {"woman", m.woman},
          {"man", m.man},
          {"person", m.person},
          {"pct_gender_marked", m.pct_gender_marked()},
          {"pct_woman", m.pct_woman()},
          {"pct_man", m.pct_man()},
          {"pct_person", m.pct_person()}};
}

json to_json(const Hit& h) { return {{"id", h.id}, {"score", h.similarity}}; }

json to_json(const std::vector<Hit>& hits) {
  json a = json::array();
  for (const auto& h : hits) a.push_back(to_json(h));
  return a;
}

std::string regions_markdown(const std::vector<RegionSummary>& regions, std::size_t top_gender,
                             std::size_t top_ethnicity) {
  std::ostringstream os;
  os << "| Region | Members | Share (%) | Top gender phrases | Top ethnicity phrases |\n";
  os << "|---:|---:|---:|---|---|\n";
  for (const auto& r : regions) {
    os << "| " << r.cluster << " | " << r.members << " | " << fixed(100.0 * r.share) << " | "
       << join_top(r.top_gender, top_gender) << " | " << join_top(r.top_ethnicity, top_ethnicity) << " |\n";
  }
  return os.str();
}

std::string diversity_markdown(const json& doc) {
  std::ostringstream os;
  os << "# Diversity\n\nEntropy (bits) of cluster assignments over " << doc.at("n_clusters").get<int>()
     << " regions, " << fixed(100 * doc.at("level").get<double>(), 0) << "% bootstrap interval.\n\n";
  os << "| Dataset | System | n | Entropy | CI low | CI high |\n|---|---|---:|---:|---:|---:|\n";
  for (const auto& [dataset, systems] : doc.at("datasets").items()) {
    for (const auto& [system, d] : systems.items()) {
      os << "| " << dataset << " | " << system << " | " << d.at("n").get<std::size_t>() << " | "
         << fixed(d.at("entropy_bits").get<double>(), 3) << " | " << fixed(d.at("ci_low").get<double>(), 3) << " | "
         << fixed(d.at("ci_high").get<double>(), 3) << " |\n";
    }
  }
  return os.str() + footer(doc);
}

std::string quintiles_markdown(const json& doc) {
  std::ostringstream os;
  os << "# Quintiles\n";
  for (const auto& a : doc.at("analyses")) {
    const auto& rep = a.at("report");
    std::vector<std::string> systems;
    if (!rep.at("rows").empty()) {
      for (const auto& [s, _] : rep.at("rows")[0].at("systems").items()) systems.push_back(s);
    }
    os << "\n## " << rep.at("key").get<std::string>() << " (region group: \"" << a.at("phrase").get<std::string>()
       << "\" in top " << a.at("rank_max").get<int>() << ", clusters " << rep.at("region_group").dump() << ")\n\n";
    os << "| Quintile | BLS mean (%) |";
    for (const auto& s : systems) os << " " << s << " (%) |";
    os << "\n|---|---:|";
    for (std::size_t i = 0; i < systems.size(); ++i) os << "---:|";
    os << "\n";
    for (const auto& r : rep.at("rows")) {
      os << "| " << r.at("label").get<std::string>() << " | " << fixed(r.at("bls_mean").get<double>(), 1) << " |";
      for (const auto& s : systems) os << " " << ci_cell(r.at("systems").at(s)) << " |";
      os << "\n";
    }
    if (!rep.at("errata").empty()) {
      os << "\nMissing assignments: " << rep.at("errata").size() << " (system: profession)\n";
      for (const auto& e : rep.at("errata")) os << "- " << e.get<std::string>() << "\n";
    }
  }
  return os.str() + footer(doc);
}

std::string markers_markdown(const json& doc) {
  std::ostringstream os;
  os << "# Gender markers\n\n";
  os << "| System | Source | Texts | Woman (%) | Man (%) | Gender-marked (%) | Person (%) |\n";
  os << "|---|---|---:|---:|---:|---:|---:|\n";
  for (const auto& [system, s] : doc.at("systems").items()) {
    for (const char* src : {"caption", "vqa_appearance"}) {
      if (!s.contains(src)) continue;
      const auto& m = s.at(src);
      os << "| " << system << " | " << src << " | " << m.at("texts").get<std::size_t>() << " | "
         << fixed(m.at("pct_woman").get<double>(), 1) << " | " << fixed(m.at("pct_man").get<double>(), 1) << " | "
         << fixed(m.at("pct_gender_marked").get<double>(), 1) << " | " << fixed(m.at("pct_person").get<double>(), 1)
         << " |\n";
    }
  }
  os << "\n| System | Captions naming the profession (%) |\n|---|---:|\n";
  for (const auto& [system, s] : doc.at("systems").items()) {
    if (s.contains("pct_profession_mention")) {
      os << "| " << system << " | " << fixed(s.at("pct_profession_mention").get<double>(), 1) << " |\n";
    }
  }
  return os.str() + footer(doc);
}

}  // namespace tti
