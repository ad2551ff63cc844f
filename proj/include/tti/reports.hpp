#pragma once

// JSON and Markdown renderings of the bias reports. The same functions back
// the bundle files and the HTTP service.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tti/clusters.hpp"
#include "tti/knn_graph.hpp"
#include "tti/markers.hpp"
#include "tti/metrics.hpp"

namespace tti {

using nlohmann::json;

json to_json(const RegionSummary& s);
json to_json(const std::vector<RegionSummary>& s);
json to_json(const DiversityScore& d);
json to_json(const QuintileReport& q);
json to_json(const MarkerStats& m);
json to_json(const Hit& h);
json to_json(const std::vector<Hit>& hits);

RegionSummary region_from_json(const json& j);

/// Markdown tables for the bundle.
std::string regions_markdown(const std::vector<RegionSummary>& regions, std::size_t top_gender = 2,
                             std::size_t top_ethnicity = 4);
std::string diversity_markdown(const json& diversity_doc);
std::string quintiles_markdown(const json& quintiles_doc);
std::string markers_markdown(const json& markers_doc);

/// Fixed-precision decimal for Markdown cells.
std::string fixed(double v, int digits = 2);

}  // namespace tti
