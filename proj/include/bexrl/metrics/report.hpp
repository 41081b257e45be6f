#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace bexrl::metrics {

struct MetricsReport {
  double afs_attributed = 0.0;
  double afs_random = 0.0;
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
  double occupancy = 0.0;
  double normalized_recon = 0.0;
  std::optional<double> ari_vs_planted;  // synthetic data only
  std::size_t afs_samples = 0;
  nlohmann::ordered_json config;  // lambda, N, k, seeds, sample counts
};

nlohmann::ordered_json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

std::string report_csv_header();
std::string report_csv_row(const MetricsReport& report);

// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

}  // namespace bexrl::metrics
