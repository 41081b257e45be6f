#include "bexrl/metrics/report.hpp"

#include <charconv>
#include <cmath>

#include "bexrl/util/error.hpp"

namespace bexrl::metrics {

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::ordered_json report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["afs_attributed"] = r.afs_attributed;
  j["afs_random"] = r.afs_random;
  j["afs_samples"] = r.afs_samples;
  j["silhouette"] = r.silhouette;
  j["davies_bouldin"] = r.davies_bouldin;
  j["occupancy"] = r.occupancy;
  j["normalized_recon"] = r.normalized_recon;
  if (r.ari_vs_planted) {
    j["ari_vs_planted"] = *r.ari_vs_planted;
  } else {
    j["ari_vs_planted"] = nullptr;
  }
  j["config"] = r.config;
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.afs_attributed = j.at("afs_attributed").get<double>();
    r.afs_random = j.at("afs_random").get<double>();
    r.afs_samples = j.at("afs_samples").get<std::size_t>();
    r.silhouette = j.at("silhouette").get<double>();
    r.davies_bouldin = j.at("davies_bouldin").get<double>();
    r.occupancy = j.at("occupancy").get<double>();
    r.normalized_recon = j.at("normalized_recon").get<double>();
    if (!j.at("ari_vs_planted").is_null()) r.ari_vs_planted = j.at("ari_vs_planted").get<double>();
    r.config = j.at("config");
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("metrics report: ") + e.what());
  }
}

std::string report_csv_header() {
  return "lambda,num_codes,k,afs_attributed,afs_random,afs_samples,silhouette,davies_bouldin,occupancy,"
         "normalized_recon,ari_vs_planted";
}

std::string report_csv_row(const MetricsReport& r) {
  auto field = [&](const char* key) -> std::string {
    if (!r.config.contains(key)) return "";
    const auto& v = r.config.at(key);
    return v.is_number_float() ? format_number(v.get<double>()) : v.dump();
  };
  std::string row = field("lambda") + "," + field("num_codes") + "," + field("k");
  for (double v : {r.afs_attributed, r.afs_random}) row += "," + format_number(v);
  row += "," + std::to_string(r.afs_samples);
  for (double v : {r.silhouette, r.davies_bouldin, r.occupancy, r.normalized_recon}) row += "," + format_number(v);
  row += ",";
  if (r.ari_vs_planted) row += format_number(*r.ari_vs_planted);
  return row;
}

}  // namespace bexrl::metrics
