#include "bexrl/pipeline/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "bexrl/data/generators.hpp"
#include "bexrl/metrics/report.hpp"
#include "bexrl/util/error.hpp"

namespace bexrl::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Value {
  std::string text;
  bool quoted = false;
  int line = 0;
};

std::map<std::string, Value> parse_pairs(const std::string& text) {
  std::map<std::string, Value> out;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line;
    bool in_string = false;
    for (char c : raw) {
      if (c == '"') in_string = !in_string;
      if (c == '#' && !in_string) break;
      line += c;
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::kParse, where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kParse, where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) fail(ErrorKind::kParse, where + ": empty key or value");
    Value v{value, false, line_no};
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') fail(ErrorKind::kParse, where + ": unterminated string");
      v.text = value.substr(1, value.size() - 2);
      v.quoted = true;
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (!out.emplace(full, v).second) fail(ErrorKind::kParse, where + ": duplicate key '" + full + "'");
  }
  return out;
}

class Reader {
 public:
  explicit Reader(std::map<std::string, Value> pairs) : pairs_(std::move(pairs)) {}

  void string(const std::string& key, std::string& out) {
    if (auto* v = take(key)) {
      if (!v->quoted) bad(key, *v, "a quoted string");
      out = v->text;
    }
  }
  template <typename T>
  void integer(const std::string& key, T& out) {
    if (auto* v = take(key)) {
      std::size_t pos = 0;
      long long parsed = 0;
      try {
        parsed = std::stoll(v->text, &pos);
      } catch (const std::exception&) {
        bad(key, *v, "an integer");
      }
      if (v->quoted || pos != v->text.size()) bad(key, *v, "an integer");
      if (std::is_unsigned_v<T> && parsed < 0) bad(key, *v, "a non-negative integer");
      out = static_cast<T>(parsed);
    }
  }
  void number(const std::string& key, double& out) {
    if (auto* v = take(key)) {
      std::size_t pos = 0;
      try {
        out = std::stod(v->text, &pos);
      } catch (const std::exception&) {
        bad(key, *v, "a number");
      }
      if (v->quoted || pos != v->text.size()) bad(key, *v, "a number");
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto* v = take(key)) {
      if (v->quoted || (v->text != "true" && v->text != "false")) bad(key, *v, "true or false");
      out = v->text == "true";
    }
  }
  void finish() const {
    if (!pairs_.empty()) {
      const auto& [key, v] = *pairs_.begin();
      fail(ErrorKind::kInvalidConfig, "config line " + std::to_string(v.line) + ": unknown key '" + key + "'");
    }
  }

 private:
  Value* take(const std::string& key) {
    auto it = pairs_.find(key);
    if (it == pairs_.end()) return nullptr;
    taken_ = it->second;
    pairs_.erase(it);
    return &taken_;
  }
  [[noreturn]] static void bad(const std::string& key, const Value& v, const std::string& expected) {
    fail(ErrorKind::kInvalidConfig,
         "config line " + std::to_string(v.line) + ": '" + key + "' must be " + expected);
  }

  std::map<std::string, Value> pairs_;
  Value taken_;
};

std::string num(double v) { return metrics::format_number(v); }

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += num(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

template <typename T>
std::vector<T> to_counts(const std::vector<double>& values, const std::string& what) {
  std::vector<T> out;
  for (double v : values) {
    if (v < 0 || v != std::floor(v)) fail(ErrorKind::kInvalidConfig, what + " must list non-negative integers");
    out.push_back(static_cast<T>(v));
  }
  return out;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (item.empty() || pos != item.size() || !std::isfinite(v)) {
      fail(ErrorKind::kInvalidConfig, what + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) fail(ErrorKind::kInvalidConfig, what + " is empty");
  return out;
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  PipelineConfig cfg;
  Reader r(parse_pairs(text));

  std::string path;
  r.string("data.env", cfg.data.env);
  r.string("data.path", path);
  r.integer("data.seed", cfg.data.seed);
  r.integer("data.episodes", cfg.data.episodes);
  r.integer("data.episode_len", cfg.data.episode_len);
  r.number("data.action_noise", cfg.data.action_noise);
  r.integer("data.grid_size", cfg.data.grid_size);
  r.boolean("data.image", cfg.data.image);

  auto& vq = cfg.vqvae;
  r.integer("vqvae.embed_dim", vq.model.embed_dim);
  r.integer("vqvae.num_layers", vq.model.num_layers);
  r.integer("vqvae.num_heads", vq.model.num_heads);
  r.integer("vqvae.hidden_dim", vq.model.hidden_dim);
  r.integer("vqvae.num_codes", vq.model.num_codes);
  r.integer("vqvae.seq_len", vq.model.seq_len);
  std::string fusion = vq.model.fusion == vq::Fusion::kSum ? "sum" : "concat";
  r.string("vqvae.fusion", fusion);
  r.number("vqvae.learning_rate", vq.learning_rate);
  r.number("vqvae.codebook_lr_scale", vq.codebook_lr_scale);
  r.integer("vqvae.batch_size", vq.batch_size);
  r.integer("vqvae.num_epochs", vq.num_epochs);
  r.number("vqvae.alpha", vq.alpha);
  r.number("vqvae.teacher_forcing_start", vq.teacher_forcing_start);
  r.boolean("vqvae.lr_decay", vq.lr_decay);
  r.integer("vqvae.seed", vq.seed);

  auto& sg = cfg.segment;
  r.number("segment.lambda", sg.lambda);
  r.integer("segment.k", sg.k);
  r.integer("segment.smoothing_window", sg.smoothing_window);
  std::string distance = sg.distance == seg::DistanceTerm::kKernel ? "kernel" : "raw";
  r.string("segment.distance", distance);
  r.integer("segment.seed", sg.seed);

  r.integer("bc.hidden", cfg.bc.hidden);
  r.integer("bc.conv1", cfg.bc.channels[0]);
  r.integer("bc.conv2", cfg.bc.channels[1]);
  r.integer("bc.conv3", cfg.bc.channels[2]);
  r.number("bc.learning_rate", cfg.bc.learning_rate);
  r.integer("bc.batch_size", cfg.bc.batch_size);
  r.integer("bc.num_epochs", cfg.bc.num_epochs);
  r.integer("bc.seed", cfg.bc.seed);

  r.integer("metrics.episodes", cfg.metrics.episodes);
  r.integer("metrics.actions_per_episode", cfg.metrics.actions_per_episode);
  r.integer("metrics.seed", cfg.metrics.seed);
  std::string space = cfg.metric_space == MetricSpace::kCodes ? "codes" : "timesteps";
  r.string("metrics.space", space);

  std::string lambda_grid = join(cfg.sweep.lambda_grid);
  std::string codebook_sizes = join(cfg.sweep.codebook_sizes);
  std::string codebook_seeds = join(cfg.sweep.codebook_seeds);
  r.string("sweep.lambda_grid", lambda_grid);
  r.string("sweep.codebook_sizes", codebook_sizes);
  r.string("sweep.codebook_seeds", codebook_seeds);

  std::string out_dir = cfg.output_dir.string();
  r.string("output.dir", out_dir);
  r.finish();

  if (fusion == "sum") {
    vq.model.fusion = vq::Fusion::kSum;
  } else if (fusion == "concat") {
    vq.model.fusion = vq::Fusion::kConcat;
  } else {
    fail(ErrorKind::kInvalidConfig, "vqvae.fusion must be \"sum\" or \"concat\"");
  }
  if (distance == "kernel") {
    sg.distance = seg::DistanceTerm::kKernel;
  } else if (distance == "raw") {
    sg.distance = seg::DistanceTerm::kRaw;
  } else {
    fail(ErrorKind::kInvalidConfig, "segment.distance must be \"kernel\" or \"raw\"");
  }
  if (space == "codes") {
    cfg.metric_space = MetricSpace::kCodes;
  } else if (space == "timesteps") {
    cfg.metric_space = MetricSpace::kTimesteps;
  } else {
    fail(ErrorKind::kInvalidConfig, "metrics.space must be \"codes\" or \"timesteps\"");
  }
  if (cfg.data.env != "pointmass" && cfg.data.env != "gridlava") {
    fail(ErrorKind::kInvalidConfig, "data.env must be \"pointmass\" or \"gridlava\"");
  }
  if (!path.empty()) {
    cfg.data.path = std::filesystem::path(path).is_absolute() ? std::filesystem::path(path) : base_dir / path;
    if (!std::filesystem::is_regular_file(cfg.data.path)) {
      fail(ErrorKind::kIo, "data.path does not exist: " + cfg.data.path.string());
    }
  }
  if (!(sg.lambda >= 0.0 && sg.lambda <= 1.0)) fail(ErrorKind::kInvalidLambda, "segment.lambda must lie in [0, 1]");
  if (sg.smoothing_window < 3 || sg.smoothing_window % 2 == 0) {
    fail(ErrorKind::kInvalidWindow, "segment.smoothing_window must be odd and >= 3");
  }
  if (cfg.metrics.episodes < 1 || cfg.metrics.actions_per_episode < 1) {
    fail(ErrorKind::kInvalidConfig, "metrics sample counts must be >= 1");
  }
  cfg.sweep.lambda_grid = parse_number_list(lambda_grid, "sweep.lambda_grid");
  for (double l : cfg.sweep.lambda_grid) {
    if (l < 0.0 || l > 1.0) fail(ErrorKind::kInvalidLambda, "sweep.lambda_grid values must lie in [0, 1]");
  }
  cfg.sweep.codebook_sizes.clear();
  if (!trim(codebook_sizes).empty()) {
    cfg.sweep.codebook_sizes = to_counts<std::size_t>(parse_number_list(codebook_sizes, "sweep.codebook_sizes"),
                                                      "sweep.codebook_sizes");
  }
  cfg.sweep.codebook_seeds = to_counts<std::uint64_t>(parse_number_list(codebook_seeds, "sweep.codebook_seeds"),
                                                      "sweep.codebook_seeds");
  cfg.output_dir = out_dir;
  vq.validate();
  cfg.bc.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_to_text(const PipelineConfig& cfg) {
  std::ostringstream os;
  const auto& d = cfg.data;
  os << "[data]\n";
  if (d.path.empty()) {
    os << "env = \"" << d.env << "\"\n";
  } else {
    os << "path = \"" << d.path.string() << "\"\n";
  }
  os << "seed = " << d.seed << "\nepisodes = " << d.episodes << "\nepisode_len = " << d.episode_len
     << "\naction_noise = " << num(d.action_noise) << "\ngrid_size = " << d.grid_size << "\nimage = " << (d.image ? "true" : "false") << "\n\n";
  const auto& vq = cfg.vqvae;
  os << "[vqvae]\nembed_dim = " << vq.model.embed_dim << "\nnum_layers = " << vq.model.num_layers
     << "\nnum_heads = " << vq.model.num_heads << "\nhidden_dim = " << vq.model.hidden_dim
     << "\nnum_codes = " << vq.model.num_codes << "\nseq_len = " << vq.model.seq_len << "\nfusion = \""
     << (vq.model.fusion == vq::Fusion::kSum ? "sum" : "concat") << "\"\nlearning_rate = " << num(vq.learning_rate)
     << "\ncodebook_lr_scale = " << num(vq.codebook_lr_scale)
     << "\nbatch_size = " << vq.batch_size << "\nnum_epochs = " << vq.num_epochs << "\nalpha = " << num(vq.alpha)
     << "\nteacher_forcing_start = " << num(vq.teacher_forcing_start)
     << "\nlr_decay = " << (vq.lr_decay ? "true" : "false") << "\nseed = " << vq.seed << "\n\n";
  const auto& sg = cfg.segment;
  os << "[segment]\nlambda = " << num(sg.lambda) << "\nk = " << sg.k << "\nsmoothing_window = " << sg.smoothing_window
     << "\ndistance = \"" << (sg.distance == seg::DistanceTerm::kKernel ? "kernel" : "raw") << "\"\nseed = "
     << sg.seed << "\n\n";
  const auto& bc = cfg.bc;
  os << "[bc]\nhidden = " << bc.hidden << "\nconv1 = " << bc.channels[0] << "\nconv2 = " << bc.channels[1]
     << "\nconv3 = " << bc.channels[2] << "\nlearning_rate = " << num(bc.learning_rate)
     << "\nbatch_size = " << bc.batch_size << "\nnum_epochs = " << bc.num_epochs << "\nseed = " << bc.seed << "\n\n";
  os << "[metrics]\nepisodes = " << cfg.metrics.episodes << "\nactions_per_episode = " << cfg.metrics.actions_per_episode
     << "\nseed = " << cfg.metrics.seed << "\nspace = \""
     << (cfg.metric_space == MetricSpace::kCodes ? "codes" : "timesteps") << "\"\n\n";
  os << "[sweep]\nlambda_grid = \"" << join(cfg.sweep.lambda_grid) << "\"\ncodebook_sizes = \""
     << join(cfg.sweep.codebook_sizes) << "\"\ncodebook_seeds = \"" << join(cfg.sweep.codebook_seeds) << "\"\n\n";
  os << "[output]\ndir = \"" << cfg.output_dir.string() << "\"\n";
  return os.str();
}

nlohmann::ordered_json segment_config_to_json(const SegmentConfig& sg) {
  nlohmann::ordered_json j;
  j["lambda"] = sg.lambda;
  j["k"] = sg.k;
  j["smoothing_window"] = sg.smoothing_window;
  j["distance"] = sg.distance == seg::DistanceTerm::kKernel ? "kernel" : "raw";
  j["seed"] = sg.seed;
  return j;
}

nlohmann::ordered_json config_to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  auto& d = j["data"];
  if (cfg.data.path.empty()) {
    d["env"] = cfg.data.env;
    d["seed"] = cfg.data.seed;
    d["episodes"] = cfg.data.episodes;
    d["episode_len"] = cfg.data.episode_len;
    d["action_noise"] = cfg.data.action_noise;
    d["grid_size"] = cfg.data.grid_size;
    d["image"] = cfg.data.image;
  } else {
    d["path"] = cfg.data.path.string();
  }
  j["vqvae"] = vq::train_config_to_json(cfg.vqvae);
  j["segment"] = segment_config_to_json(cfg.segment);
  j["bc"] = attr::bc_config_to_json(cfg.bc);
  j["metrics"] = {{"episodes", cfg.metrics.episodes},
                  {"actions_per_episode", cfg.metrics.actions_per_episode},
                  {"seed", cfg.metrics.seed},
                  {"space", cfg.metric_space == MetricSpace::kCodes ? "codes" : "timesteps"}};
  j["sweep"] = {{"lambda_grid", cfg.sweep.lambda_grid},
                {"codebook_sizes", cfg.sweep.codebook_sizes},
                {"codebook_seeds", cfg.sweep.codebook_seeds}};
  return j;
}

data::Dataset load_or_generate(const DataSource& source) {
  if (!source.path.empty()) return data::load_dataset(source.path);
  if (source.env == "pointmass") {
    return data::generate_pointmass({source.seed, source.episodes, source.episode_len, source.action_noise});
  }
  data::GridLavaConfig g;
  g.seed = source.seed;
  g.num_episodes = source.episodes;
  g.grid_size = source.grid_size;
  g.image_observations = source.image;
  return data::generate_gridlava(g);
}

}  // namespace bexrl::pipeline
