#include "bexrl/data/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bexrl/util/error.hpp"

namespace bexrl::data {

using nlohmann::json;
using nlohmann::ordered_json;

ObservationSpec ObservationSpec::vector(std::size_t dim) {
  ObservationSpec s;
  s.kind = Kind::kVector;
  s.dim = dim;
  s.validate();
  return s;
}

ObservationSpec ObservationSpec::image(std::size_t height, std::size_t width,
                                       std::size_t channels) {
  ObservationSpec s;
  s.kind = Kind::kImage;
  s.height = height;
  s.width = width;
  s.channels = channels;
  s.validate();
  return s;
}

std::size_t ObservationSpec::flat_size() const {
  return is_image() ? height * width * channels : dim;
}

void ObservationSpec::validate() const {
  if (is_image()) {
    if (height < 1 || width < 1) fail(ErrorKind::kInvalidConfig, "image dimensions must be >= 1");
    if (channels != 1 && channels != 3) {
      fail(ErrorKind::kInvalidConfig, "image channels must be 1 or 3, got " + std::to_string(channels));
    }
  } else if (dim < 1) {
    fail(ErrorKind::kInvalidConfig, "observation dim must be >= 1");
  }
}

ActionSpec ActionSpec::continuous(std::size_t dim) {
  ActionSpec s;
  s.kind = Kind::kContinuous;
  s.dim = dim;
  s.validate();
  return s;
}

ActionSpec ActionSpec::discrete(std::size_t num_classes) {
  ActionSpec s;
  s.kind = Kind::kDiscrete;
  s.num_classes = num_classes;
  s.validate();
  return s;
}

void ActionSpec::validate() const {
  if (is_discrete()) {
    if (num_classes < 2) fail(ErrorKind::kInvalidConfig, "discrete action space needs >= 2 classes");
  } else if (dim < 1) {
    fail(ErrorKind::kInvalidConfig, "continuous action dim must be >= 1");
  }
}

int action_class(const Action& action) { return static_cast<int>(action.at(0)); }

std::size_t Dataset::total_steps() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

void validate_trajectory(const Trajectory& traj, const ObservationSpec& obs_spec,
                         const ActionSpec& act_spec) {
  if (traj.observations.size() != traj.actions.size()) {
    fail(ErrorKind::kSpecMismatch, "episode has " + std::to_string(traj.observations.size()) +
                                       " observations but " + std::to_string(traj.actions.size()) +
                                       " actions");
  }
  if (traj.actions.size() < 2) fail(ErrorKind::kSpecMismatch, "episode shorter than 2 steps");
  const std::size_t obs_size = obs_spec.flat_size();
  for (const auto& o : traj.observations) {
    if (o.size() != obs_size) {
      fail(ErrorKind::kSpecMismatch, "observation size " + std::to_string(o.size()) +
                                         " != spec size " + std::to_string(obs_size));
    }
    for (double v : o) {
      if (!std::isfinite(v)) fail(ErrorKind::kSpecMismatch, "non-finite observation value");
    }
  }
  for (const auto& a : traj.actions) {
    if (act_spec.is_discrete()) {
      if (a.size() != 1) fail(ErrorKind::kSpecMismatch, "discrete action must be a single class index");
      double c = a[0];
      if (c < 0 || c >= static_cast<double>(act_spec.num_classes) || c != std::floor(c)) {
        fail(ErrorKind::kSpecMismatch, "action class out of range");
      }
    } else {
      if (a.size() != act_spec.dim) {
        fail(ErrorKind::kSpecMismatch, "action size " + std::to_string(a.size()) + " != spec dim " +
                                           std::to_string(act_spec.dim));
      }
      for (double v : a) {
        if (!std::isfinite(v)) fail(ErrorKind::kSpecMismatch, "non-finite action value");
      }
    }
  }
  if (traj.mode_labels && traj.mode_labels->size() != traj.actions.size()) {
    fail(ErrorKind::kSpecMismatch, "mode_labels length differs from actions");
  }
}

void Dataset::validate() const {
  obs_spec.validate();
  act_spec.validate();
  if (trajectories.empty()) fail(ErrorKind::kEmptyDataset, "dataset has no trajectories");
  for (const auto& t : trajectories) validate_trajectory(t, obs_spec, act_spec);
}

void encode_action(const ActionSpec& spec, const Action& action, std::vector<double>& out) {
  if (spec.is_discrete()) {
    const int c = action_class(action);
    for (std::size_t i = 0; i < spec.num_classes; ++i) out.push_back(static_cast<int>(i) == c ? 1.0 : 0.0);
  } else {
    out.insert(out.end(), action.begin(), action.end());
  }
}

ordered_json obs_spec_to_json(const ObservationSpec& spec) {
  ordered_json j;
  if (spec.is_image()) {
    j["kind"] = "image";
    j["height"] = spec.height;
    j["width"] = spec.width;
    j["channels"] = spec.channels;
  } else {
    j["kind"] = "vector";
    j["dim"] = spec.dim;
  }
  return j;
}

ordered_json act_spec_to_json(const ActionSpec& spec) {
  ordered_json j;
  if (spec.is_discrete()) {
    j["kind"] = "discrete";
    j["num_classes"] = spec.num_classes;
  } else {
    j["kind"] = "continuous";
    j["dim"] = spec.dim;
  }
  return j;
}

ObservationSpec obs_spec_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "vector") return ObservationSpec::vector(j.at("dim").get<std::size_t>());
  if (kind == "image") {
    return ObservationSpec::image(j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>(),
                                  j.at("channels").get<std::size_t>());
  }
  fail(ErrorKind::kParse, "unknown observation kind '" + kind + "'");
}

ActionSpec act_spec_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "continuous") return ActionSpec::continuous(j.at("dim").get<std::size_t>());
  if (kind == "discrete") return ActionSpec::discrete(j.at("num_classes").get<std::size_t>());
  fail(ErrorKind::kParse, "unknown action kind '" + kind + "'");
}

namespace {

ordered_json episode_to_json(const Trajectory& t, const ActionSpec& act_spec) {
  ordered_json j;
  j["observations"] = t.observations;
  if (act_spec.is_discrete()) {
    std::vector<int> classes;
    classes.reserve(t.actions.size());
    for (const auto& a : t.actions) classes.push_back(action_class(a));
    j["actions"] = classes;
  } else {
    j["actions"] = t.actions;
  }
  if (t.mode_labels) j["mode_labels"] = *t.mode_labels;
  return j;
}

Trajectory episode_from_json(const json& j, const ActionSpec& act_spec) {
  Trajectory t;
  t.observations = j.at("observations").get<std::vector<Observation>>();
  const auto& actions = j.at("actions");
  if (!actions.is_array()) throw std::invalid_argument("actions must be an array");
  for (const auto& a : actions) {
    if (act_spec.is_discrete()) {
      if (!a.is_number_integer()) {
        fail(ErrorKind::kSpecMismatch, "discrete action must be an integer class index");
      }
      t.actions.push_back({static_cast<double>(a.get<long long>())});
    } else {
      if (!a.is_array()) fail(ErrorKind::kSpecMismatch, "continuous action must be an array");
      t.actions.push_back(a.get<Action>());
    }
  }
  if (j.contains("mode_labels")) t.mode_labels = j.at("mode_labels").get<std::vector<int>>();
  return t;
}

}  // namespace

std::string serialize_dataset(const Dataset& ds) {
  ds.validate();
  ordered_json header;
  header["version"] = 1;
  header["obs_spec"] = obs_spec_to_json(ds.obs_spec);
  header["act_spec"] = act_spec_to_json(ds.act_spec);
  header["name"] = ds.name;
  std::string out = header.dump();
  out += '\n';
  for (const auto& t : ds.trajectories) {
    out += episode_to_json(t, ds.act_spec).dump();
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Dataset ds;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("version", 0) != 1) fail(ErrorKind::kParse, "unsupported dataset version");
        ds.obs_spec = obs_spec_from_json(j.at("obs_spec"));
        ds.act_spec = act_spec_from_json(j.at("act_spec"));
        ds.name = j.at("name").get<std::string>();
        have_header = true;
        continue;
      }
      Trajectory t = episode_from_json(j, ds.act_spec);
      validate_trajectory(t, ds.obs_spec, ds.act_spec);
      ds.trajectories.push_back(std::move(t));
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) fail(ErrorKind::kParse, "missing header line");
  if (ds.trajectories.empty()) fail(ErrorKind::kEmptyDataset, "dataset has no episodes");
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  if (path.empty()) fail(ErrorKind::kIo, "empty output path");
  const std::string text = serialize_dataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write dataset '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace bexrl::data
