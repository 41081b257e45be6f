#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace bexrl::data {

struct ObservationSpec {
  enum class Kind { kVector, kImage };

  Kind kind = Kind::kVector;
  std::size_t dim = 1;       // vector
  std::size_t height = 1;    // image
  std::size_t width = 1;     // image
  std::size_t channels = 1;  // image, 1 or 3

  static ObservationSpec vector(std::size_t dim);
  static ObservationSpec image(std::size_t height, std::size_t width, std::size_t channels);

  bool is_image() const { return kind == Kind::kImage; }
  // Number of doubles in one flattened observation (channel-major for images).
  std::size_t flat_size() const;
  void validate() const;

  bool operator==(const ObservationSpec&) const = default;
};

struct ActionSpec {
  enum class Kind { kContinuous, kDiscrete };

  Kind kind = Kind::kContinuous;
  std::size_t dim = 1;          // continuous
  std::size_t num_classes = 2;  // discrete

  static ActionSpec continuous(std::size_t dim);
  static ActionSpec discrete(std::size_t num_classes);

  bool is_discrete() const { return kind == Kind::kDiscrete; }
  // Width of the action as fed to networks: d, or C for one-hot classes.
  std::size_t encoded_size() const { return is_discrete() ? num_classes : dim; }
  void validate() const;

  bool operator==(const ActionSpec&) const = default;
};

// A discrete action is stored as a one-element vector holding the class index.
using Observation = std::vector<double>;
using Action = std::vector<double>;

int action_class(const Action& action);

struct Trajectory {
  std::vector<Observation> observations;
  std::vector<Action> actions;
  std::optional<std::vector<int>> mode_labels;

  std::size_t size() const { return actions.size(); }
  bool operator==(const Trajectory&) const = default;
};

struct Dataset {
  ObservationSpec obs_spec;
  ActionSpec act_spec;
  std::vector<Trajectory> trajectories;
  std::string name;

  std::size_t total_steps() const;
  // Throws SpecMismatch / EmptyDataset when an invariant does not hold.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

void validate_trajectory(const Trajectory& traj, const ObservationSpec& obs_spec,
                         const ActionSpec& act_spec);

// Appends a one-hot (discrete) or copied (continuous) action encoding to `out`.
void encode_action(const ActionSpec& spec, const Action& action, std::vector<double>& out);

nlohmann::ordered_json obs_spec_to_json(const ObservationSpec& spec);
nlohmann::ordered_json act_spec_to_json(const ActionSpec& spec);
ObservationSpec obs_spec_from_json(const nlohmann::json& j);
ActionSpec act_spec_from_json(const nlohmann::json& j);

// JSON Lines: a header object followed by one episode object per line.
std::string serialize_dataset(const Dataset& ds);
Dataset parse_dataset(const std::string& text);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

}  // namespace bexrl::data
