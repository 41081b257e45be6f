#include "bexrl/data/generators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>

#include "bexrl/util/error.hpp"

namespace bexrl::data {
namespace {

constexpr std::array<int, 4> kDx = {0, 0, -1, 1};
constexpr std::array<int, 4> kDy = {-1, 1, 0, 0};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

class GridLavaEpisode {
 public:
  GridLavaEpisode(const GridLavaConfig& cfg, std::mt19937_64& rng) : cfg_(cfg), rng_(rng) {
    const int g = cfg.grid_size;
    lava_x_ = g / 2;
    gap_y_ = uniform_int(1, g - 2);
    goals_ = {Cell{g - 1, 0}, Cell{g - 1, g - 1}};
    agent_ = Cell{uniform_int(0, lava_x_ - 2), uniform_int(0, g - 1)};
    max_steps_ = std::max(28, 3 * g);
  }

  Trajectory run() {
    Trajectory traj;
    traj.mode_labels.emplace();
    auto record = [&](int action, int mode) {
      traj.observations.push_back(observe());
      traj.actions.push_back({static_cast<double>(action)});
      traj.mode_labels->push_back(mode);
      return step(action);
    };

    // explore -> cross the lava gap -> explore -> approach a goal
    const int first_explore = uniform_int(3, 8);
    for (int i = 0; i < first_explore && alive(traj); ++i) {
      if (!record(slip(explore_action()), gridlava_mode::kExplore)) return traj;
    }
    while (alive(traj) && agent_.x <= lava_x_) {
      if (!record(slip(cross_action()), gridlava_mode::kCrossLava)) return traj;
    }
    const int second_explore = uniform_int(2, 6);
    for (int i = 0; i < second_explore && alive(traj); ++i) {
      if (!record(slip(explore_action()), gridlava_mode::kExplore)) return traj;
    }
    while (alive(traj)) {
      if (!record(slip(approach_action()), gridlava_mode::kApproachGoal)) return traj;
    }
    return traj;
  }

  bool succeeded() const { return outcome_ == Outcome::kGoal; }
  bool died() const { return outcome_ == Outcome::kLava; }

 private:
  enum class Outcome { kRunning, kGoal, kLava, kTimeout };

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  bool alive(const Trajectory& traj) {
    if (outcome_ != Outcome::kRunning) return false;
    if (static_cast<int>(traj.actions.size()) >= max_steps_) {
      outcome_ = Outcome::kTimeout;
      return false;
    }
    return true;
  }

  bool is_lava(Cell c) const { return c.x == lava_x_ && c.y != gap_y_; }

  Cell moved(Cell c, int action) const {
    Cell n{c.x + kDx[action], c.y + kDy[action]};
    const int g = cfg_.grid_size;
    if (n.x < 0 || n.x >= g || n.y < 0 || n.y >= g) return c;
    return n;
  }

  // Returns false when the episode terminated on this step.
  bool step(int action) {
    agent_ = moved(agent_, action);
    if (is_lava(agent_)) {
      outcome_ = Outcome::kLava;
      return false;
    }
    if (agent_ == goals_[0] || agent_ == goals_[1]) {
      outcome_ = Outcome::kGoal;
      return false;
    }
    return true;
  }

  int nearest_goal() const {
    const int d0 = std::abs(agent_.x - goals_[0].x) + std::abs(agent_.y - goals_[0].y);
    const int d1 = std::abs(agent_.x - goals_[1].x) + std::abs(agent_.y - goals_[1].y);
    return d1 < d0 ? 1 : 0;
  }

  int slip(int action) {
    if (uniform01() < cfg_.slip_probability) return uniform_int(0, 3);
    return action;
  }

  // Wanders with some persistence, mostly refusing to step into lava.
  int explore_action() {
    if (explore_left_ <= 0) {
      explore_dir_ = uniform_int(0, 3);
      explore_left_ = 2;
    }
    --explore_left_;
    int a = explore_dir_;
    if (is_lava(moved(agent_, a)) && uniform01() < 0.9) {
      a = uniform_int(0, 3);
      explore_dir_ = a;
    }
    return a;
  }

  int cross_action() const {
    if (agent_.y != gap_y_ && agent_.x < lava_x_) return agent_.y > gap_y_ ? 0 : 1;
    return 3;
  }

  int approach_action() const {
    const Cell goal = goals_[nearest_goal()];
    const int dx = goal.x - agent_.x;
    const int dy = goal.y - agent_.y;
    if (std::abs(dx) >= std::abs(dy) && dx != 0) {
      const int a = dx > 0 ? 3 : 2;
      if (!is_lava(moved(agent_, a))) return a;
    }
    if (dy != 0) return dy > 0 ? 1 : 0;
    return dx > 0 ? 3 : 2;
  }

  Observation observe() const {
    const int g = cfg_.grid_size;
    if (cfg_.image_observations) {
      const auto plane = static_cast<std::size_t>(g * g);
      Observation img(3 * plane, 0.0);
      img[static_cast<std::size_t>(agent_.y * g + agent_.x)] = 1.0;
      for (int y = 0; y < g; ++y) {
        if (y != gap_y_) img[plane + static_cast<std::size_t>(y * g + lava_x_)] = 1.0;
      }
      for (const Cell& c : goals_) img[2 * plane + static_cast<std::size_t>(c.y * g + c.x)] = 1.0;
      return img;
    }
    const double scale = 1.0 / (g - 1);
    Observation o = {agent_.x * scale, agent_.y * scale, 0.0, 0.0};
    o[2 + nearest_goal()] = 1.0;
    for (int a = 0; a < 4; ++a) {
      const Cell n{agent_.x + kDx[a], agent_.y + kDy[a]};
      o.push_back(is_lava(n) ? 1.0 : 0.0);
    }
    return o;
  }

  const GridLavaConfig& cfg_;
  std::mt19937_64& rng_;
  int lava_x_ = 0;
  int gap_y_ = 0;
  std::array<Cell, 2> goals_;
  Cell agent_;
  int max_steps_ = 40;
  int explore_dir_ = 0;
  int explore_left_ = 0;
  Outcome outcome_ = Outcome::kRunning;
};

void check_gridlava(const GridLavaConfig& cfg) {
  if (cfg.num_episodes < 1) fail(ErrorKind::kInvalidConfig, "num_episodes must be >= 1");
  if (cfg.grid_size < 6) fail(ErrorKind::kInvalidConfig, "grid_size must be >= 6");
  if (cfg.slip_probability < 0.0 || cfg.slip_probability > 1.0) {
    fail(ErrorKind::kInvalidConfig, "slip_probability must lie in [0, 1]");
  }
}

}  // namespace

Dataset generate_gridlava(const GridLavaConfig& cfg) {
  check_gridlava(cfg);
  std::mt19937_64 rng(cfg.seed);
  Dataset ds;
  const auto g = static_cast<std::size_t>(cfg.grid_size);
  ds.obs_spec = cfg.image_observations ? ObservationSpec::image(g, g, 3) : ObservationSpec::vector(8);
  ds.act_spec = ActionSpec::discrete(4);
  ds.name = "gridlava-seed" + std::to_string(cfg.seed) + "-ep" + std::to_string(cfg.num_episodes) +
            "-grid" + std::to_string(cfg.grid_size) + (cfg.image_observations ? "-image" : "");
  for (int e = 0; e < cfg.num_episodes; ++e) {
    GridLavaEpisode episode(cfg, rng);
    ds.trajectories.push_back(episode.run());
  }
  ds.validate();
  return ds;
}

GridLavaStats gridlava_outcomes(const GridLavaConfig& cfg) {
  check_gridlava(cfg);
  std::mt19937_64 rng(cfg.seed);
  GridLavaStats stats;
  for (int e = 0; e < cfg.num_episodes; ++e) {
    GridLavaEpisode episode(cfg, rng);
    episode.run();
    ++stats.episodes;
    if (episode.succeeded()) ++stats.successes;
    if (episode.died()) ++stats.lava_deaths;
  }
  return stats;
}

Dataset generate_pointmass(const PointMassConfig& cfg) {
  if (cfg.num_episodes < 1) fail(ErrorKind::kInvalidConfig, "num_episodes must be >= 1");
  if (cfg.episode_len < 20) fail(ErrorKind::kInvalidConfig, "episode_len must be >= 20");
  if (!(cfg.action_noise >= 0.0)) fail(ErrorKind::kInvalidConfig, "action_noise must be >= 0");

  constexpr double kDamping = 0.8;
  constexpr double kGain = 0.5;
  constexpr double kDt = 0.1;
  constexpr double kTurnRate = 0.4;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.action_noise);
  std::uniform_int_distribution<int> duration(12, 30);
  std::uniform_int_distribution<int> first_mode(0, 2);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);

  Dataset ds;
  ds.obs_spec = ObservationSpec::vector(4);
  ds.act_spec = ActionSpec::continuous(2);
  ds.name = "pointmass-seed" + std::to_string(cfg.seed) + "-ep" + std::to_string(cfg.num_episodes) +
            "-len" + std::to_string(cfg.episode_len);

  for (int e = 0; e < cfg.num_episodes; ++e) {
    Trajectory traj;
    traj.mode_labels.emplace();
    double x = unit(rng), y = unit(rng), vx = 0.0, vy = 0.0;
    int mode = first_mode(rng);
    int remaining = duration(rng);
    double phase = angle(rng);
    for (int t = 0; t < cfg.episode_len; ++t) {
      if (remaining == 0) {
        // switch to one of the two other modes
        mode = (mode + 1 + coin(rng)) % 3;
        remaining = duration(rng);
        phase = angle(rng);
      }
      --remaining;
      double ax = 0.0, ay = 0.0;
      switch (mode) {
        case pointmass_mode::kDashEast:
          ax = 0.6;
          ay = 0.0;
          break;
        case pointmass_mode::kCircle:
          ax = -0.3 + 0.25 * std::cos(phase);
          ay = 0.52 + 0.25 * std::sin(phase);
          phase += kTurnRate;
          break;
        default:
          ax = -0.35 * vx - 0.56;
          ay = -0.35 * vy - 0.97;
          break;
      }
      ax = std::clamp(ax + noise(rng), -1.0, 1.0);
      ay = std::clamp(ay + noise(rng), -1.0, 1.0);
      traj.observations.push_back({x, y, vx, vy});
      traj.actions.push_back({ax, ay});
      traj.mode_labels->push_back(mode);
      vx = kDamping * vx + kGain * ax;
      vy = kDamping * vy + kGain * ay;
      x += kDt * vx;
      y += kDt * vy;
    }
    ds.trajectories.push_back(std::move(traj));
  }
  ds.validate();
  return ds;
}

}  // namespace bexrl::data
