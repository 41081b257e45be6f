#pragma once

#include <cstdint>

#include "bexrl/data/dataset.hpp"

namespace bexrl::data {

// Planted behavior modes emitted by the synthetic generators.
namespace gridlava_mode {
inline constexpr int kExplore = 0;
inline constexpr int kCrossLava = 1;
inline constexpr int kApproachGoal = 2;
}  // namespace gridlava_mode

namespace pointmass_mode {
inline constexpr int kDashEast = 0;
inline constexpr int kCircle = 1;
inline constexpr int kBrake = 2;
}  // namespace pointmass_mode

struct GridLavaConfig {
  std::uint64_t seed = 0;
  int num_episodes = 50;
  int grid_size = 8;
  // Emit 3-channel (agent, lava, goal) occupancy images instead of feature vectors.
  bool image_observations = false;
  // Probability that any scripted step is replaced by a uniformly random move.
  double slip_probability = 0.35;
};

struct PointMassConfig {
  std::uint64_t seed = 0;
  int num_episodes = 50;
  int episode_len = 80;
  double action_noise = 0.1;  // standard deviation added to every action component
};

// Two-goal gridworld with a lava wall. Actions: 0 up, 1 down, 2 left, 3 right.
// Vector observation: (x, y) scaled to [0,1], one-hot nearest goal, lava flags
// for the up/down/left/right neighbours.
Dataset generate_gridlava(const GridLavaConfig& cfg);

// 2-D point mass with velocity damping. Observation [x, y, vx, vy], action in
// [-1, 1]^2.
Dataset generate_pointmass(const PointMassConfig& cfg);

struct GridLavaStats {
  int episodes = 0;
  int successes = 0;
  int lava_deaths = 0;
};

// Outcome counts for the scripted policy, used to calibrate its suboptimality.
GridLavaStats gridlava_outcomes(const GridLavaConfig& cfg);

}  // namespace bexrl::data
