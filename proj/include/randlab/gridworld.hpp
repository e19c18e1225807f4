#pragma once

#include <cstdint>
#include <vector>

#include "randlab/tensor.hpp"

namespace randlab {

// 5x5 treasure hunt. The agent starts in the lower-left corner (0, 0); cell
// coordinates are (x, y) with x to the right and y up. Two episodes; the
// position resets between them while the context (handled by the rollout)
// keeps growing.
struct GridConfig {
  int side = 5;
  int episode_len = 25;
  int episodes = 2;
  double step_reward = -0.1;
  double find_reward = 1.0;
};

enum class GridAction : uint8_t { left = 0, up = 1, right = 2, down = 3 };

struct GridState {
  int x = 0, y = 0;
  int tx = 0, ty = 0;  // treasure, never (0, 0)
  int step_in_episode = 0;
  int episode_index = 0;
  bool found_this_episode = false;
};

struct GridStepResult {
  double reward = 0;
  bool episode_done = false;
  bool all_done = false;
  bool found = false;
  int x = 0, y = 0;  // position after the move, before any episode reset
};

// One transition: move (walls keep the agent in place), collect the reward,
// reset position and found flag at episode end. The state afterwards holds
// the environment's next state (post-reset at an episode boundary), which is
// what the fed-back token encodes; the result keeps the pre-reset position
// for trajectory accounting.
GridStepResult env_step(GridState& state, GridAction action, const GridConfig& cfg);

struct Trajectory {
  struct Step {
    int x, y;            // position after the move
    GridAction action;
    double reward;
    int episode;
  };
  std::vector<Step> steps;
  double total_reward = 0;
  int found_step_ep1 = -1;  // steps into episode 1 when found, -1 if never
  int found_step_ep2 = -1;
};

// Per cell, mean over trajectories of the first step count at which the cell
// is occupied during episode 1; never-visited cells count as episode_len.
Tensor first_visit_map(const std::vector<Trajectory>& trajectories, const GridConfig& cfg);
Tensor first_visit_counts(const Trajectory& t, const GridConfig& cfg);  // one trajectory

std::string trajectory_to_jsonl(const Trajectory& t, int tx, int ty, uint64_t seed);

}  // namespace randlab
