#include "randlab/gridworld.hpp"

#include <sstream>

#include <json.hpp>

namespace randlab {

GridStepResult env_step(GridState& state, GridAction action, const GridConfig& cfg) {
  GridStepResult out;
  int nx = state.x, ny = state.y;
  switch (action) {
    case GridAction::left: nx -= 1; break;
    case GridAction::up: ny += 1; break;
    case GridAction::right: nx += 1; break;
    case GridAction::down: ny -= 1; break;
  }
  if (nx >= 0 && nx < cfg.side) state.x = nx;
  if (ny >= 0 && ny < cfg.side) state.y = ny;
  state.step_in_episode += 1;
  out.x = state.x;
  out.y = state.y;

  out.found = state.x == state.tx && state.y == state.ty;
  out.reward = out.found ? cfg.find_reward : cfg.step_reward;
  if (out.found) state.found_this_episode = true;
  out.episode_done = out.found || state.step_in_episode >= cfg.episode_len;
  if (out.episode_done) {
    state.x = 0;
    state.y = 0;
    state.step_in_episode = 0;
    state.found_this_episode = false;
    state.episode_index += 1;
    out.all_done = state.episode_index >= cfg.episodes;
  }
  return out;
}

Tensor first_visit_counts(const Trajectory& t, const GridConfig& cfg) {
  Tensor fv(cfg.side, cfg.side);
  fv.fill(static_cast<double>(cfg.episode_len));
  fv.at(0, 0) = 0.0;  // the agent occupies the start at step 0
  int step = 0;
  for (const auto& s : t.steps) {
    if (s.episode != 0) break;
    step += 1;
    if (fv.at(s.x, s.y) > step) fv.at(s.x, s.y) = step;
  }
  return fv;
}

Tensor first_visit_map(const std::vector<Trajectory>& trajectories, const GridConfig& cfg) {
  if (trajectories.empty()) throw TensorError("first_visit_map: no trajectories");
  Tensor acc(cfg.side, cfg.side);
  for (const auto& t : trajectories) {
    const Tensor fv = first_visit_counts(t, cfg);
    for (size_t i = 0; i < acc.size(); ++i) acc.data[i] += fv.data[i];
  }
  for (auto& v : acc.data) v /= trajectories.size();
  return acc;
}

std::string trajectory_to_jsonl(const Trajectory& t, int tx, int ty, uint64_t seed) {
  static const char* names[] = {"left", "up", "right", "down"};
  std::ostringstream os;
  int step = 0;
  for (const auto& s : t.steps) {
    nlohmann::ordered_json j;
    j["step"] = step++;
    j["episode"] = s.episode;
    j["position"] = {s.x, s.y};
    j["action"] = names[static_cast<int>(s.action)];
    j["reward"] = s.reward;
    j["treasure"] = {tx, ty};
    j["seed"] = seed;
    os << j.dump() << "\n";
  }
  return os.str();
}

}  // namespace randlab
