#pragma once

#include <memory>
#include <vector>

#include "randlab/gridworld.hpp"
#include "randlab/transformer.hpp"

namespace randlab::infer {

// Plain forward pass (no tape) over packed weights; matches the graph
// builder's output within floating-point tolerance. Reuse one engine per
// thread for tight evaluation loops.
class ForwardEngine {
 public:
  ForwardEngine(const ModelParams& params, const TransformerConfig& cfg);
  ~ForwardEngine();
  ForwardEngine(ForwardEngine&&) noexcept;

  Tensor run(const Tensor& tokens, const Tensor& mask) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Tensor forward(const ModelParams& params, const TransformerConfig& cfg, const Tensor& tokens,
               const Tensor& mask);

// --- grid-world rollouts -------------------------------------------------

struct RolloutRequest {
  int tx = 0, ty = 0;
  SeedBlock seed;  // normal_first_token, 1 x model_dim
};

// Autoregressive argmax rollouts over both episodes, deterministic given
// (params, treasure, seed). All lanes share the parameter set and advance in
// lockstep so the MLP and projection matmuls batch across lanes.
std::vector<Trajectory> rollout_batch(const ModelParams& params, const TransformerConfig& tcfg,
                                      const GridConfig& gcfg, const std::vector<RolloutRequest>& reqs);

Trajectory rollout(const ModelParams& params, const TransformerConfig& tcfg, const GridConfig& gcfg,
                   int tx, int ty, const SeedBlock& seed);

struct GridFitness {
  double fitness = 0;        // worst-case (min over cells) seed-mean reward
  double mean = 0;           // mean over cells and seeds
  int worst_x = 0, worst_y = 0;
  std::vector<double> cell_means;  // side*side row-major (x*side+y); start cell NaN
};

// Evaluates all side*side-1 treasure cells (start excluded) x seeds.
GridFitness grid_fitness(const ModelParams& params, const TransformerConfig& tcfg,
                         const GridConfig& gcfg, const std::vector<SeedBlock>& seeds);

}  // namespace randlab::infer
