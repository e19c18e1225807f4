#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "randlab/adam.hpp"
#include "randlab/losses.hpp"
#include "randlab/recall.hpp"
#include "randlab/coloring.hpp"

namespace randlab {

enum class TaskKind : uint8_t { recall, coloring, gridworld };
enum class BaselineKind : uint8_t { E_r0, q_r0, E_R, q_R };

const char* task_name(TaskKind t);
const char* baseline_name(BaselineKind b);
TaskKind parse_task(const std::string& s);
BaselineKind parse_baseline(const std::string& s);
inline bool baseline_fixed_seed(BaselineKind b) { return b == BaselineKind::E_r0 || b == BaselineKind::q_r0; }
inline bool baseline_expected_loss(BaselineKind b) { return b == BaselineKind::E_r0 || b == BaselineKind::E_R; }

struct MetricRow {
  int64_t step = 0;
  double loss = 0;
  double lr = 0;
  double success = 0;
  double grad_norm = 0;
};

struct GdTrainConfig {
  TaskKind task = TaskKind::recall;
  BaselineKind baseline = BaselineKind::q_R;
  LossSpec loss;            // q used by q_* baselines, m by *_R baselines
  AdamConfig adam;
  TransformerConfig arch;   // model_dim already resolved
  int seq_n = 12;           // recall sequence length / cycle size
  int d_v = 5;              // recall value width
  int log_every = 100;
  int threads = 1;
  uint64_t master_seed = 1;
};

// One training step samples a batch of task instances and m seed blocks,
// builds the n x m loss matrix, and minimizes the empirical q-norm loss by
// clipped Adam. Rows are processed in parallel; each (row, seed) pair runs
// forward + backward on a reusable per-worker tape and the q-norm row
// coefficients weight the per-row gradient sums, so results are identical
// for any thread count.
class GdTrainer {
 public:
  explicit GdTrainer(const GdTrainConfig& cfg);
  ~GdTrainer();

  void run_to(int64_t target_step, const std::function<void(const MetricRow&)>& on_log = nullptr);

  int64_t step() const;
  const ModelParams& params() const;
  ModelParams& mutable_params();
  AdamState& adam_state();
  const SeedBlock& r0() const;  // valid for fixed-seed baselines
  bool has_r0() const;
  Rng& instance_stream();
  Rng& seed_stream();
  const GdTrainConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct TrainOutput {
  ModelParams params;
  SeedBlock r0;
  bool has_r0 = false;
  std::vector<MetricRow> log;
};

TrainOutput train_gd(const GdTrainConfig& cfg);

// Task-derived architecture helpers.
int recall_token_width(int n, int d_v, int rse_dim);
TransformerConfig recall_arch(int n, int d_v);
TransformerConfig coloring_arch(int n);
TransformerConfig gridworld_arch();

}  // namespace randlab
