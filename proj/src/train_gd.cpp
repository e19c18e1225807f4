#include "randlab/train_gd.hpp"

#include <cmath>

#include "randlab/threads.hpp"

namespace randlab {

const char* task_name(TaskKind t) {
  switch (t) {
    case TaskKind::recall: return "recall";
    case TaskKind::coloring: return "coloring";
    case TaskKind::gridworld: return "gridworld";
  }
  return "?";
}

const char* baseline_name(BaselineKind b) {
  switch (b) {
    case BaselineKind::E_r0: return "E_r0";
    case BaselineKind::q_r0: return "q_r0";
    case BaselineKind::E_R: return "E_R";
    case BaselineKind::q_R: return "q_R";
  }
  return "?";
}

TaskKind parse_task(const std::string& s) {
  if (s == "recall") return TaskKind::recall;
  if (s == "coloring") return TaskKind::coloring;
  if (s == "gridworld") return TaskKind::gridworld;
  throw TensorError("unknown task: " + s);
}

BaselineKind parse_baseline(const std::string& s) {
  if (s == "E_r0") return BaselineKind::E_r0;
  if (s == "q_r0") return BaselineKind::q_r0;
  if (s == "E_R") return BaselineKind::E_R;
  if (s == "q_R") return BaselineKind::q_R;
  throw TensorError("unknown baseline: " + s);
}

int recall_token_width(int n, int d_v, int rse_dim) { return d_v + n + rse_dim; }

TransformerConfig recall_arch(int n, int d_v) {
  TransformerConfig c;
  c.depth = 2;
  c.heads = 1;
  c.key_size = 5;
  c.attention = AttentionKind::linear;
  c.mask = MaskKind::causal;
  c.rse_mode = RseMode::binary_shared;
  c.rse_dim = 10;
  c.output_dim = d_v;
  c.use_output_embedding = true;
  c.model_dim = padded_width(recall_token_width(n, d_v, c.rse_dim), c);
  return c;
}

TransformerConfig coloring_arch(int n) {
  TransformerConfig c;
  c.depth = 2;
  c.heads = 1;
  c.key_size = 16;
  c.attention = AttentionKind::softmax;
  c.mask = MaskKind::graph_local;
  c.rse_mode = RseMode::uniform_scalar;
  c.rse_dim = 1;
  c.output_dim = 3;
  c.use_output_embedding = true;
  c.model_dim = padded_width(n + 1, c);
  return c;
}

TransformerConfig gridworld_arch() {
  TransformerConfig c;
  c.depth = 2;
  c.heads = 4;
  c.key_size = 10;
  c.attention = AttentionKind::softmax;
  c.mask = MaskKind::causal;
  c.rse_mode = RseMode::normal_first_token;
  c.rse_dim = 0;  // the seed is a whole first token, not extra columns
  c.output_dim = 4;
  c.use_output_embedding = true;
  c.grid_embeddings = true;
  c.model_dim = padded_width(2 * c.grid_embed_dim + 1, c);
  return c;
}

namespace {

// Reusable per-worker tape: leaves for tokens, mask/bias (and the per-task
// target or edge matrix) are rewritten per (row, seed) pair and the tape is
// replayed. Parameter leaves are rewritten once per step.
struct Workspace {
  Graph g;
  ParamNodes pnodes;
  Graph::Id tokens = -1, mask = -1, bias = -1;
  Graph::Id target = -1;  // recall: 1 x d_v bits
  Graph::Id edges = -1;   // coloring: directed edge indicator N x N
  Graph::Id loss = -1, readout = -1;
};

struct RowTaskData {
  // per instance
  Tensor mask, bias, edges, target;
  CycleInstance cycle;        // coloring
  RecallInstance recall;      // recall
  std::vector<SeedBlock> const* seeds = nullptr;
};

Tensor mask_bias(const Tensor& mask) {
  Tensor b(mask.rows(), mask.cols());
  for (size_t i = 0; i < b.size(); ++i) b.data[i] = (1.0 - mask.data[i]) * -1e30;
  return b;
}

}  // namespace

struct GdTrainer::Impl {
  GdTrainConfig cfg;
  int m_eff;
  double q_eff;
  ModelParams params;
  AdamState adam;
  int64_t step = 0;
  Rng instances, seeds;
  SeedBlock r0;
  bool has_r0 = false;

  std::vector<Workspace> ws;            // one per worker
  std::vector<ModelParams> row_grads;   // one per batch row
  std::vector<RowTaskData> rows;
  LossMatrix losses;
  std::vector<uint8_t> successes;       // n x m

  explicit Impl(const GdTrainConfig& c)
      : cfg(c),
        m_eff(baseline_fixed_seed(c.baseline) ? 1 : c.loss.m),
        q_eff(baseline_expected_loss(c.baseline) ? 1.0 : c.loss.q),
        instances(derive_seed(c.master_seed, "train_instances")),
        seeds(derive_seed(c.master_seed, "train_seeds")) {
    if (cfg.task == TaskKind::gridworld)
      throw TensorError("GdTrainer: the grid world trains gradient-free");
    if (q_eff != 1.0 && !(q_eff >= 1.0))
      throw TensorError("GdTrainer: q must be >= 1");
    if (q_eff == kInfQ)
      throw TensorError("GdTrainer: q = inf is not differentiable; use a finite q");
    cfg.arch.validate();
    Rng init = derive_stream(cfg.master_seed, "init");
    params = init_params(cfg.arch, init);
    adam = AdamState::init(params);
    if (baseline_fixed_seed(cfg.baseline)) {
      Rng r0s = derive_stream(cfg.master_seed, "r0");
      r0 = draw_seed_block(r0s);
      has_r0 = true;
    }
    const int n = cfg.adam.batch_size;
    row_grads.assign(n, ModelParams::zeros_like(params));
    rows.resize(n);
    losses = LossMatrix(n, m_eff);
    successes.assign(static_cast<size_t>(n) * m_eff, 0);
    ws.resize(std::max(1, cfg.threads));
  }

  int seq_len() const { return cfg.task == TaskKind::recall ? cfg.seq_n + 1 : cfg.seq_n; }

  SeedBlock draw_seed_block(Rng& stream) {
    const uint64_t gs = stream.next_u64();
    return make_seed_block(cfg.arch.rse_mode, seq_len(), cfg.arch.rse_dim, gs);
  }

  void build_workspace(Workspace& w) {
    const int L = seq_len();
    const int dm = cfg.arch.model_dim;
    w.pnodes = bind_params(w.g, params);
    w.tokens = w.g.input("tokens", L, dm);
    w.mask = w.g.input("mask", L, L);
    w.bias = w.g.input("bias", L, L);
    Graph::Id out = transformer_forward(w.g, w.pnodes, cfg.arch, w.tokens, w.mask, w.bias);
    if (cfg.task == TaskKind::recall) {
      w.target = w.g.input("target", 1, cfg.d_v);
      w.readout = w.g.slice(out, L - 1, L, 0, cfg.d_v);
      w.loss = recall_loss_node(w.g, w.readout, w.target);
    } else {
      w.edges = w.g.input("edges", L, L);
      w.readout = w.g.row_softmax(out);
      w.loss = w.g.sum_all(w.g.mul(w.g.matmul(w.readout, w.g.transpose(w.readout)), w.edges));
    }
  }

  void prepare_row(int i, Rng& stream) {
    RowTaskData& r = rows[i];
    if (cfg.task == TaskKind::recall) {
      r.recall = sample_recall_instance(stream, cfg.seq_n, cfg.d_v);
      if (r.mask.size() == 0) {
        r.mask = causal_mask(seq_len());
        r.bias = mask_bias(r.mask);
      }
      r.target = Tensor(1, cfg.d_v);
      for (int j = 0; j < cfg.d_v; ++j) r.target.at(0, j) = r.recall.values.at(r.recall.query_index, j);
    } else {
      r.cycle = sample_cycle(stream, cfg.seq_n);
      r.mask = cycle_mask(r.cycle);
      r.bias = mask_bias(r.mask);
      r.edges = Tensor(cfg.seq_n, cfg.seq_n);
      for (const auto& [u, v] : r.cycle.edges()) r.edges.at(u, v) = 1.0;
    }
  }

  // Runs forward + backward for every seed of one row, accumulating the
  // plain gradient sum over seeds into row_grads[i].
  void run_row(int i, int worker, const std::vector<SeedBlock>& step_seeds) {
    Workspace& w = ws[worker];
    if (w.loss < 0) {
      build_workspace(w);
      write_params(w.g, w.pnodes, params);
    }
    RowTaskData& r = rows[i];
    ModelParams& grad = row_grads[i];
    for (auto& [n, t] : grad.named) t.fill(0.0);

    w.g.set_value(w.mask, r.mask);
    w.g.set_value(w.bias, r.bias);
    if (cfg.task == TaskKind::recall)
      w.g.set_value(w.target, r.target);
    else
      w.g.set_value(w.edges, r.edges);

    for (int j = 0; j < m_eff; ++j) {
      const SeedBlock& seed = step_seeds[j];
      Tensor tokens;
      if (cfg.task == TaskKind::recall)
        tokens = encode_recall_tokens(r.recall, seed).first;
      else
        tokens = encode_coloring_tokens(r.cycle, seed);
      w.g.set_value(w.tokens, pad_cols(tokens, cfg.arch.model_dim));
      w.g.replay();
      losses.at(i, j) = w.g.value(w.loss).data[0];
      successes[static_cast<size_t>(i) * m_eff + j] = row_success(w, r) ? 1 : 0;
      w.g.backward(w.loss);
      accumulate_param_grads(w.g, w.pnodes, 1.0, grad);
    }
  }

  bool row_success(Workspace& w, const RowTaskData& r) const {
    const Tensor& out = w.g.value(w.readout);
    if (cfg.task == TaskKind::recall) {
      const Tensor& target = w.g.value(w.target);
      for (int j = 0; j < cfg.d_v; ++j) {
        const double p = 1.0 / (1.0 + std::exp(-out.at(0, j)));
        if ((p >= 0.5 ? 1.0 : 0.0) != target.at(0, j)) return false;
      }
      return true;
    }
    return coloring_valid(out, r.cycle);
  }

  void one_step(const std::function<void(const MetricRow&)>& on_log) {
    const double lr = lr_schedule(static_cast<int>(step) + 1, cfg.adam);
    const int n = cfg.adam.batch_size;
    for (int i = 0; i < n; ++i) prepare_row(i, instances);
    std::vector<SeedBlock> step_seeds;
    if (has_r0) {
      step_seeds.push_back(r0);
    } else {
      step_seeds.reserve(m_eff);
      for (int j = 0; j < m_eff; ++j) step_seeds.push_back(draw_seed_block(seeds));
    }

    const int nthreads = std::max(1, cfg.threads);
    for (auto& w : ws)
      if (w.loss >= 0) write_params(w.g, w.pnodes, params);
    parallel_for(n, nthreads, [&](int i, int worker) { run_row(i, worker, step_seeds); });

    const auto row_means = losses.row_means();
    const auto coeffs = q_loss_row_coefficients(row_means, q_eff);
    ModelParams grad = ModelParams::zeros_like(params);
    for (int i = 0; i < n; ++i) {
      const double c = coeffs[i] / m_eff;
      if (c == 0.0) continue;
      for (size_t k = 0; k < grad.named.size(); ++k) {
        const auto& src = row_grads[i].named[k].second.data;
        auto& dst = grad.named[k].second.data;
        for (size_t e = 0; e < dst.size(); ++e) dst[e] += c * src[e];
      }
    }
    const double pre_norm = clip_global_norm(grad, cfg.adam.clip_norm);
    adam_step(params, grad, adam, cfg.adam, lr);
    step += 1;

    if (on_log && (step % cfg.log_every == 0 || step == 1 || step >= cfg.adam.total_steps)) {
      MetricRow row;
      row.step = step;
      row.loss = empirical_q_loss(losses, q_eff);
      row.lr = lr;
      double s = 0.0;
      for (uint8_t v : successes) s += v;
      row.success = s / successes.size();
      row.grad_norm = pre_norm;
      on_log(row);
    }
  }
};

GdTrainer::GdTrainer(const GdTrainConfig& cfg) : impl_(std::make_unique<Impl>(cfg)) {}
GdTrainer::~GdTrainer() = default;

void GdTrainer::run_to(int64_t target_step, const std::function<void(const MetricRow&)>& on_log) {
  while (impl_->step < target_step) impl_->one_step(on_log);
}

int64_t GdTrainer::step() const { return impl_->step; }
const ModelParams& GdTrainer::params() const { return impl_->params; }
ModelParams& GdTrainer::mutable_params() { return impl_->params; }
AdamState& GdTrainer::adam_state() { return impl_->adam; }
const SeedBlock& GdTrainer::r0() const { return impl_->r0; }
bool GdTrainer::has_r0() const { return impl_->has_r0; }
Rng& GdTrainer::instance_stream() { return impl_->instances; }
Rng& GdTrainer::seed_stream() { return impl_->seeds; }
const GdTrainConfig& GdTrainer::config() const { return impl_->cfg; }

TrainOutput train_gd(const GdTrainConfig& cfg) {
  GdTrainer t(cfg);
  TrainOutput out;
  t.run_to(cfg.adam.total_steps, [&](const MetricRow& r) { out.log.push_back(r); });
  out.params = t.params();
  out.has_r0 = t.has_r0();
  if (t.has_r0()) out.r0 = t.r0();
  return out;
}

}  // namespace randlab
