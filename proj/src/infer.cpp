#include "randlab/infer.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace randlab::infer {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

namespace {

RowMat to_eigen(const Tensor& t) {
  return Eigen::Map<const RowMat>(t.data.data(), t.rows(), t.cols());
}

inline double gelu_f(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

struct BlockW {
  RowVec ln1_g, ln1_b, ln2_g, ln2_b;
  RowMat wq, wk, wv, wp, w1, w2;
};

struct Packed {
  TransformerConfig cfg;
  std::vector<BlockW> blocks;
  RowMat out_w, emb_row, emb_col;

  Packed(const ModelParams& p, const TransformerConfig& c) : cfg(c) {
    cfg.validate();
    blocks.resize(cfg.depth);
    for (int b = 0; b < cfg.depth; ++b) {
      const std::string pre = "blk" + std::to_string(b) + ".";
      BlockW& w = blocks[b];
      w.ln1_g = to_eigen(p.get(pre + "ln1.g")).row(0);
      w.ln1_b = to_eigen(p.get(pre + "ln1.b")).row(0);
      w.ln2_g = to_eigen(p.get(pre + "ln2.g")).row(0);
      w.ln2_b = to_eigen(p.get(pre + "ln2.b")).row(0);
      w.wq = to_eigen(p.get(pre + "wq"));
      w.wk = to_eigen(p.get(pre + "wk"));
      w.wv = to_eigen(p.get(pre + "wv"));
      w.wp = to_eigen(p.get(pre + "wp"));
      w.w1 = to_eigen(p.get(pre + "w1"));
      w.w2 = to_eigen(p.get(pre + "w2"));
    }
    if (cfg.use_output_embedding) out_w = to_eigen(p.get("out.w"));
    if (cfg.grid_embeddings) {
      emb_row = to_eigen(p.get("grid.emb_row"));
      emb_col = to_eigen(p.get("grid.emb_col"));
    }
  }
};

constexpr double kLnEps = 1e-6;

void layer_norm_affine(const RowMat& x, const RowVec& gain, const RowVec& bias, RowMat& y) {
  const int n = static_cast<int>(x.cols());
  y.resize(x.rows(), n);
  for (int i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().sum() / n;
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    y.row(i) = (((x.row(i).array() - mu) * inv) * gain.array() + bias.array()).matrix();
  }
}

void activation_inplace(RowMat& z, Activation act) {
  if (act == Activation::gelu) {
    for (int i = 0; i < z.rows(); ++i)
      for (int j = 0; j < z.cols(); ++j) z(i, j) = gelu_f(z(i, j));
  } else {
    z = z.cwiseMax(0.0);
  }
}

void row_softmax_inplace(RowMat& s) {
  for (int i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace

struct ForwardEngine::Impl {
  Packed pk;
  Impl(const ModelParams& p, const TransformerConfig& c) : pk(p, c) {}
};

ForwardEngine::ForwardEngine(const ModelParams& params, const TransformerConfig& cfg)
    : impl_(std::make_unique<Impl>(params, cfg)) {}
ForwardEngine::~ForwardEngine() = default;
ForwardEngine::ForwardEngine(ForwardEngine&&) noexcept = default;

Tensor ForwardEngine::run(const Tensor& tokens, const Tensor& mask) const {
  const Packed& pk = impl_->pk;
  const TransformerConfig& cfg = pk.cfg;
  const int L = tokens.rows(), dm = cfg.model_dim, dk = cfg.key_size;
  if (tokens.cols() != dm) throw TensorError("infer::forward: tokens must be L x model_dim");
  if (mask.rows() != L || mask.cols() != L) throw TensorError("infer::forward: mask must be L x L");

  RowMat x = to_eigen(tokens) + to_eigen(sinusoidal_encoding(L, dm));
  const RowMat m = to_eigen(mask);
  RowMat bias = (RowMat::Constant(L, L, 1.0) - m) * -1e30;

  RowMat h, q, k, v, o(L, cfg.heads * dk), s, z;
  for (const BlockW& w : pk.blocks) {
    layer_norm_affine(x, w.ln1_g, w.ln1_b, h);
    q.noalias() = h * w.wq;
    k.noalias() = h * w.wk;
    v.noalias() = h * w.wv;
    for (int hd = 0; hd < cfg.heads; ++hd) {
      const int c0 = hd * dk;
      s.noalias() = q.middleCols(c0, dk) * k.middleCols(c0, dk).transpose();
      s += bias;
      if (cfg.attention == AttentionKind::softmax) row_softmax_inplace(s);
      s = s.cwiseProduct(m);
      o.middleCols(c0, dk).noalias() = s * v.middleCols(c0, dk);
    }
    x.noalias() += o * w.wp;
    layer_norm_affine(x, w.ln2_g, w.ln2_b, h);
    z.noalias() = h * w.w1;
    activation_inplace(z, cfg.activation);
    x.noalias() += z * w.w2;
  }
  RowMat out = cfg.use_output_embedding ? RowMat(x * pk.out_w) : x;
  Tensor result(static_cast<int>(out.rows()), static_cast<int>(out.cols()));
  Eigen::Map<RowMat>(result.data.data(), out.rows(), out.cols()) = out;
  return result;
}

Tensor forward(const ModelParams& params, const TransformerConfig& cfg, const Tensor& tokens,
               const Tensor& mask) {
  return ForwardEngine(params, cfg).run(tokens, mask);
}

// --- grid-world rollouts -------------------------------------------------

namespace {

struct Lane {
  GridState st;
  Trajectory traj;
  uint64_t seed = 0;
  bool done = false;
};

}  // namespace

std::vector<Trajectory> rollout_batch(const ModelParams& params, const TransformerConfig& tcfg,
                                      const GridConfig& gcfg, const std::vector<RolloutRequest>& reqs) {
  if (reqs.empty()) return {};
  if (!tcfg.grid_embeddings || tcfg.rse_mode != RseMode::normal_first_token || tcfg.output_dim != 4)
    throw TensorError("rollout_batch: config must use grid embeddings, a normal first token and 4 outputs");
  const Packed pk(params, tcfg);
  const int dm = tcfg.model_dim, dk = tcfg.key_size, H = tcfg.heads, hk = H * dk;
  const int emb = tcfg.grid_embed_dim;
  const int max_tokens = gcfg.episodes * gcfg.episode_len + 1;
  const int B = static_cast<int>(reqs.size());
  const RowMat pe = to_eigen(sinusoidal_encoding(max_tokens, dm));

  std::vector<Lane> lanes(B);
  RowMat cur(B, dm);
  for (int l = 0; l < B; ++l) {
    const RolloutRequest& r = reqs[l];
    if (r.tx == 0 && r.ty == 0) throw TensorError("rollout_batch: treasure may not be the start cell");
    if (r.seed.mode != RseMode::normal_first_token || r.seed.values.rows() != 1 ||
        r.seed.values.cols() != dm)
      throw TensorError("rollout_batch: seed must be a 1 x model_dim first token");
    lanes[l].st.tx = r.tx;
    lanes[l].st.ty = r.ty;
    lanes[l].seed = r.seed.generator_seed;
    lanes[l].traj.steps.reserve(gcfg.episodes * gcfg.episode_len);
    cur.row(l) = to_eigen(r.seed.values).row(0) + pe.row(0);
  }

  // Per block, per lane key/value caches; every active lane has the same
  // context length, so rows [0, t] are always filled.
  std::vector<std::vector<RowMat>> kc(tcfg.depth), vc(tcfg.depth);
  for (int b = 0; b < tcfg.depth; ++b) {
    kc[b].assign(B, RowMat(max_tokens, hk));
    vc[b].assign(B, RowMat(max_tokens, hk));
  }

  std::vector<int> active(B);
  for (int l = 0; l < B; ++l) active[l] = l;

  RowMat x, h, q, k, v, o, z, logits;
  std::vector<double> scores(max_tokens);
  for (int t = 0; t < max_tokens && !active.empty(); ++t) {
    const int ba = static_cast<int>(active.size());
    x.resize(ba, dm);
    for (int a = 0; a < ba; ++a) x.row(a) = cur.row(active[a]);

    for (int b = 0; b < tcfg.depth; ++b) {
      const BlockW& w = pk.blocks[b];
      layer_norm_affine(x, w.ln1_g, w.ln1_b, h);
      q.noalias() = h * w.wq;
      k.noalias() = h * w.wk;
      v.noalias() = h * w.wv;
      o.resize(ba, hk);
      for (int a = 0; a < ba; ++a) {
        const int l = active[a];
        kc[b][l].row(t) = k.row(a);
        vc[b][l].row(t) = v.row(a);
        for (int hd = 0; hd < H; ++hd) {
          const int c0 = hd * dk;
          const auto qh = q.row(a).segment(c0, dk);
          for (int j = 0; j <= t; ++j) scores[j] = qh.dot(kc[b][l].row(j).segment(c0, dk));
          if (tcfg.attention == AttentionKind::softmax) {
            double mx = scores[0];
            for (int j = 1; j <= t; ++j) mx = std::max(mx, scores[j]);
            double sum = 0.0;
            for (int j = 0; j <= t; ++j) {
              scores[j] = std::exp(scores[j] - mx);
              sum += scores[j];
            }
            const double inv = 1.0 / sum;
            for (int j = 0; j <= t; ++j) scores[j] *= inv;
          }
          auto oh = o.row(a).segment(c0, dk);
          oh.setZero();
          for (int j = 0; j <= t; ++j) oh += scores[j] * vc[b][l].row(j).segment(c0, dk);
        }
      }
      x.noalias() += o * w.wp;
      layer_norm_affine(x, w.ln2_g, w.ln2_b, h);
      z.noalias() = h * w.w1;
      activation_inplace(z, tcfg.activation);
      x.noalias() += z * w.w2;
    }
    logits.noalias() = x * pk.out_w;

    std::vector<int> still;
    still.reserve(ba);
    for (int a = 0; a < ba; ++a) {
      const int l = active[a];
      Lane& lane = lanes[l];
      int act = 0;
      for (int c = 1; c < 4; ++c)
        if (logits(a, c) > logits(a, act)) act = c;
      const int episode = lane.st.episode_index;
      const GridStepResult res = env_step(lane.st, static_cast<GridAction>(act), gcfg);
      lane.traj.steps.push_back({res.x, res.y, static_cast<GridAction>(act), res.reward, episode});
      lane.traj.total_reward += res.reward;
      if (res.found) {
        if (episode == 0 && lane.traj.found_step_ep1 < 0)
          lane.traj.found_step_ep1 = static_cast<int>(lane.traj.steps.size());
        if (episode == 1 && lane.traj.found_step_ep2 < 0) {
          int ep2_steps = 0;
          for (const auto& s : lane.traj.steps)
            if (s.episode == 1) ep2_steps += 1;
          lane.traj.found_step_ep2 = ep2_steps;
        }
      }
      if (res.all_done) {
        lane.done = true;
        continue;
      }
      // Feed back the environment's next state and the reward.
      cur.row(l).setZero();
      cur.row(l).segment(0, emb) = pk.emb_row.row(lane.st.x);
      cur.row(l).segment(emb, emb) = pk.emb_col.row(lane.st.y);
      cur(l, 2 * emb) = res.reward;
      cur.row(l) += pe.row(t + 1);
      still.push_back(l);
    }
    active = std::move(still);
  }

  std::vector<Trajectory> out;
  out.reserve(B);
  for (auto& lane : lanes) out.push_back(std::move(lane.traj));
  return out;
}

Trajectory rollout(const ModelParams& params, const TransformerConfig& tcfg, const GridConfig& gcfg,
                   int tx, int ty, const SeedBlock& seed) {
  return rollout_batch(params, tcfg, gcfg, {RolloutRequest{tx, ty, seed}})[0];
}

GridFitness grid_fitness(const ModelParams& params, const TransformerConfig& tcfg,
                         const GridConfig& gcfg, const std::vector<SeedBlock>& seeds) {
  if (seeds.empty()) throw TensorError("grid_fitness: need at least one seed");
  const int side = gcfg.side;
  std::vector<RolloutRequest> reqs;
  reqs.reserve(static_cast<size_t>(side * side - 1) * seeds.size());
  for (int x = 0; x < side; ++x)
    for (int y = 0; y < side; ++y) {
      if (x == 0 && y == 0) continue;
      for (const auto& s : seeds) reqs.push_back({x, y, s});
    }
  const auto trajs = rollout_batch(params, tcfg, gcfg, reqs);

  GridFitness out;
  out.cell_means.assign(static_cast<size_t>(side) * side, std::nan(""));
  out.fitness = std::numeric_limits<double>::infinity();
  double total = 0.0;
  size_t r = 0;
  for (int x = 0; x < side; ++x)
    for (int y = 0; y < side; ++y) {
      if (x == 0 && y == 0) continue;
      double mean = 0.0;
      for (size_t s = 0; s < seeds.size(); ++s) mean += trajs[r++].total_reward;
      mean /= seeds.size();
      out.cell_means[static_cast<size_t>(x) * side + y] = mean;
      total += mean;
      if (mean < out.fitness) {
        out.fitness = mean;
        out.worst_x = x;
        out.worst_y = y;
      }
    }
  out.mean = total / (side * side - 1);
  return out;
}

}  // namespace randlab::infer
