#include "randlab/adam.hpp"

#include <cmath>

namespace randlab {

double lr_schedule(int step, const AdamConfig& cfg) {
  if (step <= 0) return 0.0;
  if (step < cfg.warmup_steps)
    return cfg.peak_lr * static_cast<double>(step) / cfg.warmup_steps;
  const int span = cfg.total_steps - cfg.warmup_steps;
  if (span <= 0 || step >= cfg.total_steps) return cfg.final_lr;
  const double frac = static_cast<double>(step - cfg.warmup_steps) / span;
  if (cfg.decay == LrDecay::cosine)
    return cfg.final_lr + 0.5 * (cfg.peak_lr - cfg.final_lr) * (1.0 + std::cos(M_PI * frac));
  return cfg.peak_lr + (cfg.final_lr - cfg.peak_lr) * frac;
}

double clip_global_norm(ModelParams& grads, double max_norm) {
  if (max_norm <= 0.0) throw TensorError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& [n, g] : grads.named)
    for (double v : g.data) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [n, g] : grads.named)
      for (double& v : g.data) v *= scale;
  }
  return norm;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const AdamConfig& cfg, double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.named.size(); ++i) {
    Tensor& p = params.named[i].second;
    const Tensor& g = grads.named[i].second;
    Tensor& m = state.m.named[i].second;
    Tensor& v = state.v.named[i].second;
    for (size_t k = 0; k < p.size(); ++k) {
      m.data[k] = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * g.data[k];
      v.data[k] = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * g.data[k] * g.data[k];
      const double mhat = m.data[k] / bc1;
      const double vhat = v.data[k] / bc2;
      double update = mhat / (std::sqrt(vhat) + cfg.eps);
      if (cfg.weight_decay > 0.0) update += cfg.weight_decay * p.data[k];
      p.data[k] -= lr * update;
    }
  }
}

}  // namespace randlab
