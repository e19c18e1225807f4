#pragma once

#include <cstdint>

#include "randlab/transformer.hpp"

namespace randlab {

enum class LrDecay : uint8_t { linear, cosine };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-5;
  double weight_decay = 0.0;  // decoupled
  double clip_norm = 1.0;
  int warmup_steps = 2000;
  double peak_lr = 0.003;
  double final_lr = 0.0003;
  int total_steps = 20000;
  int batch_size = 512;
  LrDecay decay = LrDecay::linear;
};

// Linear warmup 0 -> peak, then decay to final_lr, hitting it exactly at
// total_steps.
double lr_schedule(int step, const AdamConfig& cfg);

// Scales all gradients by max_norm/norm when the joint L2 norm exceeds
// max_norm; returns the pre-clip norm.
double clip_global_norm(ModelParams& grads, double max_norm);

struct AdamState {
  ModelParams m, v;
  int64_t step = 0;

  static AdamState init(const ModelParams& params) {
    return AdamState{ModelParams::zeros_like(params), ModelParams::zeros_like(params), 0};
  }
};

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const AdamConfig& cfg, double lr);

}  // namespace randlab
