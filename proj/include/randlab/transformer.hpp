#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "randlab/graph.hpp"
#include "randlab/rng.hpp"
#include "randlab/tensor.hpp"

namespace randlab {

enum class AttentionKind : uint8_t { softmax, linear };
enum class MaskKind : uint8_t { causal, graph_local, full };
enum class RseMode : uint8_t { none, binary_shared, uniform_scalar, normal_first_token };
enum class Activation : uint8_t { gelu, relu };

struct TransformerConfig {
  int depth = 2;
  int heads = 1;
  int key_size = 5;
  int model_dim = 0;
  int output_dim = 0;
  AttentionKind attention = AttentionKind::softmax;
  MaskKind mask = MaskKind::causal;
  int rse_dim = 0;
  RseMode rse_mode = RseMode::none;
  bool use_output_embedding = true;
  Activation activation = Activation::gelu;
  // Grid agent extras: learnable coordinate embeddings, one table per axis.
  bool grid_embeddings = false;
  int grid_side = 5;
  int grid_embed_dim = 32;

  void validate() const;
};

// Trainable weights as an ordered name -> tensor list. The order is the
// construction order and is what checkpoints, Adam state and PGPE flattening
// all rely on.
struct ModelParams {
  std::vector<std::pair<std::string, Tensor>> named;

  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  bool has(std::string_view name) const;
  size_t total_entries() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
  static ModelParams zeros_like(const ModelParams& other);
};

// Truncated-normal fan-in init (cut at 2 sigma, not rescaled); matrices that
// feed a residual connection carry the extra 1/(2*sqrt(depth)) factor.
ModelParams init_params(const TransformerConfig& cfg, Rng& rng);

Tensor sinusoidal_encoding(int len, int dim);

// Round token width up to a multiple of heads*key_size.
int padded_width(int raw_width, const TransformerConfig& cfg);
Tensor pad_cols(const Tensor& tokens, int width);

struct SeedBlock {
  RseMode mode = RseMode::none;
  uint64_t generator_seed = 0;
  Tensor values;
};

SeedBlock make_seed_block(RseMode mode, int len, int dim, uint64_t generator_seed);
Tensor attach_rse(const Tensor& tokens, const SeedBlock& seed);

Tensor causal_mask(int len);
Tensor full_mask(int len);

// Differentiable forward pass. `tokens` must already be L x model_dim
// (RSE attached, padded); the mask is an L x L 0-1 matrix.
struct ParamNodes {
  std::vector<std::pair<std::string, Graph::Id>> ids;
  Graph::Id get(std::string_view name) const;
};

ParamNodes bind_params(Graph& g, const ModelParams& params);
void write_params(Graph& g, const ParamNodes& nodes, const ModelParams& params);
// grads_out[name] += coeff * d loss / d param
void accumulate_param_grads(const Graph& g, const ParamNodes& nodes, double coeff, ModelParams& grads_out);

Graph::Id transformer_forward(Graph& g, const ParamNodes& params, const TransformerConfig& cfg,
                              Graph::Id tokens, const Tensor& mask);

// Variant with the mask and its additive bias ((1 - mask) * -1e30) as graph
// nodes, so one tape can be replayed across instances with different masks.
Graph::Id transformer_forward(Graph& g, const ParamNodes& params, const TransformerConfig& cfg,
                              Graph::Id tokens, Graph::Id mask, Graph::Id mask_bias);

}  // namespace randlab
