#include "randlab/transformer.hpp"

#include <cmath>

namespace randlab {

void TransformerConfig::validate() const {
  if (depth < 1 || heads < 1 || key_size < 1 || model_dim < 1)
    throw TensorError("TransformerConfig: depth/heads/key_size/model_dim must be positive");
  if (key_size > model_dim) throw TensorError("TransformerConfig: key_size > model_dim");
  if (use_output_embedding && output_dim < 1)
    throw TensorError("TransformerConfig: output_dim must be positive");
  if (rse_mode == RseMode::none && rse_dim != 0)
    throw TensorError("TransformerConfig: rse_mode none requires rse_dim 0");
  if (rse_mode == RseMode::uniform_scalar && rse_dim != 1)
    throw TensorError("TransformerConfig: uniform_scalar requires rse_dim 1");
}

Tensor& ModelParams::get(std::string_view name) {
  for (auto& [n, t] : named)
    if (n == name) return t;
  throw TensorError("ModelParams: no tensor named " + std::string(name));
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& [n, t] : named)
    if (n == name) return t;
  throw TensorError("ModelParams: no tensor named " + std::string(name));
}

bool ModelParams::has(std::string_view name) const {
  for (const auto& [n, t] : named)
    if (n == name) return true;
  return false;
}

size_t ModelParams::total_entries() const {
  size_t s = 0;
  for (const auto& [n, t] : named) s += t.size();
  return s;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(total_entries());
  for (const auto& [n, t] : named) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

void ModelParams::unflatten(const std::vector<double>& flat) {
  size_t pos = 0;
  for (auto& [n, t] : named) {
    if (pos + t.size() > flat.size()) throw TensorError("unflatten: vector too short");
    std::copy(flat.begin() + pos, flat.begin() + pos + t.size(), t.data.begin());
    pos += t.size();
  }
  if (pos != flat.size()) throw TensorError("unflatten: vector too long");
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams out;
  out.named.reserve(other.named.size());
  for (const auto& [n, t] : other.named) out.named.emplace_back(n, Tensor(t.rows(), t.cols()));
  return out;
}

namespace {

Tensor trunc_normal(int rows, int cols, double sigma, Rng& rng) {
  Tensor t(rows, cols);
  for (auto& v : t.data) v = sigma * rng.truncated_normal(2.0);
  return t;
}

Tensor ones_row(int cols) {
  Tensor t(1, cols);
  t.fill(1.0);
  return t;
}

}  // namespace

ModelParams init_params(const TransformerConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  const int dm = cfg.model_dim;
  const int hk = cfg.heads * cfg.key_size;
  const double skip_scale = 1.0 / (2.0 * std::sqrt(static_cast<double>(cfg.depth)));
  for (int b = 0; b < cfg.depth; ++b) {
    const std::string pre = "blk" + std::to_string(b) + ".";
    p.named.emplace_back(pre + "ln1.g", ones_row(dm));
    p.named.emplace_back(pre + "ln1.b", Tensor(1, dm));
    p.named.emplace_back(pre + "wq", trunc_normal(dm, hk, std::sqrt(1.0 / dm), rng));
    p.named.emplace_back(pre + "wk", trunc_normal(dm, hk, std::sqrt(1.0 / dm), rng));
    p.named.emplace_back(pre + "wv", trunc_normal(dm, hk, std::sqrt(1.0 / dm), rng));
    p.named.emplace_back(pre + "wp", trunc_normal(hk, dm, skip_scale * std::sqrt(1.0 / hk), rng));
    p.named.emplace_back(pre + "ln2.g", ones_row(dm));
    p.named.emplace_back(pre + "ln2.b", Tensor(1, dm));
    p.named.emplace_back(pre + "w1", trunc_normal(dm, 4 * dm, std::sqrt(1.0 / dm), rng));
    p.named.emplace_back(pre + "w2", trunc_normal(4 * dm, dm, skip_scale * std::sqrt(1.0 / (4.0 * dm)), rng));
  }
  if (cfg.use_output_embedding)
    p.named.emplace_back("out.w", trunc_normal(dm, cfg.output_dim, std::sqrt(1.0 / dm), rng));
  if (cfg.grid_embeddings) {
    p.named.emplace_back("grid.emb_row", trunc_normal(cfg.grid_side, cfg.grid_embed_dim, 1.0, rng));
    p.named.emplace_back("grid.emb_col", trunc_normal(cfg.grid_side, cfg.grid_embed_dim, 1.0, rng));
  }
  return p;
}

Tensor sinusoidal_encoding(int len, int dim) {
  Tensor pe(len, dim);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      pe.at(pos, i) = std::sin(pos * freq);
      if (i + 1 < dim) pe.at(pos, i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

int padded_width(int raw_width, const TransformerConfig& cfg) {
  const int unit = cfg.heads * cfg.key_size;
  const int rem = raw_width % unit;
  return rem == 0 ? raw_width : raw_width + unit - rem;
}

Tensor pad_cols(const Tensor& tokens, int width) {
  if (width < tokens.cols()) throw TensorError("pad_cols: narrower than input");
  if (width == tokens.cols()) return tokens;
  Tensor out(tokens.rows(), width);
  for (int i = 0; i < tokens.rows(); ++i)
    std::copy(tokens.row(i), tokens.row(i) + tokens.cols(), out.row(i));
  return out;
}

SeedBlock make_seed_block(RseMode mode, int len, int dim, uint64_t generator_seed) {
  SeedBlock s;
  s.mode = mode;
  s.generator_seed = generator_seed;
  Rng rng(generator_seed);
  switch (mode) {
    case RseMode::none:
      s.values = Tensor(0, 0);
      break;
    case RseMode::binary_shared: {
      Tensor row(1, dim);
      for (auto& v : row.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
      s.values = Tensor(len, dim);
      for (int i = 0; i < len; ++i)
        std::copy(row.data.begin(), row.data.end(), s.values.row(i));
      break;
    }
    case RseMode::uniform_scalar:
      s.values = Tensor(len, 1);
      for (auto& v : s.values.data) v = rng.uniform();
      break;
    case RseMode::normal_first_token:
      s.values = Tensor(1, dim);
      for (auto& v : s.values.data) v = rng.normal();
      break;
  }
  return s;
}

Tensor attach_rse(const Tensor& tokens, const SeedBlock& seed) {
  switch (seed.mode) {
    case RseMode::none:
      return tokens;
    case RseMode::binary_shared:
    case RseMode::uniform_scalar: {
      if (seed.values.rows() != tokens.rows())
        throw TensorError("attach_rse: seed rows " + seed.values.shape_str() + " do not match tokens " +
                          tokens.shape_str());
      Tensor out(tokens.rows(), tokens.cols() + seed.values.cols());
      for (int i = 0; i < tokens.rows(); ++i) {
        std::copy(tokens.row(i), tokens.row(i) + tokens.cols(), out.row(i));
        std::copy(seed.values.row(i), seed.values.row(i) + seed.values.cols(), out.row(i) + tokens.cols());
      }
      return out;
    }
    case RseMode::normal_first_token: {
      if (seed.values.cols() != tokens.cols())
        throw TensorError("attach_rse: first-token seed width " + seed.values.shape_str() +
                          " does not match tokens " + tokens.shape_str());
      Tensor out(tokens.rows() + 1, tokens.cols());
      std::copy(seed.values.data.begin(), seed.values.data.end(), out.data.begin());
      std::copy(tokens.data.begin(), tokens.data.end(), out.data.begin() + tokens.cols());
      return out;
    }
  }
  throw TensorError("attach_rse: bad mode");
}

Tensor causal_mask(int len) {
  Tensor m(len, len);
  for (int i = 0; i < len; ++i)
    for (int j = 0; j <= i; ++j) m.at(i, j) = 1.0;
  return m;
}

Tensor full_mask(int len) {
  Tensor m(len, len);
  m.fill(1.0);
  return m;
}

ParamNodes bind_params(Graph& g, const ModelParams& params) {
  ParamNodes out;
  out.ids.reserve(params.named.size());
  for (const auto& [n, t] : params.named) out.ids.emplace_back(n, g.param(n, t));
  return out;
}

Graph::Id ParamNodes::get(std::string_view name) const {
  for (const auto& [n, id] : ids)
    if (n == name) return id;
  throw TensorError("ParamNodes: no param named " + std::string(name));
}

void write_params(Graph& g, const ParamNodes& nodes, const ModelParams& params) {
  if (nodes.ids.size() != params.named.size()) throw TensorError("write_params: structure mismatch");
  for (size_t i = 0; i < nodes.ids.size(); ++i) g.set_value(nodes.ids[i].second, params.named[i].second);
}

void accumulate_param_grads(const Graph& g, const ParamNodes& nodes, double coeff, ModelParams& grads_out) {
  for (size_t i = 0; i < nodes.ids.size(); ++i) {
    const Tensor& src = g.grad(nodes.ids[i].second);
    Tensor& dst = grads_out.named[i].second;
    for (size_t k = 0; k < dst.size(); ++k) dst.data[k] += coeff * src.data[k];
  }
}

Graph::Id transformer_forward(Graph& g, const ParamNodes& params, const TransformerConfig& cfg,
                              Graph::Id tokens, const Tensor& mask) {
  const int L = g.value(tokens).rows();
  if (mask.rows() != L || mask.cols() != L)
    throw TensorError("transformer_forward: mask must be L x L");
  // Additive bias: 0 where attention is allowed, -1e30 where masked. Shared
  // by both attention kinds so that the only difference between them is the
  // normalization step.
  Tensor bias(L, L);
  for (size_t i = 0; i < bias.size(); ++i) bias.data[i] = (1.0 - mask.data[i]) * -1e30;
  return transformer_forward(g, params, cfg, tokens, g.constant(mask), g.constant(bias));
}

Graph::Id transformer_forward(Graph& g, const ParamNodes& params, const TransformerConfig& cfg,
                              Graph::Id tokens, Graph::Id mask, Graph::Id mask_bias) {
  cfg.validate();
  const int L = g.value(tokens).rows();
  const int dm = cfg.model_dim;
  if (g.value(tokens).cols() != dm)
    throw TensorError("transformer_forward: tokens must be L x model_dim, got " +
                      g.value(tokens).shape_str());
  const Graph::Id bias_id = mask_bias;
  const Graph::Id mask_id = mask;

  Graph::Id x = g.add(tokens, g.constant(sinusoidal_encoding(L, dm)));
  for (int b = 0; b < cfg.depth; ++b) {
    const std::string pre = "blk" + std::to_string(b) + ".";
    // attention sublayer, pre-LayerNorm
    Graph::Id h = g.colwise_add(g.colwise_mul(g.layer_norm(x), params.get(pre + "ln1.g")),
                                params.get(pre + "ln1.b"));
    Graph::Id q = g.matmul(h, params.get(pre + "wq"));
    Graph::Id k = g.matmul(h, params.get(pre + "wk"));
    Graph::Id v = g.matmul(h, params.get(pre + "wv"));
    Graph::Id heads_out = -1;
    for (int hd = 0; hd < cfg.heads; ++hd) {
      const int c0 = hd * cfg.key_size, c1 = (hd + 1) * cfg.key_size;
      Graph::Id qh = g.slice(q, 0, L, c0, c1);
      Graph::Id kh = g.slice(k, 0, L, c0, c1);
      Graph::Id vh = g.slice(v, 0, L, c0, c1);
      Graph::Id scores = g.add(g.matmul(qh, g.transpose(kh)), bias_id);
      Graph::Id attn = cfg.attention == AttentionKind::softmax ? g.row_softmax(scores) : scores;
      attn = g.mul(attn, mask_id);
      Graph::Id oh = g.matmul(attn, vh);
      heads_out = hd == 0 ? oh : g.concat_cols(heads_out, oh);
    }
    x = g.add(x, g.matmul(heads_out, params.get(pre + "wp")));
    // MLP sublayer, pre-LayerNorm
    Graph::Id h2 = g.colwise_add(g.colwise_mul(g.layer_norm(x), params.get(pre + "ln2.g")),
                                 params.get(pre + "ln2.b"));
    Graph::Id z = g.matmul(h2, params.get(pre + "w1"));
    z = cfg.activation == Activation::gelu ? g.gelu(z) : g.relu(z);
    x = g.add(x, g.matmul(z, params.get(pre + "w2")));
  }
  if (cfg.use_output_embedding) x = g.matmul(x, params.get("out.w"));
  return x;
}

}  // namespace randlab
