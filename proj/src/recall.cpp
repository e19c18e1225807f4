#include "randlab/recall.hpp"

#include <cmath>

#include <json.hpp>

namespace randlab {

RecallInstance sample_recall_instance(Rng& rng, int n, int d_v) {
  if (n < 1 || d_v < 1) throw TensorError("sample_recall_instance: n and d_v must be >= 1");
  RecallInstance inst;
  inst.n = n;
  inst.d_v = d_v;
  inst.values = Tensor(n, d_v);
  for (auto& v : inst.values.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  inst.query_index = rng.uniform_int(n);
  return inst;
}

std::pair<Tensor, Tensor> encode_recall_tokens(const RecallInstance& inst, const SeedBlock& seed) {
  const int n = inst.n, d_v = inst.d_v;
  Tensor base(n + 1, d_v + n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d_v; ++j) base.at(i, j) = inst.values.at(i, j);
    base.at(i, d_v + i) = 1.0;
  }
  base.at(n, d_v + inst.query_index) = 1.0;  // value slot stays zero
  return {attach_rse(base, seed), causal_mask(n + 1)};
}

double recall_loss(const std::vector<double>& logits, const std::vector<double>& target_bits) {
  if (logits.size() != target_bits.size()) throw TensorError("recall_loss: size mismatch");
  double loss = 0.0;
  for (size_t j = 0; j < logits.size(); ++j) {
    if (!std::isfinite(logits[j])) throw TensorError("recall_loss: non-finite logit");
    double p = 1.0 / (1.0 + std::exp(-logits[j]));
    p = std::min(1.0 - kProbClip, std::max(kProbClip, p));
    loss += target_bits[j] > 0.5 ? -std::log(p) : -std::log(1.0 - p);
  }
  return loss;
}

Graph::Id recall_loss_node(Graph& g, Graph::Id logits_row, const Tensor& target_bits) {
  return recall_loss_node(g, logits_row, g.constant(target_bits));
}

Graph::Id recall_loss_node(Graph& g, Graph::Id logits_row, Graph::Id target_bits) {
  const Tensor& lv = g.value(logits_row);
  const Tensor& tv = g.value(target_bits);
  if (lv.rows() != 1 || tv.rows() != 1 || lv.cols() != tv.cols())
    throw TensorError("recall_loss_node: logits and targets must be matching 1 x d_v rows");
  Graph::Id p = g.clamp(g.sigmoid(logits_row), kProbClip, 1.0 - kProbClip);
  Graph::Id pos = g.mul(g.log(p), target_bits);
  Graph::Id neg = g.mul(g.log(g.affine(p, -1.0, 1.0)), g.affine(target_bits, -1.0, 1.0));
  return g.affine(g.sum_all(g.add(pos, neg)), -1.0);
}

std::vector<int> recall_decision(const std::vector<double>& probs) {
  std::vector<int> bits(probs.size());
  for (size_t j = 0; j < probs.size(); ++j) bits[j] = probs[j] >= 0.5 ? 1 : 0;
  return bits;
}

bool recall_success(const std::vector<double>& probs, const std::vector<double>& target_bits) {
  if (probs.size() != target_bits.size()) throw TensorError("recall_success: size mismatch");
  for (size_t j = 0; j < probs.size(); ++j)
    if ((probs[j] >= 0.5 ? 1.0 : 0.0) != target_bits[j]) return false;
  return true;
}

RecallEvalSet make_recall_eval_set(int num_value_matrices, int n, int d_v, uint64_t sample_seed) {
  RecallEvalSet s;
  s.n = n;
  s.d_v = d_v;
  s.sample_seed = sample_seed;
  Rng rng(sample_seed);
  s.instances.reserve(static_cast<size_t>(num_value_matrices) * n);
  for (int k = 0; k < num_value_matrices; ++k) {
    RecallInstance base = sample_recall_instance(rng, n, d_v);
    for (int q = 0; q < n; ++q) {
      RecallInstance inst = base;
      inst.query_index = q;
      s.instances.push_back(std::move(inst));
    }
  }
  return s;
}

std::string recall_eval_set_to_json(const RecallEvalSet& s) {
  nlohmann::ordered_json j;
  j["task"] = "recall";
  j["n"] = s.n;
  j["d_v"] = s.d_v;
  j["sample_seed"] = s.sample_seed;
  auto& arr = j["instances"] = nlohmann::ordered_json::array();
  for (const auto& inst : s.instances) {
    nlohmann::ordered_json e;
    std::string bits;
    bits.reserve(inst.values.size());
    for (double v : inst.values.data) bits.push_back(v > 0.5 ? '1' : '0');
    e["values"] = bits;  // row-major N*d_v bit string
    e["query"] = inst.query_index;
    arr.push_back(std::move(e));
  }
  return j.dump();
}

RecallEvalSet recall_eval_set_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RecallEvalSet s;
  s.n = j.at("n").get<int>();
  s.d_v = j.at("d_v").get<int>();
  s.sample_seed = j.at("sample_seed").get<uint64_t>();
  for (const auto& e : j.at("instances")) {
    RecallInstance inst;
    inst.n = s.n;
    inst.d_v = s.d_v;
    inst.query_index = e.at("query").get<int>();
    const std::string bits = e.at("values").get<std::string>();
    if (static_cast<int>(bits.size()) != s.n * s.d_v)
      throw TensorError("recall_eval_set_from_json: bad bit string length");
    inst.values = Tensor(s.n, s.d_v);
    for (size_t i = 0; i < bits.size(); ++i) inst.values.data[i] = bits[i] == '1' ? 1.0 : 0.0;
    s.instances.push_back(std::move(inst));
  }
  return s;
}

}  // namespace randlab
