#pragma once

#include <utility>
#include <vector>

#include "randlab/graph.hpp"
#include "randlab/rng.hpp"
#include "randlab/transformer.hpp"

namespace randlab {

// Associative recall: N binary value vectors keyed by one-hot positions; the
// final token queries one key and the model must emit that value's bits.
struct RecallInstance {
  Tensor values;    // N x d_v, entries in {0,1}
  int query_index = 0;
  int n = 0;
  int d_v = 0;
};

RecallInstance sample_recall_instance(Rng& rng, int n, int d_v);

// Token i < N is [v_i, one-hot(i)]; the query token has a zero value slot and
// one-hot(query_index) in the key slot. Seed columns are appended per row.
// Returns (tokens (N+1) x (d_v + N + d_r), causal mask).
std::pair<Tensor, Tensor> encode_recall_tokens(const RecallInstance& inst, const SeedBlock& seed);

constexpr double kProbClip = 1e-7;

// Sum of per-bit binary cross-entropies; probabilities are sigmoid(logits)
// clipped to [kProbClip, 1 - kProbClip].
double recall_loss(const std::vector<double>& logits, const std::vector<double>& target_bits);
Graph::Id recall_loss_node(Graph& g, Graph::Id logits_row, const Tensor& target_bits);
// Target as a graph input, for tapes replayed across instances.
Graph::Id recall_loss_node(Graph& g, Graph::Id logits_row, Graph::Id target_bits);

// Per-bit threshold at 0.5 on probabilities.
std::vector<int> recall_decision(const std::vector<double>& probs);
bool recall_success(const std::vector<double>& probs, const std::vector<double>& target_bits);

struct RecallEvalSet {
  int n = 0, d_v = 0;
  uint64_t sample_seed = 0;
  std::vector<RecallInstance> instances;  // value matrices x all query positions
};

// Fixed evaluation set: `num_value_matrices` sampled value matrices crossed
// with every query position, seeded for exact reruns.
RecallEvalSet make_recall_eval_set(int num_value_matrices, int n, int d_v, uint64_t sample_seed);

std::string recall_eval_set_to_json(const RecallEvalSet& s);
RecallEvalSet recall_eval_set_from_json(const std::string& text);

}  // namespace randlab
