#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "randlab/graph.hpp"
#include "randlab/rng.hpp"
#include "randlab/transformer.hpp"

namespace randlab {

// Undirected cycle over vertex ids 0..N-1, stored as the cyclic order of the
// ids. Canonical form: order[0] == 0 and order[1] < order[N-1], so each of
// the (N-1)!/2 distinct cycles appears exactly once.
struct CycleInstance {
  std::vector<int> order;

  int size() const { return static_cast<int>(order.size()); }
  // edges are (order[t], order[t+1 mod N])
  std::vector<std::pair<int, int>> edges() const;
};

CycleInstance canonical_cycle(std::vector<int> order);
CycleInstance sample_cycle(Rng& rng, int n);
uint64_t cycle_count(int n);  // (n-1)!/2

// Iterates every canonical cycle of size n exactly once.
class CycleEnumerator {
 public:
  explicit CycleEnumerator(int n);
  bool next(CycleInstance& out);

 private:
  int n_;
  std::vector<int> perm_;
  bool done_ = false;
  bool first_ = true;
};

// mask(i, j) = 1 iff i == j or {i, j} is a cycle edge; rows sum to 3.
Tensor cycle_mask(const CycleInstance& cycle);

// Token for vertex v is [one-hot(v), r_v]; the per-vertex seed scalar column
// comes from a uniform_scalar SeedBlock.
Tensor encode_coloring_tokens(const CycleInstance& cycle, const SeedBlock& seed);

// sum over edges of sum_c P(u=c) P(v=c); upper-bounds the probability that
// independent per-vertex sampling yields an invalid coloring.
double partial_coloring_loss(const Tensor& probs, const CycleInstance& cycle);
Graph::Id partial_coloring_loss_node(Graph& g, Graph::Id probs, const CycleInstance& cycle);

std::vector<int> argmax_colors(const Tensor& probs);  // ties -> lowest color
bool coloring_valid_colors(const std::vector<int>& colors, const CycleInstance& cycle);
bool coloring_valid(const Tensor& probs, const CycleInstance& cycle);

std::string cycle_to_string(const CycleInstance& cycle);  // comma-separated ids
CycleInstance cycle_from_string(const std::string& text);

}  // namespace randlab
