#include "randlab/coloring.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace randlab {

std::vector<std::pair<int, int>> CycleInstance::edges() const {
  std::vector<std::pair<int, int>> e;
  const int n = size();
  e.reserve(n);
  for (int t = 0; t < n; ++t) e.emplace_back(order[t], order[(t + 1) % n]);
  return e;
}

CycleInstance canonical_cycle(std::vector<int> order) {
  const int n = static_cast<int>(order.size());
  if (n < 3) throw TensorError("canonical_cycle: need at least 3 vertices");
  auto it = std::find(order.begin(), order.end(), 0);
  if (it == order.end()) throw TensorError("canonical_cycle: vertex 0 missing");
  std::rotate(order.begin(), it, order.end());
  if (order[1] > order[n - 1]) std::reverse(order.begin() + 1, order.end());
  return CycleInstance{std::move(order)};
}

CycleInstance sample_cycle(Rng& rng, int n) {
  if (n < 3) throw TensorError("sample_cycle: need at least 3 vertices");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates over positions 1..n-1; vertex 0 stays first.
  for (int i = n - 1; i > 1; --i) {
    const int j = 1 + rng.uniform_int(i);
    std::swap(order[i], order[j]);
  }
  return canonical_cycle(std::move(order));
}

uint64_t cycle_count(int n) {
  uint64_t f = 1;
  for (int k = 2; k <= n - 1; ++k) f *= k;
  return f / 2;
}

CycleEnumerator::CycleEnumerator(int n) : n_(n), perm_(n > 1 ? n - 1 : 0) {
  if (n < 3) throw TensorError("CycleEnumerator: need at least 3 vertices");
  std::iota(perm_.begin(), perm_.end(), 1);
}

bool CycleEnumerator::next(CycleInstance& out) {
  for (;;) {
    if (done_) return false;
    if (!first_) {
      if (!std::next_permutation(perm_.begin(), perm_.end())) {
        done_ = true;
        return false;
      }
    }
    first_ = false;
    if (perm_.front() < perm_.back()) {
      out.order.assign(1, 0);
      out.order.insert(out.order.end(), perm_.begin(), perm_.end());
      return true;
    }
  }
}

Tensor cycle_mask(const CycleInstance& cycle) {
  const int n = cycle.size();
  Tensor m = Tensor::identity(n);
  for (const auto& [u, v] : cycle.edges()) {
    m.at(u, v) = 1.0;
    m.at(v, u) = 1.0;
  }
  return m;
}

Tensor encode_coloring_tokens(const CycleInstance& cycle, const SeedBlock& seed) {
  const int n = cycle.size();
  if (seed.mode != RseMode::uniform_scalar || seed.values.rows() != n)
    throw TensorError("encode_coloring_tokens: expects a uniform_scalar seed with one row per vertex");
  return attach_rse(Tensor::identity(n), seed);
}

double partial_coloring_loss(const Tensor& probs, const CycleInstance& cycle) {
  if (probs.rows() != cycle.size() || probs.cols() != 3)
    throw TensorError("partial_coloring_loss: probs must be N x 3");
  double loss = 0.0;
  for (const auto& [u, v] : cycle.edges())
    for (int c = 0; c < 3; ++c) loss += probs.at(u, c) * probs.at(v, c);
  return loss;
}

Graph::Id partial_coloring_loss_node(Graph& g, Graph::Id probs, const CycleInstance& cycle) {
  std::vector<int> heads, tails;
  for (const auto& [u, v] : cycle.edges()) {
    heads.push_back(u);
    tails.push_back(v);
  }
  Graph::Id pu = g.gather_rows(probs, heads);
  Graph::Id pv = g.gather_rows(probs, tails);
  return g.sum_all(g.mul(pu, pv));
}

std::vector<int> argmax_colors(const Tensor& probs) {
  std::vector<int> colors(probs.rows());
  for (int i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < probs.cols(); ++c)
      if (probs.at(i, c) > probs.at(i, best)) best = c;
    colors[i] = best;
  }
  return colors;
}

bool coloring_valid_colors(const std::vector<int>& colors, const CycleInstance& cycle) {
  for (const auto& [u, v] : cycle.edges())
    if (colors[u] == colors[v]) return false;
  return true;
}

bool coloring_valid(const Tensor& probs, const CycleInstance& cycle) {
  return coloring_valid_colors(argmax_colors(probs), cycle);
}

std::string cycle_to_string(const CycleInstance& cycle) {
  std::ostringstream os;
  for (int i = 0; i < cycle.size(); ++i) os << (i ? "," : "") << cycle.order[i];
  return os.str();
}

CycleInstance cycle_from_string(const std::string& text) {
  std::vector<int> order;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) order.push_back(std::stoi(tok));
  CycleInstance c{std::move(order)};
  const int n = c.size();
  if (n < 3) throw TensorError("cycle_from_string: need at least 3 vertices");
  std::vector<bool> seen(n, false);
  for (int v : c.order) {
    if (v < 0 || v >= n || seen[v]) throw TensorError("cycle_from_string: not a permutation");
    seen[v] = true;
  }
  return c;
}

}  // namespace randlab
