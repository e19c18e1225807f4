#pragma once

#include <limits>
#include <vector>

#include "randlab/graph.hpp"

namespace randlab {

constexpr double kInfQ = std::numeric_limits<double>::infinity();

struct LossSpec {
  double q = 1.0;  // >= 1, kInfQ for the min-max limit
  int m = 1;       // seeds per input
};

// n x m matrix of non-negative per-(input, seed) losses; rows are inputs.
struct LossMatrix {
  int n = 0, m = 0;
  std::vector<double> v;  // row-major

  LossMatrix() = default;
  LossMatrix(int n_, int m_) : n(n_), m(m_), v(static_cast<size_t>(n_) * m_, 0.0) {}
  double& at(int i, int j) { return v[static_cast<size_t>(i) * m + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * m + j]; }
  std::vector<double> row_means() const;
};

// ((1/n) sum_i ((1/m) sum_j L_ij)^q)^(1/q); q = inf gives max of row means.
// Direct evaluation for moderate q, log-space above kLogSpaceQ.
double empirical_q_loss(const LossMatrix& losses, double q);
double empirical_q_loss_direct(const LossMatrix& losses, double q);
double empirical_q_loss_logspace(const LossMatrix& losses, double q);
constexpr double kLogSpaceQ = 30.0;

// d(empirical_q_loss)/d(row_mean_i) for finite q; used by the trainer to
// weight per-row gradients. Exact and overflow-safe via max normalization.
std::vector<double> q_loss_row_coefficients(const std::vector<double>& row_means, double q);

// Builds the empirical q-norm objective inside the graph from per-(input,
// seed) scalar loss nodes. The max row mean is read from the forward values
// and embedded as a constant; the objective is scale-invariant in that
// constant, so gradients are exact. q = inf is rejected (not differentiable).
Graph::Id q_loss_node(Graph& g, const std::vector<std::vector<Graph::Id>>& losses, double q);

// Finite two-player loss game over enumerated inputs (rows) and seeds (cols).
struct FiniteGame {
  LossMatrix table;
  std::vector<double> input_dist;
  std::vector<double> seed_dist;
};

struct YaoResult {
  double lhs = 0, mid = 0, rhs = 0;
  bool holds = false;
};

// lhs = min_j E_X[L(X, r_j)], mid = E[L(X, R)], rhs = max_i E_R[L(x_i, R)].
YaoResult yao_check(const FiniteGame& game);

struct AdvantageResult {
  double det_minmax = 0;   // min over single seeds of the worst-input loss
  double rand_minmax = 0;  // worst-input loss of the uniform seed mixture
};

AdvantageResult randomized_advantage_demo(const FiniteGame& game);

}  // namespace randlab
