#include "randlab/losses.hpp"

#include <algorithm>
#include <cmath>

namespace randlab {

std::vector<double> LossMatrix::row_means() const {
  std::vector<double> r(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += at(i, j);
    r[i] = s / m;
  }
  return r;
}

namespace {

void validate(const LossMatrix& losses, double q) {
  if (losses.n < 1 || losses.m < 1) throw TensorError("empirical_q_loss: empty matrix");
  if (!(q >= 1.0)) throw TensorError("empirical_q_loss: q must be >= 1");
  for (double x : losses.v) {
    if (x < 0.0) throw TensorError("empirical_q_loss: negative loss entry");
    if (!std::isfinite(x)) throw TensorError("empirical_q_loss: non-finite loss entry");
  }
}

}  // namespace

double empirical_q_loss_direct(const LossMatrix& losses, double q) {
  const auto r = losses.row_means();
  if (q == 1.0) {
    double s = 0.0;
    for (double x : r) s += x;
    return s / losses.n;
  }
  double s = 0.0;
  for (double x : r) s += std::pow(x, q);
  return std::pow(s / losses.n, 1.0 / q);
}

double empirical_q_loss_logspace(const LossMatrix& losses, double q) {
  const auto r = losses.row_means();
  // log-sum-exp over q*log(r_i), then /q; zero rows drop out naturally.
  double mx = -kInfQ;
  std::vector<double> lr(r.size());
  for (size_t i = 0; i < r.size(); ++i) {
    lr[i] = r[i] > 0.0 ? q * std::log(r[i]) : -kInfQ;
    mx = std::max(mx, lr[i]);
  }
  if (mx == -kInfQ) return 0.0;
  double s = 0.0;
  for (double l : lr) s += std::exp(l - mx);
  const double lse = mx + std::log(s) - std::log(static_cast<double>(losses.n));
  return std::exp(lse / q);
}

double empirical_q_loss(const LossMatrix& losses, double q) {
  validate(losses, q);
  if (q == kInfQ) {
    const auto r = losses.row_means();
    return *std::max_element(r.begin(), r.end());
  }
  return q > kLogSpaceQ ? empirical_q_loss_logspace(losses, q) : empirical_q_loss_direct(losses, q);
}

std::vector<double> q_loss_row_coefficients(const std::vector<double>& row_means, double q) {
  const int n = static_cast<int>(row_means.size());
  std::vector<double> w(n, 0.0);
  if (q == 1.0) {
    std::fill(w.begin(), w.end(), 1.0 / n);
    return w;
  }
  if (!(q > 1.0) || q == kInfQ)
    throw TensorError("q_loss_row_coefficients: q must be finite and >= 1");
  double c = 0.0;
  for (double r : row_means) {
    if (r < 0.0) throw TensorError("q_loss_row_coefficients: negative row mean");
    c = std::max(c, r);
  }
  if (c <= 0.0) return w;  // objective flat at zero
  double s = 0.0;
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    t[i] = std::pow(row_means[i] / c, q);
    s += t[i];
  }
  s /= n;
  // dL/dr_i = S^(1/q - 1) * (1/n) * (r_i/c)^(q-1), with S the normalized sum.
  const double outer = std::pow(s, 1.0 / q - 1.0);
  for (int i = 0; i < n; ++i) w[i] = outer * std::pow(row_means[i] / c, q - 1.0) / n;
  return w;
}

Graph::Id q_loss_node(Graph& g, const std::vector<std::vector<Graph::Id>>& losses, double q) {
  if (losses.empty() || losses[0].empty()) throw TensorError("q_loss_node: empty loss grid");
  if (q == kInfQ)
    throw TensorError("q_loss_node: q = inf is not differentiable; use the enumeration adversary");
  if (!(q >= 1.0)) throw TensorError("q_loss_node: q must be >= 1");
  const int n = static_cast<int>(losses.size());
  const int m = static_cast<int>(losses[0].size());

  std::vector<Graph::Id> rows;
  rows.reserve(n);
  for (const auto& row : losses) {
    if (static_cast<int>(row.size()) != m) throw TensorError("q_loss_node: ragged loss grid");
    Graph::Id s = row[0];
    for (int j = 1; j < m; ++j) s = g.add(s, row[j]);
    rows.push_back(g.affine(s, 1.0 / m));
  }
  if (q == 1.0) {
    Graph::Id s = rows[0];
    for (int i = 1; i < n; ++i) s = g.add(s, rows[i]);
    return g.affine(s, 1.0 / n);
  }
  // Normalize by the detached max row mean so the powers stay in [0, 1]; the
  // q-norm is 1-homogeneous, so gradients through the rows are unchanged.
  double c = 0.0;
  for (Graph::Id r : rows) c = std::max(c, g.value(r).data[0]);
  if (c <= 0.0) c = 1e-300;
  Graph::Id s = -1;
  for (int i = 0; i < n; ++i) {
    Graph::Id t = g.pow_const(g.affine(rows[i], 1.0 / c), q);
    s = i == 0 ? t : g.add(s, t);
  }
  return g.affine(g.pow_const(g.affine(s, 1.0 / n), 1.0 / q), c);
}

namespace {

void validate_game(const FiniteGame& game) {
  if (game.table.n != static_cast<int>(game.input_dist.size()) ||
      game.table.m != static_cast<int>(game.seed_dist.size()))
    throw TensorError("FiniteGame: distribution sizes do not match the table");
  double sx = 0, sr = 0;
  for (double p : game.input_dist) sx += p;
  for (double p : game.seed_dist) sr += p;
  if (std::fabs(sx - 1.0) > 1e-12 || std::fabs(sr - 1.0) > 1e-12)
    throw TensorError("FiniteGame: distributions must sum to 1");
}

}  // namespace

YaoResult yao_check(const FiniteGame& game) {
  validate_game(game);
  const auto& t = game.table;
  YaoResult out;
  out.lhs = kInfQ;
  for (int j = 0; j < t.m; ++j) {
    double e = 0.0;
    for (int i = 0; i < t.n; ++i) e += game.input_dist[i] * t.at(i, j);
    out.lhs = std::min(out.lhs, e);
  }
  out.rhs = -kInfQ;
  for (int i = 0; i < t.n; ++i) {
    double e = 0.0;
    for (int j = 0; j < t.m; ++j) e += game.seed_dist[j] * t.at(i, j);
    out.rhs = std::max(out.rhs, e);
  }
  out.mid = 0.0;
  for (int i = 0; i < t.n; ++i)
    for (int j = 0; j < t.m; ++j) out.mid += game.input_dist[i] * game.seed_dist[j] * t.at(i, j);
  out.holds = out.lhs <= out.mid + 1e-10 && out.mid <= out.rhs + 1e-10;
  return out;
}

AdvantageResult randomized_advantage_demo(const FiniteGame& game) {
  const auto& t = game.table;
  if (t.n < 1 || t.m < 1) throw TensorError("randomized_advantage_demo: empty table");
  AdvantageResult out;
  out.det_minmax = kInfQ;
  for (int j = 0; j < t.m; ++j) {
    double worst = -kInfQ;
    for (int i = 0; i < t.n; ++i) worst = std::max(worst, t.at(i, j));
    out.det_minmax = std::min(out.det_minmax, worst);
  }
  out.rand_minmax = -kInfQ;
  for (int i = 0; i < t.n; ++i) {
    double e = 0.0;
    for (int j = 0; j < t.m; ++j) e += t.at(i, j);
    out.rand_minmax = std::max(out.rand_minmax, e / t.m);
  }
  return out;
}

}  // namespace randlab
