#include "randlab/graph.hpp"

#include <cmath>
#include <cstring>

namespace randlab {

const char* op_name(Op op) {
  switch (op) {
    case Op::constant: return "constant";
    case Op::input: return "input";
    case Op::param: return "param";
    case Op::matmul: return "matmul";
    case Op::transpose: return "transpose";
    case Op::add: return "add";
    case Op::affine: return "affine";
    case Op::mul: return "elementwise_mul";
    case Op::concat_rows: return "concat_rows";
    case Op::concat_cols: return "concat_cols";
    case Op::slice: return "slice";
    case Op::row_softmax: return "row_softmax";
    case Op::layer_norm: return "layer_norm";
    case Op::sigmoid: return "sigmoid";
    case Op::gelu: return "gelu";
    case Op::relu: return "relu";
    case Op::colwise_mul: return "colwise_mul";
    case Op::colwise_add: return "colwise_add";
    case Op::sum_all: return "sum_all";
    case Op::log: return "log";
    case Op::exp: return "exp";
    case Op::pow_const: return "pow_const";
    case Op::clamp: return "clamp";
    case Op::gather_rows: return "gather_rows";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw TensorError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

inline double gelu_f(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
inline double gelu_df(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * std::exp(-0.5 * x * x) * 0.3989422804014327;
}

void k_matmul(const Tensor& A, const Tensor& B, Tensor& C) {
  const int M = A.rows(), K = A.cols(), N = B.cols();
  std::fill(C.data.begin(), C.data.end(), 0.0);
  for (int i = 0; i < M; ++i) {
    const double* arow = A.row(i);
    double* crow = C.row(i);
    for (int k = 0; k < K; ++k) {
      const double a = arow[k];
      const double* brow = B.row(k);
      for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

void k_transpose(const Tensor& A, Tensor& C) {
  const int M = A.rows(), N = A.cols();
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) C.at(j, i) = A.at(i, j);
}

void k_row_softmax(const Tensor& A, Tensor& C) {
  const int M = A.rows(), N = A.cols();
  for (int i = 0; i < M; ++i) {
    const double* x = A.row(i);
    double* y = C.row(i);
    double mx = x[0];
    for (int j = 1; j < N; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (int j = 0; j < N; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < N; ++j) y[j] *= inv;
  }
}

void k_layer_norm(const Tensor& A, double eps, Tensor& C) {
  const int M = A.rows(), N = A.cols();
  for (int i = 0; i < M; ++i) {
    const double* x = A.row(i);
    double* y = C.row(i);
    double mu = 0.0;
    for (int j = 0; j < N; ++j) mu += x[j];
    mu /= N;
    double var = 0.0;
    for (int j = 0; j < N; ++j) {
      const double d = x[j] - mu;
      var += d * d;
    }
    var /= N;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < N; ++j) y[j] = (x[j] - mu) * inv;
  }
}

}  // namespace

Graph::Id Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  Node& node = nodes_.back();
  if (node.requires_grad && node.grad.size() == 0)
    node.grad = Tensor(node.value.rows(), node.value.cols());
  return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::constant(Tensor t) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(t);
  return push(std::move(n));
}

Graph::Id Graph::input(const std::string& name, int rows, int cols) {
  Node n;
  n.op = Op::input;
  n.name = name;
  n.value = Tensor(rows, cols);
  return push(std::move(n));
}

Graph::Id Graph::param(const std::string& name, Tensor t) {
  Node n;
  n.op = Op::param;
  n.name = name;
  n.value = std::move(t);
  n.requires_grad = true;
  return push(std::move(n));
}

#define RL_BINARY_PROLOGUE(opname)                      \
  Node n;                                               \
  n.a = a;                                              \
  n.b = b;                                              \
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;

#define RL_UNARY_PROLOGUE()                             \
  Node n;                                               \
  n.a = a;                                              \
  n.requires_grad = nodes_[a].requires_grad;

Graph::Id Graph::matmul(Id a, Id b) {
  if (nodes_[a].value.cols() != nodes_[b].value.rows())
    shape_error("matmul", nodes_[a].value, nodes_[b].value);
  RL_BINARY_PROLOGUE("matmul")
  n.op = Op::matmul;
  n.value = Tensor(nodes_[a].value.rows(), nodes_[b].value.cols());
  k_matmul(nodes_[a].value, nodes_[b].value, n.value);
  return push(std::move(n));
}

Graph::Id Graph::transpose(Id a) {
  RL_UNARY_PROLOGUE()
  n.op = Op::transpose;
  n.value = Tensor(nodes_[a].value.cols(), nodes_[a].value.rows());
  k_transpose(nodes_[a].value, n.value);
  return push(std::move(n));
}

Graph::Id Graph::add(Id a, Id b) {
  if (!nodes_[a].value.same_shape(nodes_[b].value))
    shape_error("add", nodes_[a].value, nodes_[b].value);
  RL_BINARY_PROLOGUE("add")
  n.op = Op::add;
  n.value = nodes_[a].value;
  for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] += nodes_[b].value.data[i];
  return push(std::move(n));
}

Graph::Id Graph::affine(Id a, double scale, double shift) {
  RL_UNARY_PROLOGUE()
  n.op = Op::affine;
  n.p0 = scale;
  n.p1 = shift;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = scale * v + shift;
  return push(std::move(n));
}

Graph::Id Graph::mul(Id a, Id b) {
  if (!nodes_[a].value.same_shape(nodes_[b].value))
    shape_error("elementwise_mul", nodes_[a].value, nodes_[b].value);
  RL_BINARY_PROLOGUE("mul")
  n.op = Op::mul;
  n.value = nodes_[a].value;
  for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] *= nodes_[b].value.data[i];
  return push(std::move(n));
}

Graph::Id Graph::concat_rows(Id a, Id b) {
  if (nodes_[a].value.cols() != nodes_[b].value.cols())
    shape_error("concat_rows", nodes_[a].value, nodes_[b].value);
  RL_BINARY_PROLOGUE("concat_rows")
  n.op = Op::concat_rows;
  const Tensor &A = nodes_[a].value, &B = nodes_[b].value;
  n.value = Tensor(A.rows() + B.rows(), A.cols());
  std::memcpy(n.value.data.data(), A.data.data(), A.size() * sizeof(double));
  std::memcpy(n.value.data.data() + A.size(), B.data.data(), B.size() * sizeof(double));
  return push(std::move(n));
}

Graph::Id Graph::concat_cols(Id a, Id b) {
  if (nodes_[a].value.rows() != nodes_[b].value.rows())
    shape_error("concat_cols", nodes_[a].value, nodes_[b].value);
  RL_BINARY_PROLOGUE("concat_cols")
  n.op = Op::concat_cols;
  const Tensor &A = nodes_[a].value, &B = nodes_[b].value;
  n.value = Tensor(A.rows(), A.cols() + B.cols());
  for (int i = 0; i < A.rows(); ++i) {
    std::memcpy(n.value.row(i), A.row(i), A.cols() * sizeof(double));
    std::memcpy(n.value.row(i) + A.cols(), B.row(i), B.cols() * sizeof(double));
  }
  return push(std::move(n));
}

Graph::Id Graph::slice(Id a, int r0, int r1, int c0, int c1) {
  const Tensor& A = nodes_[a].value;
  if (r0 < 0 || r1 > A.rows() || c0 < 0 || c1 > A.cols() || r0 >= r1 || c0 >= c1)
    throw TensorError("slice: bounds out of range for " + A.shape_str());
  RL_UNARY_PROLOGUE()
  n.op = Op::slice;
  n.i0 = r0;
  n.i1 = r1;
  n.i2 = c0;
  n.i3 = c1;
  n.value = Tensor(r1 - r0, c1 - c0);
  for (int i = r0; i < r1; ++i)
    std::memcpy(n.value.row(i - r0), A.row(i) + c0, (c1 - c0) * sizeof(double));
  return push(std::move(n));
}

Graph::Id Graph::row_softmax(Id a) {
  RL_UNARY_PROLOGUE()
  n.op = Op::row_softmax;
  n.value = Tensor(nodes_[a].value.rows(), nodes_[a].value.cols());
  k_row_softmax(nodes_[a].value, n.value);
  return push(std::move(n));
}

Graph::Id Graph::layer_norm(Id a, double eps) {
  RL_UNARY_PROLOGUE()
  n.op = Op::layer_norm;
  n.p0 = eps;
  n.value = Tensor(nodes_[a].value.rows(), nodes_[a].value.cols());
  k_layer_norm(nodes_[a].value, eps, n.value);
  return push(std::move(n));
}

Graph::Id Graph::sigmoid(Id a) {
  RL_UNARY_PROLOGUE()
  n.op = Op::sigmoid;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

Graph::Id Graph::gelu(Id a) {
  RL_UNARY_PROLOGUE()
  n.op = Op::gelu;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = gelu_f(v);
  return push(std::move(n));
}

Graph::Id Graph::relu(Id a) {
  RL_UNARY_PROLOGUE()
  n.op = Op::relu;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Graph::Id Graph::colwise_mul(Id x, Id gain) {
  if (nodes_[gain].value.rows() != 1 || nodes_[gain].value.cols() != nodes_[x].value.cols())
    shape_error("colwise_mul", nodes_[x].value, nodes_[gain].value);
  Id a = x, b = gain;
  RL_BINARY_PROLOGUE("colwise_mul")
  n.op = Op::colwise_mul;
  const Tensor& X = nodes_[x].value;
  const double* g = nodes_[gain].value.row(0);
  n.value = X;
  for (int i = 0; i < X.rows(); ++i) {
    double* y = n.value.row(i);
    for (int j = 0; j < X.cols(); ++j) y[j] *= g[j];
  }
  return push(std::move(n));
}

Graph::Id Graph::colwise_add(Id x, Id bias) {
  if (nodes_[bias].value.rows() != 1 || nodes_[bias].value.cols() != nodes_[x].value.cols())
    shape_error("colwise_add", nodes_[x].value, nodes_[bias].value);
  Id a = x, b = bias;
  RL_BINARY_PROLOGUE("colwise_add")
  n.op = Op::colwise_add;
  const Tensor& X = nodes_[x].value;
  const double* bb = nodes_[bias].value.row(0);
  n.value = X;
  for (int i = 0; i < X.rows(); ++i) {
    double* y = n.value.row(i);
    for (int j = 0; j < X.cols(); ++j) y[j] += bb[j];
  }
  return push(std::move(n));
}

Graph::Id Graph::sum_all(Id a) {
  RL_UNARY_PROLOGUE()
  n.op = Op::sum_all;
  double s = 0.0;
  for (double v : nodes_[a].value.data) s += v;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Graph::Id Graph::log(Id a) {
  RL_UNARY_PROLOGUE()
  n.op = Op::log;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = std::log(v);
  return push(std::move(n));
}

Graph::Id Graph::exp(Id a) {
  RL_UNARY_PROLOGUE()
  n.op = Op::exp;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = std::exp(v);
  return push(std::move(n));
}

Graph::Id Graph::pow_const(Id a, double p) {
  RL_UNARY_PROLOGUE()
  n.op = Op::pow_const;
  n.p0 = p;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = std::pow(v, p);
  return push(std::move(n));
}

Graph::Id Graph::clamp(Id a, double lo, double hi) {
  RL_UNARY_PROLOGUE()
  n.op = Op::clamp;
  n.p0 = lo;
  n.p1 = hi;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = std::min(hi, std::max(lo, v));
  return push(std::move(n));
}

Graph::Id Graph::gather_rows(Id a, std::vector<int> rows) {
  const Tensor& A = nodes_[a].value;
  for (int r : rows)
    if (r < 0 || r >= A.rows()) throw TensorError("gather_rows: index out of range");
  RL_UNARY_PROLOGUE()
  n.op = Op::gather_rows;
  n.idx = std::move(rows);
  n.value = Tensor(static_cast<int>(n.idx.size()), A.cols());
  for (size_t i = 0; i < n.idx.size(); ++i)
    std::memcpy(n.value.row(static_cast<int>(i)), A.row(n.idx[i]), A.cols() * sizeof(double));
  return push(std::move(n));
}

void Graph::set_value(Id leaf, const Tensor& t) {
  Node& n = nodes_[leaf];
  if (n.op != Op::input && n.op != Op::param && n.op != Op::constant)
    throw TensorError("set_value: node is not a leaf");
  if (!n.value.same_shape(t)) shape_error("set_value", n.value, t);
  n.value.data = t.data;
}

void Graph::compute(Node& n) {
  const Tensor* A = n.a >= 0 ? &nodes_[n.a].value : nullptr;
  const Tensor* B = n.b >= 0 ? &nodes_[n.b].value : nullptr;
  switch (n.op) {
    case Op::constant:
    case Op::input:
    case Op::param:
      break;
    case Op::matmul:
      k_matmul(*A, *B, n.value);
      break;
    case Op::transpose:
      k_transpose(*A, n.value);
      break;
    case Op::add:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = A->data[i] + B->data[i];
      break;
    case Op::affine:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = n.p0 * A->data[i] + n.p1;
      break;
    case Op::mul:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = A->data[i] * B->data[i];
      break;
    case Op::concat_rows:
      std::memcpy(n.value.data.data(), A->data.data(), A->size() * sizeof(double));
      std::memcpy(n.value.data.data() + A->size(), B->data.data(), B->size() * sizeof(double));
      break;
    case Op::concat_cols:
      for (int i = 0; i < A->rows(); ++i) {
        std::memcpy(n.value.row(i), A->row(i), A->cols() * sizeof(double));
        std::memcpy(n.value.row(i) + A->cols(), B->row(i), B->cols() * sizeof(double));
      }
      break;
    case Op::slice:
      for (int i = n.i0; i < n.i1; ++i)
        std::memcpy(n.value.row(i - n.i0), A->row(i) + n.i2, (n.i3 - n.i2) * sizeof(double));
      break;
    case Op::row_softmax:
      k_row_softmax(*A, n.value);
      break;
    case Op::layer_norm:
      k_layer_norm(*A, n.p0, n.value);
      break;
    case Op::sigmoid:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = 1.0 / (1.0 + std::exp(-A->data[i]));
      break;
    case Op::gelu:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = gelu_f(A->data[i]);
      break;
    case Op::relu:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = A->data[i] > 0.0 ? A->data[i] : 0.0;
      break;
    case Op::colwise_mul: {
      const double* g = B->row(0);
      for (int i = 0; i < A->rows(); ++i) {
        const double* x = A->row(i);
        double* y = n.value.row(i);
        for (int j = 0; j < A->cols(); ++j) y[j] = x[j] * g[j];
      }
      break;
    }
    case Op::colwise_add: {
      const double* bb = B->row(0);
      for (int i = 0; i < A->rows(); ++i) {
        const double* x = A->row(i);
        double* y = n.value.row(i);
        for (int j = 0; j < A->cols(); ++j) y[j] = x[j] + bb[j];
      }
      break;
    }
    case Op::sum_all: {
      double s = 0.0;
      for (double v : A->data) s += v;
      n.value.data[0] = s;
      break;
    }
    case Op::log:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = std::log(A->data[i]);
      break;
    case Op::exp:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = std::exp(A->data[i]);
      break;
    case Op::pow_const:
      for (size_t i = 0; i < n.value.size(); ++i) n.value.data[i] = std::pow(A->data[i], n.p0);
      break;
    case Op::clamp:
      for (size_t i = 0; i < n.value.size(); ++i)
        n.value.data[i] = std::min(n.p1, std::max(n.p0, A->data[i]));
      break;
    case Op::gather_rows:
      for (size_t i = 0; i < n.idx.size(); ++i)
        std::memcpy(n.value.row(static_cast<int>(i)), A->row(n.idx[i]), A->cols() * sizeof(double));
      break;
  }
}

void Graph::replay() {
  for (auto& n : nodes_) compute(n);
}

void Graph::backward(Id loss) {
  Node& root = nodes_[loss];
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw TensorError("backward: loss must be scalar, got " + root.value.shape_str());
  touched_.assign(nodes_.size(), 0);
  for (auto& n : nodes_)
    if (n.requires_grad) n.grad.fill(0.0);
  if (!root.requires_grad) return;  // no parameter reaches the loss
  root.grad.data[0] = 1.0;
  touched_[loss] = 1;

  for (Id id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!touched_[id] || !n.requires_grad) continue;
    Node* na = n.a >= 0 ? &nodes_[n.a] : nullptr;
    Node* nb = n.b >= 0 ? &nodes_[n.b] : nullptr;
    const bool wa = na && na->requires_grad;
    const bool wb = nb && nb->requires_grad;
    if (wa) touched_[n.a] = 1;
    if (wb) touched_[n.b] = 1;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::constant:
      case Op::input:
      case Op::param:
        break;
      case Op::matmul: {
        const Tensor& Av = na->value;
        const Tensor& Bv = nb->value;
        const int M = Av.rows(), K = Av.cols(), N = Bv.cols();
        if (wa) {
          for (int i = 0; i < M; ++i) {
            const double* gr = g.row(i);
            double* da = na->grad.row(i);
            for (int k = 0; k < K; ++k) {
              const double* br = Bv.row(k);
              double s = 0.0;
              for (int j = 0; j < N; ++j) s += gr[j] * br[j];
              da[k] += s;
            }
          }
        }
        if (wb) {
          for (int i = 0; i < M; ++i) {
            const double* ar = Av.row(i);
            const double* gr = g.row(i);
            for (int k = 0; k < K; ++k) {
              const double a = ar[k];
              if (a == 0.0) continue;
              double* db = nb->grad.row(k);
              for (int j = 0; j < N; ++j) db[j] += a * gr[j];
            }
          }
        }
        break;
      }
      case Op::transpose:
        if (wa)
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) na->grad.at(j, i) += g.at(i, j);
        break;
      case Op::add:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i) na->grad.data[i] += g.data[i];
        if (wb)
          for (size_t i = 0; i < g.size(); ++i) nb->grad.data[i] += g.data[i];
        break;
      case Op::affine:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i) na->grad.data[i] += n.p0 * g.data[i];
        break;
      case Op::mul:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i) na->grad.data[i] += g.data[i] * nb->value.data[i];
        if (wb)
          for (size_t i = 0; i < g.size(); ++i) nb->grad.data[i] += g.data[i] * na->value.data[i];
        break;
      case Op::concat_rows:
        if (wa)
          for (size_t i = 0; i < na->value.size(); ++i) na->grad.data[i] += g.data[i];
        if (wb)
          for (size_t i = 0; i < nb->value.size(); ++i)
            nb->grad.data[i] += g.data[i + na->value.size()];
        break;
      case Op::concat_cols: {
        const int ca = na->value.cols();
        for (int i = 0; i < g.rows(); ++i) {
          const double* gr = g.row(i);
          if (wa) {
            double* da = na->grad.row(i);
            for (int j = 0; j < ca; ++j) da[j] += gr[j];
          }
          if (wb) {
            double* db = nb->grad.row(i);
            for (int j = 0; j < nb->value.cols(); ++j) db[j] += gr[ca + j];
          }
        }
        break;
      }
      case Op::slice:
        if (wa)
          for (int i = n.i0; i < n.i1; ++i) {
            const double* gr = g.row(i - n.i0);
            double* da = na->grad.row(i) + n.i2;
            for (int j = 0; j < n.i3 - n.i2; ++j) da[j] += gr[j];
          }
        break;
      case Op::row_softmax:
        if (wa)
          for (int i = 0; i < g.rows(); ++i) {
            const double* y = n.value.row(i);
            const double* gr = g.row(i);
            double* da = na->grad.row(i);
            double dot = 0.0;
            for (int j = 0; j < g.cols(); ++j) dot += gr[j] * y[j];
            for (int j = 0; j < g.cols(); ++j) da[j] += y[j] * (gr[j] - dot);
          }
        break;
      case Op::layer_norm:
        if (wa) {
          const int N = g.cols();
          for (int i = 0; i < g.rows(); ++i) {
            const double* x = na->value.row(i);
            const double* y = n.value.row(i);
            const double* gr = g.row(i);
            double* da = na->grad.row(i);
            double mu = 0.0;
            for (int j = 0; j < N; ++j) mu += x[j];
            mu /= N;
            double var = 0.0;
            for (int j = 0; j < N; ++j) var += (x[j] - mu) * (x[j] - mu);
            var /= N;
            const double inv = 1.0 / std::sqrt(var + n.p0);
            double gm = 0.0, gym = 0.0;
            for (int j = 0; j < N; ++j) {
              gm += gr[j];
              gym += gr[j] * y[j];
            }
            gm /= N;
            gym /= N;
            for (int j = 0; j < N; ++j) da[j] += inv * (gr[j] - gm - y[j] * gym);
          }
        }
        break;
      case Op::sigmoid:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i) {
            const double y = n.value.data[i];
            na->grad.data[i] += g.data[i] * y * (1.0 - y);
          }
        break;
      case Op::gelu:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i)
            na->grad.data[i] += g.data[i] * gelu_df(na->value.data[i]);
        break;
      case Op::relu:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i)
            na->grad.data[i] += na->value.data[i] > 0.0 ? g.data[i] : 0.0;
        break;
      case Op::colwise_mul: {
        const double* gv = nb->value.row(0);
        for (int i = 0; i < g.rows(); ++i) {
          const double* gr = g.row(i);
          const double* x = na->value.row(i);
          if (wa) {
            double* da = na->grad.row(i);
            for (int j = 0; j < g.cols(); ++j) da[j] += gr[j] * gv[j];
          }
          if (wb) {
            double* db = nb->grad.row(0);
            for (int j = 0; j < g.cols(); ++j) db[j] += gr[j] * x[j];
          }
        }
        break;
      }
      case Op::colwise_add:
        for (int i = 0; i < g.rows(); ++i) {
          const double* gr = g.row(i);
          if (wa) {
            double* da = na->grad.row(i);
            for (int j = 0; j < g.cols(); ++j) da[j] += gr[j];
          }
          if (wb) {
            double* db = nb->grad.row(0);
            for (int j = 0; j < g.cols(); ++j) db[j] += gr[j];
          }
        }
        break;
      case Op::sum_all:
        if (wa) {
          const double gv = g.data[0];
          for (size_t i = 0; i < na->grad.size(); ++i) na->grad.data[i] += gv;
        }
        break;
      case Op::log:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i) na->grad.data[i] += g.data[i] / na->value.data[i];
        break;
      case Op::exp:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i) na->grad.data[i] += g.data[i] * n.value.data[i];
        break;
      case Op::pow_const:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i) {
            const double x = na->value.data[i];
            double d;
            if (x == 0.0)
              d = n.p0 == 1.0 ? 1.0 : 0.0;  // subgradient choice at the origin
            else
              d = n.p0 * std::pow(x, n.p0 - 1.0);
            na->grad.data[i] += g.data[i] * d;
          }
        break;
      case Op::clamp:
        if (wa)
          for (size_t i = 0; i < g.size(); ++i) {
            const double x = na->value.data[i];
            if (x >= n.p0 && x <= n.p1) na->grad.data[i] += g.data[i];
          }
        break;
      case Op::gather_rows:
        if (wa)
          for (size_t i = 0; i < n.idx.size(); ++i) {
            const double* gr = g.row(static_cast<int>(i));
            double* da = na->grad.row(n.idx[i]);
            for (int j = 0; j < g.cols(); ++j) da[j] += gr[j];
          }
        break;
    }
  }
}

std::vector<Graph::Id> Graph::param_ids() const {
  std::vector<Id> out;
  for (size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].op == Op::param) out.push_back(static_cast<Id>(i));
  return out;
}

Tensor primitive_forward(Op op, const std::vector<Tensor>& inputs, const std::vector<double>& attrs) {
  Graph g;
  std::vector<Graph::Id> ids;
  ids.reserve(inputs.size());
  for (const auto& t : inputs) ids.push_back(g.constant(t));
  auto need = [&](size_t k) {
    if (inputs.size() != k)
      throw TensorError(std::string(op_name(op)) + ": expects " + std::to_string(k) + " inputs");
  };
  auto attr = [&](size_t i, double dflt) { return attrs.size() > i ? attrs[i] : dflt; };
  Graph::Id out;
  switch (op) {
    case Op::matmul: need(2); out = g.matmul(ids[0], ids[1]); break;
    case Op::transpose: need(1); out = g.transpose(ids[0]); break;
    case Op::add: need(2); out = g.add(ids[0], ids[1]); break;
    case Op::affine: need(1); out = g.affine(ids[0], attr(0, 1.0), attr(1, 0.0)); break;
    case Op::mul: need(2); out = g.mul(ids[0], ids[1]); break;
    case Op::concat_rows: need(2); out = g.concat_rows(ids[0], ids[1]); break;
    case Op::concat_cols: need(2); out = g.concat_cols(ids[0], ids[1]); break;
    case Op::slice:
      need(1);
      out = g.slice(ids[0], static_cast<int>(attr(0, 0)), static_cast<int>(attr(1, inputs[0].rows())),
                    static_cast<int>(attr(2, 0)), static_cast<int>(attr(3, inputs[0].cols())));
      break;
    case Op::row_softmax: need(1); out = g.row_softmax(ids[0]); break;
    case Op::layer_norm: need(1); out = g.layer_norm(ids[0], attr(0, 1e-6)); break;
    case Op::sigmoid: need(1); out = g.sigmoid(ids[0]); break;
    case Op::gelu: need(1); out = g.gelu(ids[0]); break;
    case Op::relu: need(1); out = g.relu(ids[0]); break;
    case Op::colwise_mul: need(2); out = g.colwise_mul(ids[0], ids[1]); break;
    case Op::colwise_add: need(2); out = g.colwise_add(ids[0], ids[1]); break;
    case Op::sum_all: need(1); out = g.sum_all(ids[0]); break;
    case Op::log: need(1); out = g.log(ids[0]); break;
    case Op::exp: need(1); out = g.exp(ids[0]); break;
    case Op::pow_const: need(1); out = g.pow_const(ids[0], attr(0, 1.0)); break;
    case Op::clamp: need(1); out = g.clamp(ids[0], attr(0, 0.0), attr(1, 1.0)); break;
    case Op::gather_rows: {
      need(1);
      std::vector<int> idx(attrs.size());
      for (size_t i = 0; i < attrs.size(); ++i) idx[i] = static_cast<int>(attrs[i]);
      out = g.gather_rows(ids[0], std::move(idx));
      break;
    }
    default:
      throw TensorError(std::string("primitive_forward: ") + op_name(op) + " is not a primitive");
  }
  return g.value(out);
}

double finite_difference_check(Graph& g, Graph::Id loss, double step) {
  if (step <= 0.0) throw TensorError("finite_difference_check: step must be positive");
  g.replay();
  g.backward(loss);
  std::vector<Tensor> analytic;
  const auto params = g.param_ids();
  analytic.reserve(params.size());
  for (auto p : params) analytic.push_back(g.grad(p));

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& v = g.mutable_value(params[pi]);
    for (size_t e = 0; e < v.size(); ++e) {
      const double orig = v.data[e];
      v.data[e] = orig + step;
      g.replay();
      const double lp = g.value(loss).data[0];
      v.data[e] = orig - step;
      g.replay();
      const double lm = g.value(loss).data[0];
      v.data[e] = orig;
      const double numeric = (lp - lm) / (2.0 * step);
      const double a = analytic[pi].data[e];
      const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  g.replay();
  return worst;
}

}  // namespace randlab
