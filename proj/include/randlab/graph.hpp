#pragma once

#include <string>
#include <vector>

#include "randlab/tensor.hpp"

namespace randlab {

enum class Op : uint8_t {
  constant,
  input,
  param,
  matmul,
  transpose,
  add,
  affine,       // a*x + b elementwise, scalar a/b
  mul,          // Hadamard
  concat_rows,
  concat_cols,
  slice,        // rows [i0,i1), cols [i2,i3)
  row_softmax,  // max-subtracted, rows sum to 1
  layer_norm,   // per row: (x - mean) / sqrt(var + eps), no affine
  sigmoid,
  gelu,         // exact: x * Phi(x)
  relu,
  colwise_mul,  // x (L x d) * g (1 x d), broadcast over rows
  colwise_add,
  sum_all,      // -> 1x1
  log,
  exp,
  pow_const,
  clamp,
  gather_rows,
};

const char* op_name(Op op);

// Reverse-mode tape. Nodes compute eagerly as they are appended; the tape
// can be replayed with fresh leaf values (same shapes) and differentiated
// any number of times. A single Graph is not thread-safe; distinct graphs
// are independent.
class Graph {
 public:
  using Id = int;

  struct Node {
    Op op = Op::constant;
    Id a = -1, b = -1;
    double p0 = 0.0, p1 = 0.0;
    int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
    std::vector<int> idx;  // gather_rows
    std::string name;      // params and inputs
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
  };

  Id constant(Tensor t);
  Id input(const std::string& name, int rows, int cols);
  Id param(const std::string& name, Tensor t);

  Id matmul(Id a, Id b);
  Id transpose(Id a);
  Id add(Id a, Id b);
  Id affine(Id a, double scale, double shift = 0.0);
  Id mul(Id a, Id b);
  Id concat_rows(Id a, Id b);
  Id concat_cols(Id a, Id b);
  Id slice(Id a, int r0, int r1, int c0, int c1);
  Id row_softmax(Id a);
  Id layer_norm(Id a, double eps = 1e-6);
  Id sigmoid(Id a);
  Id gelu(Id a);
  Id relu(Id a);
  Id colwise_mul(Id x, Id gain);
  Id colwise_add(Id x, Id bias);
  Id sum_all(Id a);
  Id log(Id a);
  Id exp(Id a);
  Id pow_const(Id a, double p);
  Id clamp(Id a, double lo, double hi);
  Id gather_rows(Id a, std::vector<int> rows);

  void set_value(Id leaf, const Tensor& t);  // inputs and params only
  void replay();                             // recompute every non-leaf value
  void backward(Id loss);                    // loss must be 1x1

  const Tensor& value(Id id) const { return nodes_[id].value; }
  const Tensor& grad(Id id) const { return nodes_[id].grad; }
  Tensor& mutable_value(Id id) { return nodes_[id].value; }
  const Node& node(Id id) const { return nodes_[id]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  std::vector<Id> param_ids() const;

 private:
  Id push(Node n);
  void compute(Node& n);

  std::vector<Node> nodes_;
  std::vector<uint8_t> touched_;
};

// Standalone kernel entry point for the primitive op set; attrs carry the
// scalar arguments (affine a/b, layer_norm eps, pow exponent, clamp bounds,
// slice bounds). Throws TensorError on shape mismatch, naming the op.
Tensor primitive_forward(Op op, const std::vector<Tensor>& inputs,
                         const std::vector<double>& attrs = {});

// Central finite differences over every parameter entry of the graph.
// Returns the worst relative error, denominator max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(Graph& g, Graph::Id loss, double step);

}  // namespace randlab
