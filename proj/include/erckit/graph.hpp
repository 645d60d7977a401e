#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "erckit/common.hpp"
#include "erckit/tensor.hpp"

namespace erc::nn {

using erc::Rng;
using erc::Tensor;

enum class Mode { train, eval };

enum class ParamGroup { main, encoder };

const char* group_name(ParamGroup g);
ParamGroup group_from_name(const std::string& s);

// A named trainable tensor. Gradients accumulate (+=) into `grad` on every
// backward pass until zero_grad().
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::main;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, ParamGroup g, Tensor v)
      : name(std::move(n)), group(g), value(std::move(v)), grad(value.rows, value.cols) {}

  void zero_grad() { grad.zero(); }
};

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* g = nullptr;
  int id = -1;

  const Tensor& value() const;
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }
};

using BackwardFn = std::function<void(Graph&, int self)>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::vector<int> parents;
  BackwardFn backward;
  const char* op = "";
  Parameter* bound = nullptr;  // leaf bound to a parameter
};

// Tape of operations recorded in topological order. One graph serves one
// forward-plus-backward pass and is confined to a single thread; parallelism
// lives below this level, inside the matmul kernels.
class Graph {
 public:
  Var input(Tensor t, bool requires_grad = false);
  Var param(Parameter& p);  // cached: the same parameter binds to one node

  // Records an op node. `fn` reads node(self).grad and accumulates into the
  // parents' grads via add_to_grad. Exposed so tests can build custom ops.
  Var make(const char* op, Tensor value, std::vector<int> parents, BackwardFn fn);

  // Seeds d(root)/d(root) = 1, walks the tape in reverse, then flushes the
  // gradients of parameter-bound leaves into Parameter::grad (+=).
  void backward(Var root);

  Node& node(int id) { return nodes_[size_t(id)]; }
  const Node& node(int id) const { return nodes_[size_t(id)]; }
  size_t size() const { return nodes_.size(); }

  Tensor& ensure_grad(int id);
  // Accumulates `delta` into node `id`'s grad if that node requires grad.
  void add_to_grad(int id, const Tensor& delta);

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

// --- ops -------------------------------------------------------------------

Var matmul(Var a, Var b);     // [m,k]x[k,n]
Var matmul_nt(Var a, Var b);  // [m,k]x[n,k]^T
Var add(Var a, Var b);
Var add_rowvec(Var a, Var b);  // broadcast [1,n] over rows of [m,n]
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double c);
Var sigmoid(Var a);
Var tanh_act(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.01);
Var softmax_rows(Var a);
Var concat_cols(const std::vector<Var>& vs);
Var concat_rows(const std::vector<Var>& vs);
Var slice_cols(Var a, int start, int len);
Var row(Var a, int r);
Var sum_all(Var a);  // [1,1]

// Inverted dropout: kept entries scaled by 1/(1-p). Identity in eval mode
// and for p == 0. p >= 1 or p < 0 is an error.
Var dropout(Var a, double p, Mode mode, Rng& rng);

// Mean over rows of (logsumexp(logits_r) - logits_r[target_r]), clamped at
// >= 0 per row. Gradient per row: (softmax(logits_r) - onehot(target_r)) / n.
Var cross_entropy_logits(Var logits, const std::vector<int>& targets);

}  // namespace erc::nn
