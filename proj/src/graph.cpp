#include "erckit/graph.hpp"

#include <cmath>

#include "erckit/kernels.hpp"

namespace erc::nn {

const char* group_name(ParamGroup g) {
  return g == ParamGroup::encoder ? "encoder-group" : "main-group";
}

ParamGroup group_from_name(const std::string& s) {
  if (s == "encoder-group") return ParamGroup::encoder;
  if (s == "main-group") return ParamGroup::main;
  throw DataError("unknown parameter group: " + s);
}

const Tensor& Var::value() const { return g->node(id).value; }

namespace {
void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by op: ") + op);
}

void require(bool cond, const char* op, const char* what) {
  if (!cond) throw DataError(std::string(op) + ": " + what);
}
}  // namespace

Var Graph::input(Tensor t, bool requires_grad) {
  check_finite(t, "input");
  nodes_.push_back(Node{std::move(t), {}, requires_grad, {}, nullptr, "input", nullptr});
  return Var{this, int(nodes_.size()) - 1};
}

Var Graph::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  check_finite(p.value, "param");
  nodes_.push_back(Node{p.value, {}, true, {}, nullptr, "param", &p});
  int id = int(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Var{this, id};
}

Var Graph::make(const char* op, Tensor value, std::vector<int> parents, BackwardFn fn) {
  check_finite(value, op);
  bool rg = false;
  for (int pid : parents) rg = rg || nodes_[size_t(pid)].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, rg, std::move(parents), std::move(fn), op, nullptr});
  return Var{this, int(nodes_.size()) - 1};
}

Tensor& Graph::ensure_grad(int id) {
  Node& n = nodes_[size_t(id)];
  if (n.grad.empty()) n.grad = Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

void Graph::add_to_grad(int id, const Tensor& delta) {
  Node& n = nodes_[size_t(id)];
  if (!n.requires_grad) return;
  Tensor& g = ensure_grad(id);
  require(g.same_shape(delta), n.op, "gradient shape mismatch");
  for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += delta.data[i];
}

void Graph::backward(Var root) {
  require(root.g == this, "backward", "root belongs to a different graph");
  for (Node& n : nodes_) n.grad = Tensor();
  ensure_grad(root.id).fill(1.0);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[size_t(id)];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
  for (int id = 0; id <= root.id; ++id) {
    Node& n = nodes_[size_t(id)];
    if (n.bound && !n.grad.empty()) {
      for (size_t i = 0; i < n.grad.data.size(); ++i) n.bound->grad.data[i] += n.grad.data[i];
    }
  }
}

// --- ops -------------------------------------------------------------------

namespace {
// True if the node consumes gradient (saves building deltas for constants).
bool wants_grad(Graph& g, int id) { return g.node(id).requires_grad; }
}  // namespace

Var matmul(Var a, Var b) {
  const Tensor &av = a.value(), &bv = b.value();
  require(av.cols == bv.rows, "matmul", "inner dimension mismatch");
  Tensor out(av.rows, bv.cols);
  kernels::matmul_nn(av, bv, out);
  return a.g->make("matmul", std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id](Graph& g, int self) {
    const Tensor& dc = g.node(self).grad;
    if (wants_grad(g, ai))
      kernels::matmul_nt(dc, g.node(bi).value, g.ensure_grad(ai), true);  // dA += dC B^T
    if (wants_grad(g, bi))
      kernels::matmul_tn(g.node(ai).value, dc, g.ensure_grad(bi), true);  // dB += A^T dC
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor &av = a.value(), &bv = b.value();
  require(av.cols == bv.cols, "matmul_nt", "inner dimension mismatch");
  Tensor out(av.rows, bv.rows);
  kernels::matmul_nt(av, bv, out);
  return a.g->make("matmul_nt", std::move(out), {a.id, b.id},
                   [ai = a.id, bi = b.id](Graph& g, int self) {
                     const Tensor& dc = g.node(self).grad;
                     if (wants_grad(g, ai))
                       kernels::matmul_nn(dc, g.node(bi).value, g.ensure_grad(ai), true);
                     if (wants_grad(g, bi))
                       kernels::matmul_tn(dc, g.node(ai).value, g.ensure_grad(bi), true);
                   });
}

Var add(Var a, Var b) {
  const Tensor &av = a.value(), &bv = b.value();
  require(av.same_shape(bv), "add", "shape mismatch");
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
  return a.g->make("add", std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id](Graph& g, int self) {
    g.add_to_grad(ai, g.node(self).grad);
    g.add_to_grad(bi, g.node(self).grad);
  });
}

Var add_rowvec(Var a, Var b) {
  const Tensor &av = a.value(), &bv = b.value();
  require(bv.rows == 1 && bv.cols == av.cols, "add_rowvec", "expected a [1,n] bias");
  Tensor out = av;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) += bv.at(0, c);
  return a.g->make("add_rowvec", std::move(out), {a.id, b.id},
                   [ai = a.id, bi = b.id](Graph& g, int self) {
                     const Tensor& dc = g.node(self).grad;
                     g.add_to_grad(ai, dc);
                     if (wants_grad(g, bi)) {
                       Tensor db(1, dc.cols);
                       for (int r = 0; r < dc.rows; ++r)
                         for (int c = 0; c < dc.cols; ++c) db.at(0, c) += dc.at(r, c);
                       g.add_to_grad(bi, db);
                     }
                   });
}

Var sub(Var a, Var b) {
  const Tensor &av = a.value(), &bv = b.value();
  require(av.same_shape(bv), "sub", "shape mismatch");
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
  return a.g->make("sub", std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id](Graph& g, int self) {
    const Tensor& dc = g.node(self).grad;
    g.add_to_grad(ai, dc);
    if (wants_grad(g, bi)) {
      Tensor neg = dc;
      for (double& v : neg.data) v = -v;
      g.add_to_grad(bi, neg);
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor &av = a.value(), &bv = b.value();
  require(av.same_shape(bv), "mul", "shape mismatch");
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
  return a.g->make("mul", std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id](Graph& g, int self) {
    const Tensor& dc = g.node(self).grad;
    if (wants_grad(g, ai)) {
      Tensor da = dc;
      const Tensor& bv2 = g.node(bi).value;
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] *= bv2.data[i];
      g.add_to_grad(ai, da);
    }
    if (wants_grad(g, bi)) {
      Tensor db = dc;
      const Tensor& av2 = g.node(ai).value;
      for (size_t i = 0; i < db.data.size(); ++i) db.data[i] *= av2.data[i];
      g.add_to_grad(bi, db);
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.data) v *= c;
  return a.g->make("scale", std::move(out), {a.id}, [ai = a.id, c](Graph& g, int self) {
    Tensor da = g.node(self).grad;
    for (double& v : da.data) v *= c;
    g.add_to_grad(ai, da);
  });
}

namespace {
double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data) v = sigmoid_scalar(v);
  return a.g->make("sigmoid", std::move(out), {a.id}, [ai = a.id](Graph& g, int self) {
    const Node& n = g.node(self);
    Tensor da = n.grad;
    for (size_t i = 0; i < da.data.size(); ++i) {
      double y = n.value.data[i];
      da.data[i] *= y * (1.0 - y);
    }
    g.add_to_grad(ai, da);
  });
}

Var tanh_act(Var a) {
  Tensor out = a.value();
  for (double& v : out.data) v = std::tanh(v);
  return a.g->make("tanh", std::move(out), {a.id}, [ai = a.id](Graph& g, int self) {
    const Node& n = g.node(self);
    Tensor da = n.grad;
    for (size_t i = 0; i < da.data.size(); ++i) {
      double y = n.value.data[i];
      da.data[i] *= 1.0 - y * y;
    }
    g.add_to_grad(ai, da);
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.data) v = v > 0 ? v : 0.0;
  return a.g->make("relu", std::move(out), {a.id}, [ai = a.id](Graph& g, int self) {
    Tensor da = g.node(self).grad;
    const Tensor& x = g.node(ai).value;
    for (size_t i = 0; i < da.data.size(); ++i)
      if (x.data[i] <= 0) da.data[i] = 0.0;
    g.add_to_grad(ai, da);
  });
}

Var leaky_relu(Var a, double slope) {
  Tensor out = a.value();
  for (double& v : out.data) v = v >= 0 ? v : slope * v;
  return a.g->make("leaky_relu", std::move(out), {a.id}, [ai = a.id, slope](Graph& g, int self) {
    Tensor da = g.node(self).grad;
    const Tensor& x = g.node(ai).value;
    for (size_t i = 0; i < da.data.size(); ++i)
      if (x.data[i] < 0) da.data[i] *= slope;
    g.add_to_grad(ai, da);
  });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    double mx = x.at(r, 0);
    for (int c = 1; c < x.cols; ++c) mx = std::max(mx, x.at(r, c));
    double z = 0;
    for (int c = 0; c < x.cols; ++c) z += std::exp(x.at(r, c) - mx);
    for (int c = 0; c < x.cols; ++c) out.at(r, c) = std::exp(x.at(r, c) - mx) / z;
  }
  return a.g->make("softmax", std::move(out), {a.id}, [ai = a.id](Graph& g, int self) {
    const Node& n = g.node(self);
    Tensor da(n.value.rows, n.value.cols);
    for (int r = 0; r < n.value.rows; ++r) {
      double dot = 0;
      for (int c = 0; c < n.value.cols; ++c) dot += n.grad.at(r, c) * n.value.at(r, c);
      for (int c = 0; c < n.value.cols; ++c)
        da.at(r, c) = n.value.at(r, c) * (n.grad.at(r, c) - dot);
    }
    g.add_to_grad(ai, da);
  });
}

Var concat_cols(const std::vector<Var>& vs) {
  require(!vs.empty(), "concat_cols", "no inputs");
  Graph* g = vs[0].g;
  int rows = vs[0].rows(), cols = 0;
  for (const Var& v : vs) {
    require(v.rows() == rows, "concat_cols", "row count mismatch");
    cols += v.cols();
  }
  Tensor out(rows, cols);
  std::vector<int> parents;
  int off = 0;
  for (const Var& v : vs) {
    const Tensor& t = v.value();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < t.cols; ++c) out.at(r, off + c) = t.at(r, c);
    off += t.cols;
    parents.push_back(v.id);
  }
  return g->make("concat_cols", std::move(out), parents, [parents](Graph& gg, int self) {
    const Tensor& dc = gg.node(self).grad;
    int off2 = 0;
    for (int pid : parents) {
      const Tensor& pv = gg.node(pid).value;
      if (wants_grad(gg, pid)) {
        Tensor d(pv.rows, pv.cols);
        for (int r = 0; r < pv.rows; ++r)
          for (int c = 0; c < pv.cols; ++c) d.at(r, c) = dc.at(r, off2 + c);
        gg.add_to_grad(pid, d);
      }
      off2 += pv.cols;
    }
  });
}

Var concat_rows(const std::vector<Var>& vs) {
  require(!vs.empty(), "concat_rows", "no inputs");
  Graph* g = vs[0].g;
  int cols = vs[0].cols(), rows = 0;
  for (const Var& v : vs) {
    require(v.cols() == cols, "concat_rows", "column count mismatch");
    rows += v.rows();
  }
  Tensor out(rows, cols);
  std::vector<int> parents;
  int off = 0;
  for (const Var& v : vs) {
    const Tensor& t = v.value();
    for (int r = 0; r < t.rows; ++r)
      for (int c = 0; c < cols; ++c) out.at(off + r, c) = t.at(r, c);
    off += t.rows;
    parents.push_back(v.id);
  }
  return g->make("concat_rows", std::move(out), parents, [parents](Graph& gg, int self) {
    const Tensor& dc = gg.node(self).grad;
    int off2 = 0;
    for (int pid : parents) {
      const Tensor& pv = gg.node(pid).value;
      if (wants_grad(gg, pid)) {
        Tensor d(pv.rows, pv.cols);
        for (int r = 0; r < pv.rows; ++r)
          for (int c = 0; c < pv.cols; ++c) d.at(r, c) = dc.at(off2 + r, c);
        gg.add_to_grad(pid, d);
      }
      off2 += pv.rows;
    }
  });
}

Var slice_cols(Var a, int start, int len) {
  const Tensor& x = a.value();
  require(start >= 0 && len > 0 && start + len <= x.cols, "slice_cols", "range out of bounds");
  Tensor out(x.rows, len);
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < len; ++c) out.at(r, c) = x.at(r, start + c);
  return a.g->make("slice_cols", std::move(out), {a.id}, [ai = a.id, start](Graph& g, int self) {
    if (!wants_grad(g, ai)) return;
    const Tensor& dc = g.node(self).grad;
    Tensor& da = g.ensure_grad(ai);
    for (int r = 0; r < dc.rows; ++r)
      for (int c = 0; c < dc.cols; ++c) da.at(r, start + c) += dc.at(r, c);
  });
}

Var row(Var a, int r) {
  const Tensor& x = a.value();
  require(r >= 0 && r < x.rows, "row", "row index out of bounds");
  Tensor out(1, x.cols);
  for (int c = 0; c < x.cols; ++c) out.at(0, c) = x.at(r, c);
  return a.g->make("row", std::move(out), {a.id}, [ai = a.id, r](Graph& g, int self) {
    if (!wants_grad(g, ai)) return;
    const Tensor& dc = g.node(self).grad;
    Tensor& da = g.ensure_grad(ai);
    for (int c = 0; c < dc.cols; ++c) da.at(r, c) += dc.at(0, c);
  });
}

Var sum_all(Var a) {
  const Tensor& x = a.value();
  double s = 0;
  for (double v : x.data) s += v;
  Tensor out(1, 1);
  out.at(0, 0) = s;
  return a.g->make("sum_all", std::move(out), {a.id}, [ai = a.id](Graph& g, int self) {
    if (!wants_grad(g, ai)) return;
    double up = g.node(self).grad.at(0, 0);
    const Tensor& x2 = g.node(ai).value;
    Tensor da = Tensor::full(x2.rows, x2.cols, up);
    g.add_to_grad(ai, da);
  });
}

Var dropout(Var a, double p, Mode mode, Rng& rng) {
  require(p >= 0.0 && p < 1.0, "dropout", "rate must lie in [0, 1)");
  const Tensor& x = a.value();
  if (mode == Mode::eval || p == 0.0) {
    Tensor out = x;
    return a.g->make("dropout", std::move(out), {a.id}, [ai = a.id](Graph& g, int self) {
      g.add_to_grad(ai, g.node(self).grad);
    });
  }
  Tensor mask(x.rows, x.cols);
  double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask.data) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor out = x;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
  return a.g->make("dropout", std::move(out), {a.id}, [ai = a.id, mask](Graph& g, int self) {
    Tensor da = g.node(self).grad;
    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] *= mask.data[i];
    g.add_to_grad(ai, da);
  });
}

Var cross_entropy_logits(Var logits, const std::vector<int>& targets) {
  const Tensor& x = logits.value();
  require(int(targets.size()) == x.rows, "cross_entropy", "one target per row required");
  for (int t : targets)
    if (t < 0 || t >= x.cols) throw DataError("cross_entropy: target index out of range");

  int n = x.rows, k = x.cols;
  Tensor probs(n, k);
  double total = 0;
  for (int r = 0; r < n; ++r) {
    double mx = x.at(r, 0);
    for (int c = 1; c < k; ++c) mx = std::max(mx, x.at(r, c));
    double z = 0;
    for (int c = 0; c < k; ++c) z += std::exp(x.at(r, c) - mx);
    for (int c = 0; c < k; ++c) probs.at(r, c) = std::exp(x.at(r, c) - mx) / z;
    double nll = (mx + std::log(z)) - x.at(r, targets[size_t(r)]);
    total += std::max(0.0, nll);
  }
  Tensor out(1, 1);
  out.at(0, 0) = total / n;
  return logits.g->make("cross_entropy", std::move(out), {logits.id},
                        [li = logits.id, probs, targets](Graph& g, int self) {
                          if (!wants_grad(g, li)) return;
                          double up = g.node(self).grad.at(0, 0);
                          int n2 = probs.rows, k2 = probs.cols;
                          Tensor d(n2, k2);
                          for (int r = 0; r < n2; ++r)
                            for (int c = 0; c < k2; ++c) {
                              double onehot = c == targets[size_t(r)] ? 1.0 : 0.0;
                              d.at(r, c) = up * (probs.at(r, c) - onehot) / n2;
                            }
                          g.add_to_grad(li, d);
                        });
}

}  // namespace erc::nn
