#include "erckit/layers.hpp"

#include <cmath>

namespace erc::nn {

namespace {
bool wants_grad(Graph& g, int id) { return g.node(id).requires_grad; }
}  // namespace

void ParamRegistry::check_unique(const std::string& name) const {
  for (const Parameter* p : params_)
    if (p->name == name) throw DataError("duplicate parameter name: " + name);
  for (const auto& [bn, _] : buffers_)
    if (bn == name) throw DataError("duplicate parameter name: " + name);
}

void ParamRegistry::add(Parameter* p) {
  check_unique(p->name);
  params_.push_back(p);
}

void ParamRegistry::add_buffer(const std::string& name, Tensor* t) {
  check_unique(name);
  buffers_.emplace_back(name, t);
}

Parameter* ParamRegistry::find(const std::string& name) const {
  for (Parameter* p : params_)
    if (p->name == name) return p;
  return nullptr;
}

void ParamRegistry::zero_grads() {
  for (Parameter* p : params_) p->zero_grad();
}

void init_linear_weight(Tensor& w, int fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(double(fan_in));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
}

void init_embedding(Tensor& t, Rng& rng) {
  for (double& v : t.data) v = rng.normal(0.0, 0.02);
}

Linear::Linear(ParamRegistry& reg, const std::string& name, int in, int out, ParamGroup group,
               Rng& rng, bool zero_init)
    : w(name + ".w", group, Tensor(out, in)), b(name + ".b", group, Tensor(1, out)) {
  if (!zero_init) init_linear_weight(w.value, in, rng);
  reg.add(&w);
  reg.add(&b);
}

Var Linear::operator()(Graph& g, Var x) {
  return add_rowvec(matmul_nt(x, g.param(w)), g.param(b));
}

Embedding::Embedding(ParamRegistry& reg, const std::string& name, int num, int dim,
                     ParamGroup group, Rng& rng)
    : table(name + ".table", group, Tensor(num, dim)) {
  init_embedding(table.value, rng);
  reg.add(&table);
}

Var Embedding::operator()(Graph& g, int index) {
  if (index < 0 || index >= table.value.rows)
    throw DataError("embedding index out of range: " + table.name);
  return row(g.param(table), index);
}

namespace {
int checked_attn_dim(int model_dim, int heads) {
  if (heads < 1 || model_dim % heads != 0)
    throw DataError("attention model_dim must be divisible by heads");
  return model_dim;
}
}  // namespace

MultiHeadAttention::MultiHeadAttention(ParamRegistry& reg, const std::string& name, int model_dim,
                                       int heads_, ParamGroup group, Rng& rng)
    : heads(heads_),
      wq(reg, name + ".wq", checked_attn_dim(model_dim, heads_), model_dim, group, rng),
      wk(reg, name + ".wk", model_dim, model_dim, group, rng),
      wv(reg, name + ".wv", model_dim, model_dim, group, rng),
      wo(reg, name + ".wo", model_dim, model_dim, group, rng) {}

Var MultiHeadAttention::operator()(Graph& g, Var q_seq, Var k_seq, Var v_seq,
                                   std::vector<Tensor>* attn_out) {
  int d = wq.in_dim();
  if (q_seq.cols() != d || k_seq.cols() != d || v_seq.cols() != d)
    throw DataError("attention: input width does not match model_dim");
  if (k_seq.rows() != v_seq.rows())
    throw DataError("attention: key and value sequence lengths differ");

  Var q = wq(g, q_seq), k = wk(g, k_seq), v = wv(g, v_seq);
  int dh = d / heads;
  double inv_scale = 1.0 / std::sqrt(double(dh));
  std::vector<Var> head_outs;
  head_outs.reserve(size_t(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul_nt(qh, kh), inv_scale);
    Var w = softmax_rows(scores);
    if (attn_out) attn_out->push_back(w.value());
    head_outs.push_back(matmul(w, vh));
  }
  Var merged = heads == 1 ? head_outs[0] : concat_cols(head_outs);
  return wo(g, merged);
}

GruLayer::GruLayer(ParamRegistry& reg, const std::string& name, int in, int hidden_,
                   ParamGroup group, Rng& rng)
    : wz(name + ".wz", group, Tensor(hidden_, in)),
      uz(name + ".uz", group, Tensor(hidden_, hidden_)),
      bz(name + ".bz", group, Tensor(1, hidden_)),
      wr(name + ".wr", group, Tensor(hidden_, in)),
      ur(name + ".ur", group, Tensor(hidden_, hidden_)),
      br(name + ".br", group, Tensor(1, hidden_)),
      wh(name + ".wh", group, Tensor(hidden_, in)),
      uh(name + ".uh", group, Tensor(hidden_, hidden_)),
      bh(name + ".bh", group, Tensor(1, hidden_)),
      hidden(hidden_) {
  for (Parameter* p : {&wz, &wr, &wh}) init_linear_weight(p->value, in, rng);
  for (Parameter* p : {&uz, &ur, &uh}) init_linear_weight(p->value, hidden_, rng);
  for (Parameter* p : {&wz, &uz, &bz, &wr, &ur, &br, &wh, &uh, &bh}) reg.add(p);
}

GruLayer::Out GruLayer::run(Graph& g, Var seq, const Tensor* h0) {
  if (seq.cols() != wz.value.cols) throw DataError("gru: input width mismatch");
  int t_max = seq.rows();
  Var ones = g.input(Tensor::full(1, hidden, 1.0));
  Var h = h0 ? g.input(*h0) : g.input(Tensor(1, hidden));
  std::vector<Var> outputs;
  outputs.reserve(size_t(t_max));
  for (int t = 0; t < t_max; ++t) {
    Var x = row(seq, t);
    Var z = sigmoid(add(add(matmul_nt(x, g.param(wz)), matmul_nt(h, g.param(uz))), g.param(bz)));
    Var r = sigmoid(add(add(matmul_nt(x, g.param(wr)), matmul_nt(h, g.param(ur))), g.param(br)));
    Var hc = tanh_act(
        add(add(matmul_nt(x, g.param(wh)), matmul_nt(mul(r, h), g.param(uh))), g.param(bh)));
    h = add(mul(sub(ones, z), h), mul(z, hc));
    outputs.push_back(h);
  }
  Var out_seq = t_max == 1 ? outputs[0] : concat_rows(outputs);
  return {out_seq, h};
}

GruStack::GruStack(ParamRegistry& reg, const std::string& name, int in, int hidden,
                   double dropout_rate_, ParamGroup group, Rng& rng)
    : l1(reg, name + ".l1", in, hidden, group, rng),
      l2(reg, name + ".l2", hidden, hidden, group, rng),
      dropout_rate(dropout_rate_) {}

GruStack::Out GruStack::run(Graph& g, Var seq, Mode mode, Rng& rng) {
  auto o1 = l1.run(g, seq);
  Var inter = dropout(o1.outputs, dropout_rate, mode, rng);
  auto o2 = l2.run(g, inter);
  return {o2.outputs, o1.final, o2.final};
}

BatchNorm1d::BatchNorm1d(ParamRegistry& reg, const std::string& name, int dim)
    : gamma(name + ".gamma", ParamGroup::main, Tensor::full(1, dim, 1.0)),
      beta(name + ".beta", ParamGroup::main, Tensor(1, dim)),
      running_mean(1, dim),
      running_var(Tensor::full(1, dim, 1.0)),
      update_count(1, 1) {
  reg.add(&gamma);
  reg.add(&beta);
  reg.add_buffer(name + ".running_mean", &running_mean);
  reg.add_buffer(name + ".running_var", &running_var);
  reg.add_buffer(name + ".count", &update_count);
}

Var BatchNorm1d::operator()(Graph& g, Var x, Mode mode) {
  // Bind the affine parameters first: creating their nodes may reallocate the
  // tape and would invalidate a reference taken from x beforehand.
  Var gv = g.param(gamma), bv = g.param(beta);
  const Tensor& xv = x.value();
  int n = xv.rows, d = xv.cols;
  if (d != gamma.value.cols) throw DataError("batchnorm: feature width mismatch");
  bool use_batch_stats = mode == Mode::train && n >= 2;
  if (mode == Mode::train && n == 1 && !initialized())
    throw DataError(
        "batchnorm: training batch of size 1 before running statistics are initialized");

  if (use_batch_stats) {
    Tensor mu(1, d), var(1, d), inv_std(1, d);
    for (int c = 0; c < d; ++c) {
      double m = 0;
      for (int r = 0; r < n; ++r) m += xv.at(r, c);
      m /= n;
      double v = 0;
      for (int r = 0; r < n; ++r) v += (xv.at(r, c) - m) * (xv.at(r, c) - m);
      v /= n;  // biased, used for normalization
      mu.at(0, c) = m;
      var.at(0, c) = v;
      inv_std.at(0, c) = 1.0 / std::sqrt(v + eps);
    }
    Tensor xhat(n, d), out(n, d);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) {
        xhat.at(r, c) = (xv.at(r, c) - mu.at(0, c)) * inv_std.at(0, c);
        out.at(r, c) = gamma.value.at(0, c) * xhat.at(r, c) + beta.value.at(0, c);
      }
    // Running stats keep the unbiased variance.
    for (int c = 0; c < d; ++c) {
      double unb = n > 1 ? var.at(0, c) * double(n) / double(n - 1) : var.at(0, c);
      running_mean.at(0, c) = (1.0 - momentum) * running_mean.at(0, c) + momentum * mu.at(0, c);
      running_var.at(0, c) = (1.0 - momentum) * running_var.at(0, c) + momentum * unb;
    }
    update_count.at(0, 0) += 1.0;

    return g.make("batchnorm", std::move(out), {x.id, gv.id, bv.id},
                  [xi = x.id, gi = gv.id, bi = bv.id, xhat, inv_std](Graph& gg, int self) {
                    const Tensor& dy = gg.node(self).grad;
                    int n2 = dy.rows, d2 = dy.cols;
                    const Tensor& gval = gg.node(gi).value;
                    if (wants_grad(gg, bi)) {
                      Tensor db(1, d2);
                      for (int r = 0; r < n2; ++r)
                        for (int c = 0; c < d2; ++c) db.at(0, c) += dy.at(r, c);
                      gg.add_to_grad(bi, db);
                    }
                    if (wants_grad(gg, gi)) {
                      Tensor dg(1, d2);
                      for (int r = 0; r < n2; ++r)
                        for (int c = 0; c < d2; ++c) dg.at(0, c) += dy.at(r, c) * xhat.at(r, c);
                      gg.add_to_grad(gi, dg);
                    }
                    if (wants_grad(gg, xi)) {
                      Tensor dx(n2, d2);
                      for (int c = 0; c < d2; ++c) {
                        double sum_dxhat = 0, sum_dxhat_xhat = 0;
                        for (int r = 0; r < n2; ++r) {
                          double dxhat = dy.at(r, c) * gval.at(0, c);
                          sum_dxhat += dxhat;
                          sum_dxhat_xhat += dxhat * xhat.at(r, c);
                        }
                        for (int r = 0; r < n2; ++r) {
                          double dxhat = dy.at(r, c) * gval.at(0, c);
                          dx.at(r, c) = inv_std.at(0, c) / n2 *
                                        (n2 * dxhat - sum_dxhat - xhat.at(r, c) * sum_dxhat_xhat);
                        }
                      }
                      gg.add_to_grad(xi, dx);
                    }
                  });
  }

  // Running-statistics path: eval mode, or a train-mode batch of one.
  Tensor inv_std(1, d), xhat(n, d), out(n, d);
  for (int c = 0; c < d; ++c) inv_std.at(0, c) = 1.0 / std::sqrt(running_var.at(0, c) + eps);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) {
      xhat.at(r, c) = (xv.at(r, c) - running_mean.at(0, c)) * inv_std.at(0, c);
      out.at(r, c) = gamma.value.at(0, c) * xhat.at(r, c) + beta.value.at(0, c);
    }
  return g.make("batchnorm", std::move(out), {x.id, gv.id, bv.id},
                [xi = x.id, gi = gv.id, bi = bv.id, xhat, inv_std](Graph& gg, int self) {
                  const Tensor& dy = gg.node(self).grad;
                  int n2 = dy.rows, d2 = dy.cols;
                  const Tensor& gval = gg.node(gi).value;
                  if (wants_grad(gg, bi)) {
                    Tensor db(1, d2);
                    for (int r = 0; r < n2; ++r)
                      for (int c = 0; c < d2; ++c) db.at(0, c) += dy.at(r, c);
                    gg.add_to_grad(bi, db);
                  }
                  if (wants_grad(gg, gi)) {
                    Tensor dg(1, d2);
                    for (int r = 0; r < n2; ++r)
                      for (int c = 0; c < d2; ++c) dg.at(0, c) += dy.at(r, c) * xhat.at(r, c);
                    gg.add_to_grad(gi, dg);
                  }
                  if (wants_grad(gg, xi)) {
                    Tensor dx(n2, d2);
                    for (int r = 0; r < n2; ++r)
                      for (int c = 0; c < d2; ++c)
                        dx.at(r, c) = dy.at(r, c) * gval.at(0, c) * inv_std.at(0, c);
                    gg.add_to_grad(xi, dx);
                  }
                });
}

}  // namespace erc::nn
