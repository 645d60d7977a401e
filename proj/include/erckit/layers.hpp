#pragma once

#include <optional>
#include <string>
#include <vector>

#include "erckit/graph.hpp"

namespace erc::nn {

// Collects the parameters and persistent buffers of one model in a fixed,
// deterministic order. Names must be unique; checkpoints address entries by
// name.
class ParamRegistry {
 public:
  void add(Parameter* p);
  void add_buffer(const std::string& name, Tensor* t);

  const std::vector<Parameter*>& params() const { return params_; }
  const std::vector<std::pair<std::string, Tensor*>>& buffers() const { return buffers_; }

  Parameter* find(const std::string& name) const;
  void zero_grads();

 private:
  void check_unique(const std::string& name) const;
  std::vector<Parameter*> params_;
  std::vector<std::pair<std::string, Tensor*>> buffers_;
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
void init_linear_weight(Tensor& w, int fan_in, Rng& rng);
void init_embedding(Tensor& t, Rng& rng);  // normal(0, 0.02)

// y = x W^T + b with W [out, in], b [1, out].
struct Linear {
  Parameter w, b;

  Linear(ParamRegistry& reg, const std::string& name, int in, int out, ParamGroup group,
         Rng& rng, bool zero_init = false);
  Var operator()(Graph& g, Var x);

  int in_dim() const { return w.value.cols; }
  int out_dim() const { return w.value.rows; }
};

// Lookup table; forward selects one row. Gradients accumulate into the
// selected row only.
struct Embedding {
  Parameter table;  // [num, dim]

  Embedding(ParamRegistry& reg, const std::string& name, int num, int dim, ParamGroup group,
            Rng& rng);
  Var operator()(Graph& g, int index);
};

// Scaled dot-product attention, heads over column slices, per-head scale
// 1/sqrt(model_dim/heads), output projection back to model_dim. Rows of each
// attention weight matrix sum to 1.
struct MultiHeadAttention {
  int heads;
  Linear wq, wk, wv, wo;

  MultiHeadAttention(ParamRegistry& reg, const std::string& name, int model_dim, int heads,
                     ParamGroup group, Rng& rng);

  // q_seq [Lq,d], k_seq [Lk,d], v_seq [Lk,d] -> [Lq,d]. When `attn_out` is
  // given, the per-head attention weight matrices are copied into it.
  Var operator()(Graph& g, Var q_seq, Var k_seq, Var v_seq,
                 std::vector<Tensor>* attn_out = nullptr);
};

// One GRU layer:
//   z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//   r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//   hc_t = tanh(W_h x_t + U_h (r_t . h_{t-1}) + b_h)
//   h_t = (1 - z_t) . h_{t-1} + z_t . hc_t,   h_0 = 0
struct GruLayer {
  Parameter wz, uz, bz, wr, ur, br, wh, uh, bh;
  int hidden;

  GruLayer(ParamRegistry& reg, const std::string& name, int in, int hidden, ParamGroup group,
           Rng& rng);

  struct Out {
    Var outputs;  // [T, hidden]
    Var final;    // [1, hidden]
  };
  // `h0` overrides the zero initial state (test hook).
  Out run(Graph& g, Var seq, const Tensor* h0 = nullptr);
};

// Two stacked GRU layers with dropout on layer-1 outputs before layer 2
// (train mode only).
struct GruStack {
  GruLayer l1, l2;
  double dropout_rate;

  GruStack(ParamRegistry& reg, const std::string& name, int in, int hidden, double dropout_rate,
           ParamGroup group, Rng& rng);

  struct Out {
    Var outputs;       // [T, hidden], layer-2 outputs
    Var final_l1;      // [1, hidden]
    Var final_l2;      // [1, hidden]
  };
  Out run(Graph& g, Var seq, Mode mode, Rng& rng);
};

// BatchNorm over rows (features = columns). Train mode with n >= 2 uses
// batch statistics (biased variance) and updates running stats with
// momentum 0.1 (running variance stored unbiased). Train mode with n == 1
// falls back to running statistics when they have been initialized and is a
// hard error otherwise. Eval mode always uses running statistics.
struct BatchNorm1d {
  Parameter gamma, beta;
  Tensor running_mean, running_var;
  Tensor update_count;  // [1,1]; > 0 means running stats are initialized
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNorm1d(ParamRegistry& reg, const std::string& name, int dim);
  Var operator()(Graph& g, Var x, Mode mode);

  bool initialized() const { return update_count.at(0, 0) > 0.0; }
};

}  // namespace erc::nn
