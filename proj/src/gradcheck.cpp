#include "erckit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace erc::nn {

GradCheckResult grad_check(const std::string& name, const std::function<double()>& loss,
                           const std::vector<Parameter*>& params,
                           const std::function<void()>& backward_into_grads, double h, double tol,
                           int max_entries_per_param, uint64_t subsample_seed,
                           double noise_floor) {
  GradCheckResult res;
  res.name = name;

  for (Parameter* p : params) p->zero_grad();
  backward_into_grads();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  Rng rng(subsample_seed);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    int total = int(p.value.size());
    std::vector<int> entries;
    if (total <= max_entries_per_param) {
      entries.resize(size_t(total));
      for (int i = 0; i < total; ++i) entries[size_t(i)] = i;
    } else {
      // Sample `max_entries_per_param` distinct flat indices.
      std::vector<int> pool(static_cast<size_t>(total));
      for (int i = 0; i < total; ++i) pool[size_t(i)] = i;
      for (int i = 0; i < max_entries_per_param; ++i) {
        int j = i + int(rng.uniform_int(uint64_t(total - i)));
        std::swap(pool[size_t(i)], pool[size_t(j)]);
      }
      entries.assign(pool.begin(), pool.begin() + max_entries_per_param);
    }

    for (int idx : entries) {
      double saved = p.value.data[size_t(idx)];
      p.value.data[size_t(idx)] = saved + h;
      double lp = loss();
      p.value.data[size_t(idx)] = saved - h;
      double lm = loss();
      p.value.data[size_t(idx)] = saved;

      double fd = (lp - lm) / (2.0 * h);
      double a = analytic[pi].data[size_t(idx)];
      double rel = std::abs(a - fd) / std::max(1e-8, std::abs(a) + std::abs(fd));
      if (std::abs(a - fd) <= noise_floor) rel = 0.0;
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = p.name;
      }
      if (rel > tol) res.pass = false;
    }
  }
  return res;
}

GradCheckResult grad_check_fn(const std::string& name, const std::function<Var(Graph&)>& build,
                              const std::vector<Parameter*>& params, double h, double tol,
                              int max_entries_per_param, uint64_t subsample_seed,
                              double noise_floor) {
  auto loss = [&]() {
    Graph g;
    return build(g).value().at(0, 0);
  };
  auto backward = [&]() {
    Graph g;
    Var l = build(g);
    g.backward(l);
  };
  return grad_check(name, loss, params, backward, h, tol, max_entries_per_param, subsample_seed,
                    noise_floor);
}

}  // namespace erc::nn
