#pragma once

#include <functional>
#include <string>
#include <vector>

#include "erckit/layers.hpp"

namespace erc::nn {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
  bool pass = true;
  std::string worst_param;
};

// Central differences with step h against the analytic gradient of the
// scalar `loss()` (which must rebuild its graph on every call). Relative
// error |a - fd| / max(1e-8, |a| + |fd|) must stay <= tol for every checked
// entry. Tensors larger than `max_entries_per_param` are subsampled with a
// seeded RNG.
//
// `noise_floor` (off by default) additionally accepts an entry whose
// absolute difference |a - fd| stays at or below it. Central differences
// cannot resolve differences finer than about |loss|*eps/h, so for a
// parameter whose true gradient is structurally ~0 (for example a bias
// followed by batch normalization) the measured fd value is rounding noise
// and the relative form above rejects a correct gradient. 1e-10 is a safe
// floor for losses of order 1 at h = 1e-5.
GradCheckResult grad_check(const std::string& name, const std::function<double()>& loss,
                           const std::vector<Parameter*>& params,
                           const std::function<void()>& backward_into_grads, double h = 1e-5,
                           double tol = 1e-4, int max_entries_per_param = 64,
                           uint64_t subsample_seed = 17, double noise_floor = 0.0);

// Convenience wrapper: builds the graph once per call via `build`, which
// returns the scalar loss Var on a fresh graph.
GradCheckResult grad_check_fn(const std::string& name, const std::function<Var(Graph&)>& build,
                              const std::vector<Parameter*>& params, double h = 1e-5,
                              double tol = 1e-4, int max_entries_per_param = 64,
                              uint64_t subsample_seed = 17, double noise_floor = 0.0);

}  // namespace erc::nn
