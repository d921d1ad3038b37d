#pragma once

#include <functional>

#include "krst/param_store.hpp"

namespace krst {

struct GradCheckResult {
    double max_rel_err = 0.0;
    long coords_checked = 0;
    long rejected = 0;     // tie-adjacent coordinates skipped and resampled
    std::string worst_param;
    long worst_index = -1;
};

// Central-difference check of the autodiff gradient. loss_fn must rebuild
// the forward graph from the store's current parameter values and be
// deterministic. At most max_coords coordinates are sampled (all of them
// when the store is small). Coordinates where the two-scale difference
// quotients disagree sit next to a max/hinge tie and are rejected, then
// replaced by a fresh sample. Relative error uses a unit floor:
// |ad - fd| / max(1, |ad|, |fd|).
GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, ParamStore& store,
                                  double eps, long max_coords = 250, uint64_t seed = 0);

}  // namespace krst
