#pragma once

#include "adcast/autodiff/params.hpp"
#include "adcast/autodiff/tape.hpp"

#include <cstddef>
#include <functional>
#include <string>

namespace adcast::ad {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Compares back-propagated gradients of the scalar `loss` with central
/// differences, coordinate by coordinate. Relative error is
/// |a - n| / max(1e-8, |a| + |n|). `max_per_param` caps the coordinates
/// checked per parameter (0 = all), chosen with a fixed stride.
GradCheckResult grad_check(const std::function<Value(Tape&, ParamStore&)>& loss, ParamStore& store,
                           double eps = 1e-5, std::size_t max_per_param = 0);

} // namespace adcast::ad
