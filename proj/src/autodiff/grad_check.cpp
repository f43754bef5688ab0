#include "adcast/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace adcast::ad {

GradCheckResult grad_check(const std::function<Value(Tape&, ParamStore&)>& loss, ParamStore& store, double eps,
                           std::size_t max_per_param) {
    store.zero_grad();
    {
        Tape tape;
        const Value l = loss(tape, store);
        tape.backward(l);
    }
    auto evaluate = [&]() {
        Tape tape;
        return loss(tape, store).item();
    };

    GradCheckResult r;
    for (auto& [name, p] : store.params()) {
        const std::size_t n = p.value.size();
        const std::size_t stride = max_per_param == 0 || n <= max_per_param ? 1 : (n + max_per_param - 1) / max_per_param;
        for (std::size_t i = 0; i < n; i += stride) {
            const double original = p.value[i];
            p.value[i] = original + eps;
            const double up = evaluate();
            p.value[i] = original - eps;
            const double down = evaluate();
            p.value[i] = original;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = p.grad[i];
            const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            ++r.checked;
            if (rel > r.max_rel_error) {
                r.max_rel_error = rel;
                r.worst_param = name;
                r.worst_index = i;
            }
        }
    }
    return r;
}

} // namespace adcast::ad
