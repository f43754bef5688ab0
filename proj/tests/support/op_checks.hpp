#pragma once

#include "adcast/autodiff/grad_check.hpp"
#include "adcast/autodiff/ops.hpp"
#include "adcast/autodiff/params.hpp"
#include "support/block_checks.hpp"

#include <functional>
#include <map>
#include <string>
#include <tuple>

namespace adcast::testing {

using ParamShapes = std::initializer_list<std::tuple<const char*, std::size_t, std::size_t>>;

/// Parameters with standard-normal entries.
inline ad::ParamStore store_with(ParamShapes shapes, std::uint64_t seed = 1) {
    ad::ParamStore s;
    Rng rng(seed);
    for (const auto& [name, r, c] : shapes) {
        ad::Param& p = s.get_or_create(name, r, c, 0.0);
        for (double& v : p.value) v = rng.normal();
    }
    return s;
}

/// One finite-difference check per differentiable op, keyed by op name.
inline std::map<std::string, ad::GradCheckResult> op_grad_checks() {
    using namespace ad;
    using Fn = std::function<Value(Tape&, ParamStore&)>;
    const ParamShapes ab{{"a", 3, 4}, {"b", 3, 4}};
    std::map<std::string, GradCheckResult> out;
    auto run = [&](const std::string& name, const Fn& f, ParamStore store) { out[name] = grad_check(f, store); };
    auto unary = [&](const std::string& name, std::uint64_t seed, Value (*op)(const Value&)) {
        run(name, [=](Tape& t, ParamStore& s) { return project(t, op(t.param(s, "a")), seed); }, store_with(ab));
    };
    run("add", [](Tape& t, ParamStore& s) { return project(t, add(t.param(s, "a"), t.param(s, "b")), 1); }, store_with(ab));
    run("sub", [](Tape& t, ParamStore& s) { return project(t, sub(t.param(s, "a"), t.param(s, "b")), 2); }, store_with(ab));
    run("mul", [](Tape& t, ParamStore& s) { return project(t, mul(t.param(s, "a"), t.param(s, "b")), 3); }, store_with(ab));
    run("scale", [](Tape& t, ParamStore& s) { return project(t, scale(t.param(s, "a"), -2.5), 4); }, store_with(ab));
    run("add_scalar", [](Tape& t, ParamStore& s) { return project(t, add_scalar(t.param(s, "a"), 0.7), 5); },
        store_with(ab));
    run("matmul", [](Tape& t, ParamStore& s) { return project(t, matmul(t.param(s, "a"), t.param(s, "m")), 6); },
        store_with({{"a", 3, 4}, {"m", 4, 2}}));
    unary("transpose", 7, ad::transpose);
    run("add_row", [](Tape& t, ParamStore& s) { return project(t, add_row(t.param(s, "a"), t.param(s, "r")), 8); },
        store_with({{"a", 3, 4}, {"r", 1, 4}}));
    run("mul_col", [](Tape& t, ParamStore& s) { return project(t, mul_col(t.param(s, "a"), t.param(s, "c")), 9); },
        store_with({{"a", 3, 4}, {"c", 3, 1}}));
    unary("sigmoid", 10, ad::sigmoid);
    unary("tanh", 11, ad::tanh);
    unary("relu", 12, ad::relu);
    unary("elu", 13, ad::elu);
    unary("exp", 14, ad::exp);
    unary("neg", 23, ad::neg);
    unary("mean_rows", 22, ad::mean_rows);
    run("softmax rows", [](Tape& t, ParamStore& s) { return project(t, softmax(t.param(s, "a"), 1), 16); },
        store_with(ab));
    run("softmax cols", [](Tape& t, ParamStore& s) { return project(t, softmax(t.param(s, "a"), 0), 15); },
        store_with(ab));
    run("concat rows", [](Tape& t, ParamStore& s) { return project(t, concat({t.param(s, "a"), t.param(s, "b")}, 0), 17); },
        store_with(ab));
    run("concat cols", [](Tape& t, ParamStore& s) {
        return project(t, concat({t.param(s, "a"), t.param(s, "m"), t.param(s, "a")}, 1), 18);
    }, store_with({{"a", 3, 4}, {"m", 3, 2}}));
    run("slice rows", [](Tape& t, ParamStore& s) { return project(t, slice(t.param(s, "a"), 0, 1, 3), 19); },
        store_with(ab));
    run("slice cols", [](Tape& t, ParamStore& s) { return project(t, slice(t.param(s, "a"), 1, 1, 3), 20); },
        store_with(ab));
    run("gather_rows", [](Tape& t, ParamStore& s) { return project(t, gather_rows(t.param(s, "a"), {2, 0, 2}), 21); },
        store_with(ab));
    run("reshape", [](Tape& t, ParamStore& s) { return project(t, reshape(t.param(s, "a"), 2, 6), 24); }, store_with(ab));
    run("sum", [](Tape& t, ParamStore& s) { return sum(mul(t.param(s, "a"), t.param(s, "b"))); }, store_with(ab));
    run("mean", [](Tape& t, ParamStore& s) { return mean(mul(t.param(s, "a"), t.param(s, "b"))); }, store_with(ab));
    return out;
}

} // namespace adcast::testing
