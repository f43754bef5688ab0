#pragma once

#include "adcast/autodiff/tape.hpp"

#include <cstddef>
#include <vector>

namespace adcast::ad {

// Shapes must match exactly; there is no implicit broadcasting. Shape errors
// throw ValidationError naming both shapes.

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double s);
Value add_scalar(const Value& a, double s);
Value neg(const Value& a);

/// (n x k) . (k x m)
Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);

/// a (n x m) plus the 1 x m row `bias` added to every row.
Value add_row(const Value& a, const Value& bias);
/// a (n x m) with row r multiplied by col(r, 0); col is n x 1.
Value mul_col(const Value& a, const Value& col);

Value sigmoid(const Value& a);
Value tanh(const Value& a);
Value relu(const Value& a);
Value elu(const Value& a);
Value exp(const Value& a);

/// axis 0 normalises each column, axis 1 each row.
Value softmax(const Value& a, int axis);

/// axis 0 stacks rows, axis 1 stacks columns.
Value concat(const std::vector<Value>& parts, int axis);
/// Half-open [begin, end) along the axis.
Value slice(const Value& a, int axis, std::size_t begin, std::size_t end);
/// Rows of `a` in the given order (repeats allowed).
Value gather_rows(const Value& a, const std::vector<std::size_t>& rows);

/// Same row-major data under a new shape.
Value reshape(const Value& a, std::size_t rows, std::size_t cols);
/// 1 x 1 totals.
Value sum(const Value& a);
Value mean(const Value& a);

/// Mean over rows: (n x m) -> (1 x m).
Value mean_rows(const Value& a);

} // namespace adcast::ad
