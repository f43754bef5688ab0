#include "adcast/autodiff/ops.hpp"

#include "adcast/errors.hpp"

#include <cmath>
#include <string>

namespace adcast::ad {

namespace {

std::string shape(const Value& v) { return std::to_string(v.rows()) + "x" + std::to_string(v.cols()); }

void require_same(const Value& a, const Value& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ValidationError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
    }
}

// Result node wired to its parents; recorded only when some parent needs gradients.
std::shared_ptr<Node> result(std::size_t rows, std::size_t cols, std::vector<std::shared_ptr<Node>> parents) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value.assign(rows * cols, 0.0);
    for (const auto& p : parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            n->tape = p->tape;
            break;
        }
    }
    n->parents = std::move(parents);
    return n;
}

Value finish(std::shared_ptr<Node> n, std::function<void(Node&)> backward) {
    if (n->requires_grad) {
        n->backward = std::move(backward);
        n->tape->record(n);
    } else {
        n->parents.clear();
    }
    return Value(std::move(n));
}

template <typename F, typename D>
Value unary(const Value& a, F f, D dfdx_from_y_x) {
    auto n = result(a.rows(), a.cols(), {a.ptr()});
    const auto& x = a.data();
    for (std::size_t i = 0; i < x.size(); ++i) n->value[i] = f(x[i]);
    return finish(n, [dfdx_from_y_x](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx_from_y_x(self.value[i], p.value[i]);
    });
}

} // namespace

Value add(const Value& a, const Value& b) {
    require_same(a, b, "add");
    auto n = result(a.rows(), a.cols(), {a.ptr(), b.ptr()});
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.data()[i] + b.data()[i];
    return finish(n, [](Node& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Value sub(const Value& a, const Value& b) {
    require_same(a, b, "sub");
    auto n = result(a.rows(), a.cols(), {a.ptr(), b.ptr()});
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.data()[i] - b.data()[i];
    return finish(n, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            Node& p = *self.parents[k];
            if (!p.requires_grad) continue;
            auto& g = p.grad_buffer();
            const double sign = k == 0 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
        }
    });
}

Value mul(const Value& a, const Value& b) {
    require_same(a, b, "mul");
    auto n = result(a.rows(), a.cols(), {a.ptr(), b.ptr()});
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.data()[i] * b.data()[i];
    return finish(n, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
        }
    });
}

Value scale(const Value& a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Value add_scalar(const Value& a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Value neg(const Value& a) { return scale(a, -1.0); }

Value matmul(const Value& a, const Value& b) {
    if (a.cols() != b.rows()) throw ValidationError("matmul: shape mismatch " + shape(a) + " vs " + shape(b));
    const std::size_t n_rows = a.rows(), inner = a.cols(), n_cols = b.cols();
    auto n = result(n_rows, n_cols, {a.ptr(), b.ptr()});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = n->value.data();
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = A[i * inner + k];
            if (aik == 0.0) continue;
            const double* brow = B + k * n_cols;
            double* crow = C + i * n_cols;
            for (std::size_t j = 0; j < n_cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return finish(n, [n_rows, inner, n_cols](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const double* G = self.grad.data();
        if (pa.requires_grad) {
            // dA = G . B^T
            auto& ga = pa.grad_buffer();
            const double* B = pb.value.data();
            for (std::size_t i = 0; i < n_rows; ++i) {
                for (std::size_t k = 0; k < inner; ++k) {
                    double s = 0.0;
                    const double* grow = G + i * n_cols;
                    const double* brow = B + k * n_cols;
                    for (std::size_t j = 0; j < n_cols; ++j) s += grow[j] * brow[j];
                    ga[i * inner + k] += s;
                }
            }
        }
        if (pb.requires_grad) {
            // dB = A^T . G
            auto& gb = pb.grad_buffer();
            const double* A = pa.value.data();
            for (std::size_t i = 0; i < n_rows; ++i) {
                const double* grow = G + i * n_cols;
                for (std::size_t k = 0; k < inner; ++k) {
                    const double aik = A[i * inner + k];
                    if (aik == 0.0) continue;
                    double* gbrow = gb.data() + k * n_cols;
                    for (std::size_t j = 0; j < n_cols; ++j) gbrow[j] += aik * grow[j];
                }
            }
        }
    });
}

Value transpose(const Value& a) {
    const std::size_t r = a.rows(), c = a.cols();
    auto n = result(c, r, {a.ptr()});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) n->value[j * r + i] = a.data()[i * c + j];
    }
    return finish(n, [r, c](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
        }
    });
}

Value add_row(const Value& a, const Value& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) {
        throw ValidationError("add_row: shape mismatch " + shape(a) + " vs " + shape(bias));
    }
    const std::size_t r = a.rows(), c = a.cols();
    auto n = result(r, c, {a.ptr(), bias.ptr()});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) n->value[i * c + j] = a.data()[i * c + j] + bias.data()[j];
    }
    return finish(n, [r, c](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
            }
        }
    });
}

Value mul_col(const Value& a, const Value& col) {
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw ValidationError("mul_col: shape mismatch " + shape(a) + " vs " + shape(col));
    }
    const std::size_t r = a.rows(), c = a.cols();
    auto n = result(r, c, {a.ptr(), col.ptr()});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) n->value[i * c + j] = a.data()[i * c + j] * col.data()[i];
    }
    return finish(n, [r, c](Node& self) {
        Node& pa = *self.parents[0];
        Node& pc = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * c + j] * pc.value[i];
            }
        }
        if (pc.requires_grad) {
            auto& g = pc.grad_buffer();
            for (std::size_t i = 0; i < r; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < c; ++j) s += self.grad[i * c + j] * pa.value[i * c + j];
                g[i] += s;
            }
        }
    });
}

Value sigmoid(const Value& a) {
    return unary(
        a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double y, double) { return y * (1.0 - y); });
}

Value tanh(const Value& a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double y, double) { return 1.0 - y * y; });
}

Value relu(const Value& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Value elu(const Value& a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
        [](double y, double x) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Value exp(const Value& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double y, double) { return y; });
}

Value softmax(const Value& a, int axis) {
    if (axis != 0 && axis != 1) throw ValidationError("softmax: axis must be 0 or 1");
    const std::size_t r = a.rows(), c = a.cols();
    auto n = result(r, c, {a.ptr()});
    // Groups are rows (axis 1) or columns (axis 0); stride/offset describe one group.
    const std::size_t groups = axis == 1 ? r : c;
    const std::size_t len = axis == 1 ? c : r;
    auto idx = [=](std::size_t g, std::size_t k) { return axis == 1 ? g * c + k : k * c + g; };
    for (std::size_t g = 0; g < groups; ++g) {
        double mx = -INFINITY;
        for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, a.data()[idx(g, k)]);
        double s = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const double e = std::exp(a.data()[idx(g, k)] - mx);
            n->value[idx(g, k)] = e;
            s += e;
        }
        for (std::size_t k = 0; k < len; ++k) n->value[idx(g, k)] /= s;
    }
    return finish(n, [groups, len, idx](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.grad_buffer();
        for (std::size_t grp = 0; grp < groups; ++grp) {
            double dot = 0.0;
            for (std::size_t k = 0; k < len; ++k) dot += self.grad[idx(grp, k)] * self.value[idx(grp, k)];
            for (std::size_t k = 0; k < len; ++k) {
                const std::size_t i = idx(grp, k);
                g[i] += self.value[i] * (self.grad[i] - dot);
            }
        }
    });
}

Value concat(const std::vector<Value>& parts, int axis) {
    if (parts.empty()) throw ValidationError("concat: no inputs");
    if (axis != 0 && axis != 1) throw ValidationError("concat: axis must be 0 or 1");
    std::size_t rows = 0, cols = 0;
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& p : parts) {
        if (axis == 0) {
            if (p.cols() != parts.front().cols()) {
                throw ValidationError("concat: shape mismatch " + shape(parts.front()) + " vs " + shape(p));
            }
            rows += p.rows();
            cols = p.cols();
        } else {
            if (p.rows() != parts.front().rows()) {
                throw ValidationError("concat: shape mismatch " + shape(parts.front()) + " vs " + shape(p));
            }
            cols += p.cols();
            rows = p.rows();
        }
        parents.push_back(p.ptr());
    }
    auto n = result(rows, cols, std::move(parents));
    std::size_t offset = 0;
    for (const auto& p : parts) {
        if (axis == 0) {
            std::copy(p.data().begin(), p.data().end(), n->value.begin() + static_cast<std::ptrdiff_t>(offset * cols));
            offset += p.rows();
        } else {
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < p.cols(); ++j) n->value[i * cols + offset + j] = p.data()[i * p.cols() + j];
            }
            offset += p.cols();
        }
    }
    return finish(n, [axis, rows, cols](Node& self) {
        std::size_t offset = 0;
        for (auto& pp : self.parents) {
            Node& p = *pp;
            if (p.requires_grad) {
                auto& g = p.grad_buffer();
                if (axis == 0) {
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset * cols + i];
                } else {
                    for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t j = 0; j < p.cols; ++j) g[i * p.cols + j] += self.grad[i * cols + offset + j];
                    }
                }
            }
            offset += axis == 0 ? p.rows : p.cols;
        }
    });
}

Value slice(const Value& a, int axis, std::size_t begin, std::size_t end) {
    if (axis != 0 && axis != 1) throw ValidationError("slice: axis must be 0 or 1");
    const std::size_t extent = axis == 0 ? a.rows() : a.cols();
    if (begin >= end || end > extent) {
        throw ValidationError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                              ") outside " + shape(a));
    }
    const std::size_t r = axis == 0 ? end - begin : a.rows();
    const std::size_t c = axis == 1 ? end - begin : a.cols();
    const std::size_t src_cols = a.cols();
    auto n = result(r, c, {a.ptr()});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            n->value[i * c + j] = axis == 0 ? a.data()[(begin + i) * src_cols + j] : a.data()[i * src_cols + begin + j];
        }
    }
    return finish(n, [axis, begin, r, c, src_cols](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                const std::size_t src = axis == 0 ? (begin + i) * src_cols + j : i * src_cols + begin + j;
                g[src] += self.grad[i * c + j];
            }
        }
    });
}

Value gather_rows(const Value& a, const std::vector<std::size_t>& rows) {
    const std::size_t c = a.cols();
    for (std::size_t r : rows) {
        if (r >= a.rows()) throw ValidationError("gather_rows: row " + std::to_string(r) + " outside " + shape(a));
    }
    auto n = result(rows.size(), c, {a.ptr()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * c), c,
                    n->value.begin() + static_cast<std::ptrdiff_t>(i * c));
    }
    return finish(n, [rows, c](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < c; ++j) g[rows[i] * c + j] += self.grad[i * c + j];
        }
    });
}

Value reshape(const Value& a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a.size()) {
        throw ValidationError("reshape: " + shape(a) + " cannot become " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    auto n = result(rows, cols, {a.ptr()});
    n->value = a.data();
    return finish(n, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Value sum(const Value& a) {
    auto n = result(1, 1, {a.ptr()});
    double s = 0.0;
    for (double v : a.data()) s += v;
    n->value[0] = s;
    return finish(n, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.grad_buffer();
        for (double& v : g) v += self.grad[0];
    });
}

Value mean(const Value& a) {
    if (a.size() == 0) throw ValidationError("mean of an empty value");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Value mean_rows(const Value& a) {
    if (a.rows() == 0) throw ValidationError("mean_rows of an empty value");
    const std::size_t r = a.rows(), c = a.cols();
    auto n = result(1, c, {a.ptr()});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) n->value[j] += a.data()[i * c + j];
    }
    for (double& v : n->value) v /= static_cast<double>(r);
    return finish(n, [r, c](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j] / static_cast<double>(r);
        }
    });
}

} // namespace adcast::ad
