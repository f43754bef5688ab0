#include "adcast/autodiff/tape.hpp"

#include "adcast/autodiff/params.hpp"
#include "adcast/errors.hpp"

namespace adcast::ad {

double Value::item() const {
    if (node_->value.size() != 1) throw ValidationError("item() on a non-scalar value");
    return node_->value[0];
}

Value Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols) throw ValidationError("constant: data length does not match shape");
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(data);
    return Value(std::move(n));
}

Value Tape::constant(std::size_t rows, std::size_t cols, double fill) {
    return constant(rows, cols, std::vector<double>(rows * cols, fill));
}

Value Tape::variable(std::size_t rows, std::size_t cols, std::vector<double> data) {
    Value v = constant(rows, cols, std::move(data));
    v.node().requires_grad = true;
    v.node().tape = this;
    record(v.ptr());
    return v;
}

Value Tape::param(ParamStore& store, const std::string& name) {
    Param& p = store.at(name);
    auto n = std::make_shared<Node>();
    n->rows = p.rows;
    n->cols = p.cols;
    n->value = p.value;
    n->requires_grad = true;
    n->tape = this;
    n->sink = &p.grad;
    record(n);
    return Value(std::move(n));
}

void Tape::backward(const Value& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw ValidationError("backward needs a scalar loss, got " + std::to_string(loss.rows()) + "x" +
                              std::to_string(loss.cols()));
    }
    if (!loss.requires_grad()) return;
    for (auto& n : nodes_) n->grad.clear();
    loss.node().grad_buffer()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.grad.empty()) continue;
        if (n.backward) n.backward(n);
        if (n.sink) {
            if (n.sink->size() != n.grad.size()) n.sink->assign(n.grad.size(), 0.0);
            for (std::size_t i = 0; i < n.grad.size(); ++i) (*n.sink)[i] += n.grad[i];
        }
    }
}

} // namespace adcast::ad
