#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace adcast::ad {

class Tape;

/// One recorded value. Every value is a row-major rows x cols matrix.
struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;  // sized on demand during backward
    bool requires_grad = false;
    Tape* tape = nullptr;
    std::vector<std::shared_ptr<Node>> parents;
    /// Accumulates this node's grad into its parents' grads.
    std::function<void(Node&)> backward;
    /// Parameter leaves forward their gradient here after backward.
    std::vector<double>* sink = nullptr;

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

/// Handle to a node; cheap to copy.
class Value {
public:
    Value() = default;
    explicit Value(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->value.size(); }
    const std::vector<double>& data() const { return node_->value; }
    double at(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
    /// The scalar of a 1 x 1 value.
    double item() const;
    bool requires_grad() const { return node_->requires_grad; }
    const std::vector<double>& grad() const { return node_->grad; }

    Node& node() const { return *node_; }
    const std::shared_ptr<Node>& ptr() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node> node_;
};

class ParamStore;

/// Records operations in creation order; backward walks the record in reverse,
/// so each node is visited exactly once.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives gradients.
    Value constant(std::size_t rows, std::size_t cols, std::vector<double> data);
    Value constant(std::size_t rows, std::size_t cols, double fill = 0.0);

    /// Leaf bound to a stored parameter; its gradient is added to the store after backward.
    Value param(ParamStore& store, const std::string& name);

    /// Leaf that receives a gradient but is not bound to a store (for testing and inputs).
    Value variable(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Back-propagates from a 1 x 1 loss. Throws ValidationError for non-scalar losses.
    void backward(const Value& loss);

    void record(const std::shared_ptr<Node>& node) { nodes_.push_back(node); }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    std::vector<std::shared_ptr<Node>> nodes_;
};

} // namespace adcast::ad
