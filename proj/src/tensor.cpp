#include "mgsgan/tensor.hpp"

#include "graph_internal.hpp"
#include "mgsgan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace mgsgan::ad {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

std::vector<double>& Node::grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

namespace detail {

std::uint64_t next_sequence() {
    thread_local std::uint64_t counter = 0;
    return ++counter;
}

void check_finite(const char* op, std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite output from ") + op);
    }
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
    check_finite(op, value);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->sequence = next_sequence();
    node->op = op;
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.node() && t.requires_grad(); });
    if (any) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& t : inputs) node->inputs.push_back(t.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

}  // namespace detail

Tensor::Tensor() : node_(std::make_shared<Node>()) { node_->sequence = detail::next_sequence(); }

Tensor::Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_size(shape) != values.size()) {
        throw DimensionError("shape " + shape_string(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    node->sequence = detail::next_sequence();
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_string(shape()));
    }
    return node_->shape[axis];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return from(node_->shape, node_->value, node_->requires_grad); }

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

std::vector<const Node*> backward_order(const Tensor& root) {
    std::vector<Node*> found;
    std::unordered_set<const Node*> seen;
    std::vector<Node*> stack;
    if (root.requires_grad()) stack.push_back(root.node().get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        found.push_back(n);
        for (auto& in : n->inputs) {
            if (in->requires_grad && !seen.count(in.get())) stack.push_back(in.get());
        }
    }
    std::sort(found.begin(), found.end(),
              [](const Node* a, const Node* b) { return a->sequence > b->sequence; });
    return {found.begin(), found.end()};
}

void backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) return;
    const auto order = backward_order(loss);
    loss.node()->grad_buffer()[0] += 1.0;
    for (const Node* cn : order) {
        auto* n = const_cast<Node*>(cn);
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
    // Interior gradients are only needed during the sweep.
    for (const Node* cn : order) {
        auto* n = const_cast<Node*>(cn);
        if (n->backward) n->grad.clear();
    }
}

}  // namespace mgsgan::ad
