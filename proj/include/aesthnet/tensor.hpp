#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "aesthnet/common.hpp"

namespace aesthnet {

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major tensor participating in a dynamically built reverse-mode
// autodiff tape. Copies are shallow: they alias the same node.
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
        node_ = std::make_shared<detail::Node>();
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return Tensor(Shape{}, std::vector<double>{v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t size() const { return node_->data.size(); }

    std::span<const double> data() const { return node_->data; }
    std::span<double> mutable_data() { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

    // Scalar access (rank-0 or single-element tensors).
    double value() const {
        if (node_->data.size() != 1)
            throw DimensionError("value() requires a scalar, got shape " + shape_str(node_->shape));
        return node_->data[0];
    }

    double at(std::size_t i) const { return node_->data.at(i); }
    double at(std::size_t r, std::size_t c) const {
        return node_->data.at(r * node_->shape.at(1) + c);
    }

    // Reverse-mode sweep from this (scalar) tensor through the tape.
    void backward() const;

    std::shared_ptr<detail::Node> node() const { return node_; }

    // A requires_grad-free copy of the values, cut off from the tape.
    Tensor detach() const {
        return Tensor(node_->shape, node_->data, false);
    }

private:
    std::shared_ptr<detail::Node> node_;
};

namespace detail {

// Creates the result node for an op; requires_grad is inherited from parents.
Tensor make_op_result(Shape shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(Node&)> backward);

}  // namespace detail

}  // namespace aesthnet
