#include "aesthnet/tensor.hpp"

#include <unordered_set>

namespace aesthnet {

void Tensor::backward() const {
    if (node_->data.size() != 1)
        throw DimensionError("backward() requires a scalar root, got shape " +
                             shape_str(node_->shape));

    // Iterative post-order DFS for a topological order of the tape.
    std::vector<detail::Node*> topo;
    std::unordered_set<detail::Node*> visited;
    struct Frame {
        detail::Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            detail::Node* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && visited.insert(p).second)
                stack.push_back({p, 0});
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

namespace detail {

Tensor make_op_result(Shape shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(Node&)> backward) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    Tensor out(std::move(shape), std::move(data), rg);
    if (rg) {
        auto node = out.node();
        node->parents.reserve(parents.size());
        for (const auto& p : parents) node->parents.push_back(p.node());
        node->backward = std::move(backward);
    }
    return out;
}

}  // namespace detail

}  // namespace aesthnet
