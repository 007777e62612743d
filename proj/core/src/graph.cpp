#include "wrecon/graph.hpp"

#include "wrecon/errors.hpp"

namespace wrecon {

template <typename T>
typename Graph<T>::Node& Graph<T>::node(Var v) {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::out_of_range("invalid graph variable");
    return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::out_of_range("invalid graph variable");
    return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
Var Graph<T>::input(Tensor<T> value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Graph<T>::param(int index) {
    ParamStore<T>& store = params();
    Node n;
    n.ext_value = &store.value(index);
    if (grad_enabled_) {
        n.ext_grad = &store.grad(index);
        n.requires_grad = true;
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Graph<T>::param(std::string_view name) {
    return param(params().index(name));
}

template <typename T>
ParamStore<T>& Graph<T>::params() {
    if (!params_) throw std::logic_error("graph has no parameter store");
    return *params_;
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
    const Node& n = node(v);
    return n.ext_value ? *n.ext_value : n.value;
}

template <typename T>
bool Graph<T>::requires_grad(Var v) const {
    return node(v).requires_grad;
}

template <typename T>
Tensor<T>& Graph<T>::grad(Var v) {
    Node& n = node(v);
    if (n.ext_grad) return *n.ext_grad;
    if (!n.has_grad) {
        const Tensor<T>& val = n.ext_value ? *n.ext_value : n.value;
        n.grad = Tensor<T>(val.shape);
        n.has_grad = true;
    }
    return n.grad;
}

template <typename T>
Var Graph<T>::record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    if (grad_enabled_) {
        for (Var in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
        if (n.requires_grad) n.backward = std::move(fn);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Graph<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

template <typename T>
void Graph<T>::backward(Var out) {
    if (!grad_enabled_) throw std::logic_error("backward() on a graph built without gradients");
    if (value(out).size() != 1) throw std::invalid_argument("backward() needs a scalar output");
    if (!node(out).requires_grad) return;
    grad(out)[0] += T(1);
    for (int i = out.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.backward || !n.has_grad) continue;
        n.backward(*this, n.grad);
    }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace wrecon
