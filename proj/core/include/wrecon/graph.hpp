#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <string_view>
#include <vector>

#include "wrecon/params.hpp"
#include "wrecon/tensor.hpp"

namespace wrecon {

/// Handle to a node recorded on a Graph.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape for one forward pass. Parameter leaves alias the
/// ParamStore's value and gradient buffers, so calling backward() on several
/// graphs accumulates gradients over a batch. References returned by value()
/// stay valid for the lifetime of the graph. Construct with
/// `grad_enabled = false` for inference: no backward closures are kept.
template <typename T>
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, const Tensor<T>& grad_out)>;

    explicit Graph(ParamStore<T>* params = nullptr, bool grad_enabled = true)
        : params_(params), grad_enabled_(grad_enabled) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var input(Tensor<T> value, bool requires_grad = false);
    Var param(int index);
    Var param(std::string_view name);

    const Tensor<T>& value(Var v) const;
    bool requires_grad(Var v) const;
    bool grad_enabled() const { return grad_enabled_; }

    /// Gradient buffer of `v`, zero-filled on first access.
    Tensor<T>& grad(Var v);

    /// Appends an op result. The node requires a gradient iff any input does.
    Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn fn);

    /// Seeds d(out)/d(out) = 1 for a single-element output and runs the tape backwards.
    void backward(Var out);

    ParamStore<T>& params();
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        const Tensor<T>* ext_value = nullptr;
        Tensor<T> grad;
        Tensor<T>* ext_grad = nullptr;
        bool has_grad = false;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Node& node(Var v);
    const Node& node(Var v) const;

    ParamStore<T>* params_;
    bool grad_enabled_;
    std::deque<Node> nodes_;  // stable references across record()
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace wrecon
