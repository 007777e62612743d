#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wrecon/tensor.hpp"

namespace wrecon {

/// Owns every trainable tensor of a model under a unique hierarchical name
/// (e.g. `gsao.enc0.garo.conv.weight`) together with its gradient buffer.
/// Insertion order is stable and defines checkpoint layout.
template <typename T>
class ParamStore {
public:
    int add(std::string name, Tensor<T> init);

    int index(std::string_view name) const;
    bool contains(std::string_view name) const;

    std::size_t size() const { return values_.size(); }
    const std::string& name(int i) const { return names_.at(static_cast<std::size_t>(i)); }
    const std::vector<std::string>& names() const { return names_; }

    Tensor<T>& value(int i) { return values_.at(static_cast<std::size_t>(i)); }
    const Tensor<T>& value(int i) const { return values_.at(static_cast<std::size_t>(i)); }
    Tensor<T>& value(std::string_view name) { return value(index(name)); }
    const Tensor<T>& value(std::string_view name) const { return value(index(name)); }

    Tensor<T>& grad(int i) { return grads_.at(static_cast<std::size_t>(i)); }
    const Tensor<T>& grad(int i) const { return grads_.at(static_cast<std::size_t>(i)); }

    void zero_grad();
    std::size_t total_elements() const;

    /// Copies values (not gradients) into a store of another precision.
    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (std::size_t i = 0; i < values_.size(); ++i) out.add(names_[i], tensor_cast<U>(values_[i]));
        return out;
    }

    /// Overwrites values from `other`; names and shapes must match one to one.
    void assign_from(const ParamStore& other);

private:
    std::vector<std::string> names_;
    std::vector<Tensor<T>> values_;
    std::vector<Tensor<T>> grads_;
    std::unordered_map<std::string, int> index_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace wrecon
