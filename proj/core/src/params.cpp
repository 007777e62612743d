#include "wrecon/params.hpp"

#include <numeric>

#include "wrecon/errors.hpp"

namespace wrecon {

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

template <typename T>
int ParamStore<T>::add(std::string name, Tensor<T> init) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
    const int id = static_cast<int>(values_.size());
    index_.emplace(name, id);
    grads_.emplace_back(init.shape);
    values_.push_back(std::move(init));
    names_.push_back(std::move(name));
    return id;
}

template <typename T>
int ParamStore<T>::index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
    return it->second;
}

template <typename T>
bool ParamStore<T>::contains(std::string_view name) const {
    return index_.contains(std::string(name));
}

template <typename T>
void ParamStore<T>::zero_grad() {
    for (auto& g : grads_) g.fill(T(0));
}

template <typename T>
std::size_t ParamStore<T>::total_elements() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

template <typename T>
void ParamStore<T>::assign_from(const ParamStore& other) {
    if (other.size() != size())
        throw DataError("parameter count mismatch: " + std::to_string(other.size()) + " vs " +
                        std::to_string(size()));
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const int j = other.index(names_[i]);
        if (other.value(j).shape != values_[i].shape)
            throw DataError("shape mismatch for " + names_[i] + ": " + shape_str(other.value(j).shape) +
                            " vs " + shape_str(values_[i].shape));
        values_[i].data = other.value(j).data;
    }
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace wrecon
