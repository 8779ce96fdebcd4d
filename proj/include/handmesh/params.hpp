#pragma once

#include <string>
#include <utility>
#include <vector>

#include "handmesh/rng.hpp"
#include "handmesh/tensor.hpp"

namespace handmesh {

// Ordered registry of named learnable tensors. Creation order is the
// serialization and optimizer order, so a fixed construction sequence plus a
// fixed seed gives bit-identical runs.
template <typename T>
class ParamSet {
public:
    explicit ParamSet(std::uint64_t seed = 0) : rng_(seed) {}

    Tensor<T> zeros(const std::string& name, Shape shape) {
        auto t = Tensor<T>::zeros(std::move(shape), true);
        entries_.emplace_back(name, t);
        return t;
    }

    // Uniform He-style init scaled by fan-in.
    Tensor<T> kaiming(const std::string& name, Shape shape, std::size_t fan_in) {
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in ? fan_in : 1));
        std::vector<T> data(shape_numel(shape));
        for (auto& v : data) v = static_cast<T>(rng_.uniform(-bound, bound));
        auto t = Tensor<T>::from_vector(std::move(data), std::move(shape), true);
        entries_.emplace_back(name, t);
        return t;
    }

    void zero_grad() {
        for (auto& [name, t] : entries_) t.zero_grad();
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& [name, t] : entries_) n += t.numel();
        return n;
    }

    std::vector<std::pair<std::string, Tensor<T>>>& entries() { return entries_; }
    const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }

    Tensor<T> find(const std::string& name) const {
        for (const auto& [n, t] : entries_)
            if (n == name) return t;
        throw ContractError("parameter not found: " + name);
    }

private:
    Rng rng_;
    std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

} // namespace handmesh
