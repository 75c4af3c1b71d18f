#include "generallog/neural/tensor.hpp"

#include "generallog/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace generallog::neural {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    if (std::any_of(shape.begin(), shape.end(), [](std::size_t d) { return d == 0; })) {
        throw Error(ErrorCode::ShapeMismatch, "tensor dimensions must be positive");
    }
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (product(shape_) != data_.size()) {
        throw Error(ErrorCode::ShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                                  " does not match its shape");
    }
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::require_finite(std::string_view name) const {
    for (const double x : data_) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "non-finite value in " + std::string(name));
    }
}

}  // namespace generallog::neural
