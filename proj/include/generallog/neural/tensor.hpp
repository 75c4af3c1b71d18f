#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace generallog::neural {

/// Row-major dense tensor of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    [[nodiscard]] std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    [[nodiscard]] std::span<double> values() { return data_; }
    [[nodiscard]] std::span<const double> values() const { return data_; }
    [[nodiscard]] double* data() { return data_.data(); }
    [[nodiscard]] const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    [[nodiscard]] bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    [[nodiscard]] Tensor zeros_like() const { return Tensor(shape_); }
    void fill(double value);

    /// Throws Error(NonFinite) naming the tensor.
    void require_finite(std::string_view name) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace generallog::neural
