#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace breathnet {

// Dense row-major tensor of doubles. Everything in this library is rank-1
// or rank-2; helpers below treat rank-1 as a row vector where convenient.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols) : shape_{rows, cols}, data_(check_count(rows, cols), 0.0) {}
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
    static Tensor full(int rows, int cols, double v);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> values);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    // Row/col view of a rank-1 or rank-2 tensor.
    int rows() const;
    int cols() const;

    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }
    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;

private:
    static std::size_t check_count(int rows, int cols);

    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace breathnet
