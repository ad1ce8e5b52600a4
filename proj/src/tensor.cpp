#include "breathnet/tensor.hpp"

#include <cmath>
#include <sstream>

#include "breathnet/errors.hpp"

namespace breathnet {

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    std::int64_t n = 1;
    for (int d : shape_) {
        if (d <= 0) throw config_error("tensor dimension must be positive, got " + shape_str());
        n *= d;
    }
    data_.assign(static_cast<std::size_t>(n), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    std::int64_t n = 1;
    for (int d : shape_) {
        if (d <= 0) throw config_error("tensor dimension must be positive, got " + shape_str());
        n *= d;
    }
    if (n != static_cast<std::int64_t>(data_.size())) {
        throw config_error("tensor value count " + std::to_string(data_.size()) + " does not match shape " + shape_str());
    }
}

Tensor Tensor::full(int rows, int cols, double v) {
    Tensor t(rows, cols);
    t.fill(v);
    return t;
}

Tensor Tensor::scalar(double v) {
    Tensor t(1, 1);
    t[0] = v;
    return t;
}

Tensor Tensor::row(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor({1, n}, std::move(values));
}

int Tensor::rows() const {
    if (shape_.size() == 2) return shape_[0];
    if (shape_.size() == 1) return 1;
    throw config_error("rows() on tensor of shape " + shape_str());
}

int Tensor::cols() const {
    if (shape_.size() == 2) return shape_[1];
    if (shape_.size() == 1) return shape_[0];
    throw config_error("cols() on tensor of shape " + shape_str());
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

std::size_t Tensor::check_count(int rows, int cols) {
    if (rows <= 0 || cols <= 0) {
        throw config_error("tensor dimensions must be positive, got [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
    }
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
}

}  // namespace breathnet
