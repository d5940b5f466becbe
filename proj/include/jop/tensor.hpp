#ifndef JOP_TENSOR_HPP
#define JOP_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "jop/errors.hpp"

namespace jop::ad {

using Shape = std::vector<std::size_t>;

// Dense row-major tensor of doubles. Value semantics; rank 0 (scalar)
// through 3 are the only ranks the models use.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(count(shape_), fill) {}

    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_))
            throw ShapeError("tensor data size does not match shape");
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    static Tensor vector(std::initializer_list<double> v) {
        return Tensor(Shape{v.size()}, std::vector<double>(v));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool is_scalar() const { return shape_.empty(); }

    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    double item() const {
        if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor");
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Tensor& o) const = default;

    static std::size_t count(const Shape& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

} // namespace jop::ad

#endif
