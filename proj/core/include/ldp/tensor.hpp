#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldp/rng.hpp"

namespace ldp {

// Dense row-major array of doubles. Latents are {C, H, W} (default 4x64x64),
// RGB images {3, H, W}, masks/alpha maps {1, H, W}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor randn(std::vector<int> shape, Rng& rng);

    const std::vector<int>& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // CHW accessors
    double& at(int c, int y, int x) { return data_[idx(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[idx(c, y, x)]; }

    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double value);
    bool all_finite() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);
    Tensor& operator*=(double scalar);

private:
    size_t idx(int c, int y, int x) const {
        const int h = shape_[1], w = shape_[2];
        return (static_cast<size_t>(c) * h + y) * w + x;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);
Tensor operator*(double s, Tensor a);

// y += alpha * x
void axpy(double alpha, const Tensor& x, Tensor& y);

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& t);
double max_abs(const Tensor& t);
double mean(const Tensor& t);

std::string shape_str(const std::vector<int>& shape);

// throws ArgumentError naming `what` when shapes differ
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

}  // namespace ldp
