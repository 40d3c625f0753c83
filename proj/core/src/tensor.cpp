#include "ldp/tensor.hpp"

#include <cmath>
#include <sstream>

#include "ldp/errors.hpp"

namespace ldp {

namespace {
int64_t element_count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ArgumentError("tensor dimension must be positive, got " + shape_str(shape));
        n *= d;
    }
    return shape.empty() ? 0 : n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(element_count(shape_)), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = rng.normal();
    return t;
}

void Tensor::fill(double value) {
    for (auto& v : data_) v = value;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "operator+=");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    require_same_shape(*this, other, "operator-=");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double scalar) {
    for (auto& v : data_) v *= scalar;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }
Tensor operator*(double s, Tensor a) { return a *= s; }

void axpy(double alpha, const Tensor& x, Tensor& y) {
    require_same_shape(x, y, "axpy");
    for (int64_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const Tensor& t) { return std::sqrt(dot(t, t)); }

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (int64_t i = 0; i < t.size(); ++i) m = std::max(m, std::abs(t[i]));
    return m;
}

double mean(const Tensor& t) {
    if (t.size() == 0) return 0.0;
    double s = 0.0;
    for (int64_t i = 0; i < t.size(); ++i) s += t[i];
    return s / static_cast<double>(t.size());
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
    if (!a.same_shape(b)) {
        throw ArgumentError(what + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    }
}

}  // namespace ldp
