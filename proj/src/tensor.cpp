#include "adnet/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "adnet/parallel.hpp"

namespace adnet {

uint64_t mix64(uint64_t seed, uint64_t index) {
    // splitmix64 output function on the stream position.
    uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double uniform01_at(uint64_t seed, uint64_t index) {
    return double(mix64(seed, index) >> 11) * 0x1.0p-53;
}

float normal_at(uint64_t seed, uint64_t index, float mean, float stddev) {
    // Box-Muller; u1 is shifted into (0, 1] so log() never sees zero.
    double u1 = double((mix64(seed, 2 * index) >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform01_at(seed, 2 * index + 1);
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return float(double(mean) + double(stddev) * z);
}

Shape4 Shape4::activation(int n, int c, int h, int w) {
    if (n < 1 || c < 1 || h < 1 || w < 1)
        throw std::invalid_argument("Shape4 extents must be >= 1");
    return {n, c, h, w};
}

Shape4 Shape4::filters(int c_out, int c_in, int k) {
    if (c_out < 1 || c_in < 1 || k < 1)
        throw std::invalid_argument("Shape4 extents must be >= 1");
    return {c_out, c_in, k, k};
}

std::string Shape4::str() const {
    std::ostringstream os;
    os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
    return os.str();
}

namespace {

int64_t checked_count(const std::vector<int>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
    int64_t count = 1;
    for (int e : shape) {
        if (e < 1) throw std::invalid_argument("tensor extents must be positive");
        count *= e;
    }
    return count;
}

std::string shape_to_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ")";
    return os.str();
}

} // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(size_t(checked_count(shape_)), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_count(shape_) != int64_t(data_.size()))
        throw std::invalid_argument("tensor data length does not match shape " + shape_to_str(shape_));
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    for (float& v : t.data_) v = value;
    return t;
}

Tensor Tensor::randn(std::vector<int> shape, float mean, float stddev, uint64_t seed) {
    Tensor t(std::move(shape));
    float* out = t.data();
    parallel_for_blocked(t.size(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) out[i] = normal_at(seed, uint64_t(i), mean, stddev);
    });
    t.validate_finite("randn");
    return t;
}

int64_t Tensor::index(int i0, int i1, int i2, int i3) const {
    return ((int64_t(i0) * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3;
}

float& Tensor::at(int i0, int i1, int i2, int i3) { return data_[size_t(index(i0, i1, i2, i3))]; }
float Tensor::at(int i0, int i1, int i2, int i3) const { return data_[size_t(index(i0, i1, i2, i3))]; }

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (checked_count(shape) != size())
        throw std::invalid_argument("reshape " + shape_str() + " -> " + shape_to_str(shape) +
                                    " changes element count");
    return Tensor(std::move(shape), data_);
}

Tensor& Tensor::add_(const Tensor& other) {
    if (!same_shape(other))
        throw std::invalid_argument("shape mismatch in add: " + shape_str() + " vs " + other.shape_str());
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::sub_(const Tensor& other) {
    if (!same_shape(other))
        throw std::invalid_argument("shape mismatch in sub: " + shape_str() + " vs " + other.shape_str());
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor& Tensor::scale_(float factor) {
    for (float& v : data_) v *= factor;
    return *this;
}

namespace {

constexpr int64_t kReduceBlock = 4096;

// Fixed block decomposition: block partials may be computed on any thread,
// the combine walks blocks in index order, so the result never depends on
// the thread count.
template <class Term>
double blocked_reduce(const float* data, int64_t n, Term term) {
    if (n == 0) return 0.0;
    int64_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
    std::vector<double> partial(size_t(nblocks), 0.0);
    parallel_for(nblocks, [&](int64_t b) {
        int64_t lo = b * kReduceBlock;
        int64_t hi = std::min(n, lo + kReduceBlock);
        double acc = 0.0;
        for (int64_t i = lo; i < hi; ++i) acc += term(double(data[i]));
        partial[size_t(b)] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

} // namespace

double Tensor::reduce_sum() const {
    return blocked_reduce(data(), size(), [](double v) { return v; });
}

double Tensor::l2_norm() const {
    return std::sqrt(blocked_reduce(data(), size(), [](double v) { return v * v; }));
}

double Tensor::mean() const {
    if (size() == 0) throw std::invalid_argument("mean of empty tensor");
    return reduce_sum() / double(size());
}

double Tensor::variance() const {
    double mu = mean();
    return blocked_reduce(data(), size(), [mu](double v) { return (v - mu) * (v - mu); }) /
           double(size());
}

double Tensor::excess_kurtosis() const {
    double mu = mean();
    double m2 = blocked_reduce(data(), size(), [mu](double v) { return (v - mu) * (v - mu); }) /
                double(size());
    if (m2 == 0.0) throw std::invalid_argument("excess_kurtosis of constant tensor");
    double m4 = blocked_reduce(data(), size(),
                               [mu](double v) {
                                   double d = (v - mu) * (v - mu);
                                   return d * d;
                               }) /
                double(size());
    return m4 / (m2 * m2) - 3.0;
}

const Tensor& Tensor::validate_finite(const char* what) const {
    for (size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i]))
            throw std::runtime_error(std::string("non-finite value in ") + what + " at flat index " +
                                     std::to_string(i));
    }
    return *this;
}

std::string Tensor::shape_str() const { return shape_to_str(shape_); }

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor r = a;
    r.add_(b);
    return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tensor r = a;
    r.sub_(b);
    return r;
}

} // namespace adnet
