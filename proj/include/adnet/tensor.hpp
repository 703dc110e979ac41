#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adnet {

// Counter-based PRNG: every draw is a pure function of (seed, index), so
// streams are reproducible byte-for-byte regardless of thread count or
// evaluation order.  splitmix64 stream with Box-Muller on top for normals.
uint64_t mix64(uint64_t seed, uint64_t index);
double uniform01_at(uint64_t seed, uint64_t index);   // in [0, 1)
float normal_at(uint64_t seed, uint64_t index, float mean, float stddev);

/// Four extents with role labels, all >= 1.  Activations are (n, c, h, w);
/// filter banks are (c_out, c_in, k, k) with the kernel column
/// fastest-varying.
struct Shape4 {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    static Shape4 activation(int n, int c, int h, int w);
    static Shape4 filters(int c_out, int c_in, int k);

    int64_t count() const { return int64_t(n) * c * h * w; }
    std::vector<int> dims() const { return {n, c, h, w}; }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

// Dense row-major float tensor.  Index formula for a 4-d tensor
// (d0, d1, d2, d3): flat = ((i0*d1 + i1)*d2 + i2)*d3 + i3, so the last
// extent is contiguous.  Activations use (N, C, H, W), filters
// (c_out, c_in, k, k), FC weights (in_features, out_features).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<float> data);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, float value);
    /// Deterministic N(mean, std^2) fill; identical bytes for identical
    /// (shape, seed) on every run and thread count.
    static Tensor randn(std::vector<int> shape, float mean, float stddev, uint64_t seed);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return int(shape_.size()); }
    int dim(int i) const { return shape_[size_t(i)]; }
    int64_t size() const { return int64_t(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](int64_t i) { return data_[size_t(i)]; }
    float operator[](int64_t i) const { return data_[size_t(i)]; }

    // 4-d accessors (shape must have 4 dims).
    float& at(int i0, int i1, int i2, int i3);
    float at(int i0, int i1, int i2, int i3) const;
    int64_t index(int i0, int i1, int i2, int i3) const;

    Tensor reshaped(std::vector<int> shape) const;

    // Elementwise; shapes must match exactly where binary.
    Tensor& add_(const Tensor& other);
    Tensor& sub_(const Tensor& other);
    Tensor& scale_(float factor);
    template <class F>
    Tensor& map_(F&& f) {
        for (float& v : data_) v = f(v);
        return *this;
    }

    // Reductions accumulate in double over a fixed block structure, so the
    // result is bit-identical whether blocks are evaluated serially or in
    // parallel.
    double reduce_sum() const;
    double l2_norm() const;
    double mean() const;
    double variance() const;        // population (divide by n)
    double excess_kurtosis() const; // m4/m2^2 - 3

    /// Throws std::runtime_error naming `what` if any element is NaN/Inf.
    const Tensor& validate_finite(const char* what) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);

} // namespace adnet
