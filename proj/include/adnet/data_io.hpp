#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adnet/tensor.hpp"

namespace adnet {

struct RawMnist {
    int count = 0, rows = 0, cols = 0;
    std::vector<uint8_t> images; // count*rows*cols bytes
    std::vector<uint8_t> labels; // count bytes
};

/// IDX pair loader: big-endian magic 0x00000803 (images) / 0x00000801
/// (labels), big-endian dimension words, unsigned-byte payload.  Files
/// starting with the gzip magic 0x1f 0x8b are inflated first.  Rejects bad
/// magic, truncated payloads, and image/label count mismatches.
RawMnist load_mnist_idx(const std::string& images_path, const std::string& labels_path);

struct PixelStats {
    double mean = 0.0;
    double stddev = 1.0;
};

/// Global mean/std over the raw pixels scaled to [0, 1]; computed from the
/// training split at load time rather than hard-coded.
PixelStats compute_pixel_stats(const RawMnist& raw);

struct Dataset {
    Tensor images; // (N, 1, 32, 32)
    std::vector<int> labels;
    std::string split;
    PixelStats stats; // normalization constants used
};

/// 28x28 -> 32x32 by 2-pixel zero padding, then (x - mean)/std with the
/// given constants; padding pixels end up at the normalized zero value.
Dataset preprocess(const RawMnist& raw, PixelStats stats, std::string split);

/// Gaussian class blobs rendered as 32x32 images, one bump per class placed
/// on a circle; labels round-robin so class counts balance within 1.
/// Deterministic per seed; a nearest-centroid classifier separates them.
Dataset synthetic_blobs(int n, int classes, uint64_t seed);

/// Each epoch visits every sample exactly once; shuffle order is a pure
/// function of (seed, epoch).  The final batch may be short.
class BatchIterator {
public:
    BatchIterator(const Dataset& ds, int batch_size, uint64_t seed);

    void start_epoch(int epoch);
    bool next(Tensor& x, std::vector<int>& y);
    int batches_per_epoch() const;
    const std::vector<int>& order() const { return order_; }

private:
    const Dataset& ds_;
    int batch_size_;
    uint64_t seed_;
    std::vector<int> order_;
    size_t cursor_ = 0;
};

} // namespace adnet
