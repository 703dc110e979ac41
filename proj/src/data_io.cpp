#include "adnet/data_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <zlib.h>

namespace adnet {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

std::vector<uint8_t> gunzip(const std::vector<uint8_t>& in, const std::string& path) {
    z_stream strm{};
    if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK)
        throw std::runtime_error("zlib init failed for '" + path + "'");
    std::vector<uint8_t> out;
    out.reserve(in.size() * 4);
    uint8_t buf[1 << 16];
    strm.next_in = const_cast<uint8_t*>(in.data());
    strm.avail_in = uInt(in.size());
    int rc = Z_OK;
    do {
        strm.next_out = buf;
        strm.avail_out = sizeof(buf);
        rc = inflate(&strm, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            throw std::runtime_error("gzip decompression failed for '" + path + "'");
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - strm.avail_out));
    } while (rc != Z_STREAM_END);
    inflateEnd(&strm);
    return out;
}

std::vector<uint8_t> read_maybe_gz(const std::string& path) {
    std::vector<uint8_t> bytes = read_file(path);
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes, path);
    return bytes;
}

uint32_t be32(const std::vector<uint8_t>& b, size_t off, const std::string& path) {
    if (off + 4 > b.size())
        throw std::runtime_error("'" + path + "' truncated: header needs " +
                                 std::to_string(off + 4) + " bytes, file has " +
                                 std::to_string(b.size()));
    return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) | (uint32_t(b[off + 2]) << 8) |
           uint32_t(b[off + 3]);
}

void check_payload(const std::vector<uint8_t>& b, size_t header, size_t payload,
                   const std::string& path) {
    if (b.size() < header + payload)
        throw std::runtime_error("'" + path + "' truncated: expected " +
                                 std::to_string(header + payload) + " bytes, got " +
                                 std::to_string(b.size()));
}

} // namespace

RawMnist load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    constexpr uint32_t kImagesMagic = 0x00000803;
    constexpr uint32_t kLabelsMagic = 0x00000801;

    std::vector<uint8_t> img = read_maybe_gz(images_path);
    const uint32_t img_magic = be32(img, 0, images_path);
    if (img_magic != kImagesMagic)
        throw std::runtime_error("'" + images_path + "' has magic 0x" +
                                 [&] {
                                     char buf[16];
                                     std::snprintf(buf, sizeof(buf), "%08x", img_magic);
                                     return std::string(buf);
                                 }() +
                                 ", expected image magic 0x00000803");
    RawMnist raw;
    raw.count = int(be32(img, 4, images_path));
    raw.rows = int(be32(img, 8, images_path));
    raw.cols = int(be32(img, 12, images_path));
    if (raw.count < 1 || raw.rows < 1 || raw.cols < 1)
        throw std::runtime_error("'" + images_path + "' has degenerate dimensions");
    const size_t payload = size_t(raw.count) * raw.rows * raw.cols;
    check_payload(img, 16, payload, images_path);
    raw.images.assign(img.begin() + 16, img.begin() + 16 + std::ptrdiff_t(payload));

    std::vector<uint8_t> lbl = read_maybe_gz(labels_path);
    const uint32_t lbl_magic = be32(lbl, 0, labels_path);
    if (lbl_magic != kLabelsMagic)
        throw std::runtime_error("'" + labels_path + "' has magic 0x" +
                                 [&] {
                                     char buf[16];
                                     std::snprintf(buf, sizeof(buf), "%08x", lbl_magic);
                                     return std::string(buf);
                                 }() +
                                 ", expected label magic 0x00000801");
    const int lbl_count = int(be32(lbl, 4, labels_path));
    check_payload(lbl, 8, size_t(lbl_count), labels_path);
    if (lbl_count != raw.count)
        throw std::runtime_error("image/label count mismatch: " + std::to_string(raw.count) +
                                 " images vs " + std::to_string(lbl_count) + " labels");
    raw.labels.assign(lbl.begin() + 8, lbl.begin() + 8 + lbl_count);
    return raw;
}

PixelStats compute_pixel_stats(const RawMnist& raw) {
    double sum = 0.0;
    const size_t n = raw.images.size();
    for (uint8_t b : raw.images) sum += double(b) / 255.0;
    const double mean = sum / double(n);
    double sq = 0.0;
    for (uint8_t b : raw.images) {
        const double d = double(b) / 255.0 - mean;
        sq += d * d;
    }
    const double stddev = std::sqrt(sq / double(n));
    if (stddev <= 0.0) throw std::runtime_error("degenerate pixel statistics (constant images)");
    return {mean, stddev};
}

Dataset preprocess(const RawMnist& raw, PixelStats stats, std::string split) {
    constexpr int kSide = 32, kPad = 2;
    if (raw.rows != 28 || raw.cols != 28)
        throw std::invalid_argument("preprocess expects 28x28 raw images, got " +
                                    std::to_string(raw.rows) + "x" + std::to_string(raw.cols));
    Dataset ds;
    ds.split = std::move(split);
    ds.stats = stats;
    ds.images = Tensor({raw.count, 1, kSide, kSide});
    ds.labels.resize(size_t(raw.count));
    const float zero_norm = float((0.0 - stats.mean) / stats.stddev);
    float* out = ds.images.data();
    for (int64_t i = 0; i < int64_t(raw.count) * kSide * kSide; ++i) out[i] = zero_norm;
    for (int s = 0; s < raw.count; ++s) {
        ds.labels[size_t(s)] = raw.labels[size_t(s)];
        const uint8_t* src = raw.images.data() + size_t(s) * 28 * 28;
        float* dst = out + (int64_t(s) * kSide + kPad) * kSide + kPad;
        for (int r = 0; r < 28; ++r) {
            for (int c = 0; c < 28; ++c)
                dst[c] = float((double(src[r * 28 + c]) / 255.0 - stats.mean) / stats.stddev);
            dst += kSide;
        }
    }
    ds.images.validate_finite("preprocess");
    return ds;
}

Dataset synthetic_blobs(int n, int classes, uint64_t seed) {
    if (n < 1 || classes < 1) throw std::invalid_argument("synthetic_blobs: bad arguments");
    constexpr int kSide = 32;
    Dataset ds;
    ds.split = "blobs";
    ds.images = Tensor({n, 1, kSide, kSide});
    ds.labels.resize(size_t(n));
    const double sigma = 2.5;
    for (int s = 0; s < n; ++s) {
        const int cls = s % classes;
        ds.labels[size_t(s)] = cls;
        const double angle = 2.0 * std::numbers::pi * double(cls) / double(classes);
        const uint64_t base = uint64_t(s) * 1024;
        const double cx = 16.0 + 8.0 * std::cos(angle) + 0.7 * normal_at(seed, base, 0.0f, 1.0f);
        const double cy = 16.0 + 8.0 * std::sin(angle) + 0.7 * normal_at(seed, base + 1, 0.0f, 1.0f);
        const double amp = 1.0 + 0.1 * normal_at(seed, base + 2, 0.0f, 1.0f);
        float* img = ds.images.data() + int64_t(s) * kSide * kSide;
        for (int y = 0; y < kSide; ++y) {
            for (int x = 0; x < kSide; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                const double noise =
                    0.03 * normal_at(seed, base + 3 + uint64_t(y) * kSide + x, 0.0f, 1.0f);
                img[y * kSide + x] = float(amp * std::exp(-d2 / (2.0 * sigma * sigma)) + noise);
            }
        }
    }
    // standardize globally, mirroring the MNIST preprocessing
    const double mean = ds.images.mean();
    const double stddev = std::sqrt(ds.images.variance());
    ds.stats = {mean, stddev};
    ds.images.map_([&](float v) { return float((v - mean) / stddev); });
    ds.images.validate_finite("synthetic_blobs");
    return ds;
}

BatchIterator::BatchIterator(const Dataset& ds, int batch_size, uint64_t seed)
    : ds_(ds), batch_size_(batch_size), seed_(seed) {
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (ds.images.dim(0) != int(ds.labels.size()))
        throw std::invalid_argument("dataset image/label count mismatch");
    order_.resize(size_t(ds.images.dim(0)));
    start_epoch(0);
}

void BatchIterator::start_epoch(int epoch) {
    const int n = int(order_.size());
    for (int i = 0; i < n; ++i) order_[size_t(i)] = i;
    // Fisher-Yates on the per-(seed, epoch) counter stream.
    const uint64_t stream = mix64(seed_, uint64_t(epoch));
    for (int i = n - 1; i > 0; --i) {
        const uint64_t r = mix64(stream, uint64_t(i));
        const int j = int(r % uint64_t(i + 1));
        std::swap(order_[size_t(i)], order_[size_t(j)]);
    }
    cursor_ = 0;
}

bool BatchIterator::next(Tensor& x, std::vector<int>& y) {
    const size_t n = order_.size();
    if (cursor_ >= n) return false;
    const int take = int(std::min<size_t>(size_t(batch_size_), n - cursor_));
    const int c = ds_.images.dim(1), h = ds_.images.dim(2), w = ds_.images.dim(3);
    x = Tensor({take, c, h, w});
    y.resize(size_t(take));
    const int64_t sample_size = int64_t(c) * h * w;
    for (int i = 0; i < take; ++i) {
        const int src = order_[cursor_ + size_t(i)];
        std::memcpy(x.data() + int64_t(i) * sample_size,
                    ds_.images.data() + int64_t(src) * sample_size,
                    size_t(sample_size) * sizeof(float));
        y[size_t(i)] = ds_.labels[size_t(src)];
    }
    cursor_ += size_t(take);
    return true;
}

int BatchIterator::batches_per_epoch() const {
    return int((order_.size() + size_t(batch_size_) - 1) / size_t(batch_size_));
}

} // namespace adnet
