#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <unistd.h>
#include <zlib.h>

#include "adnet/data_io.hpp"

using namespace adnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("adnet_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

std::vector<uint8_t> make_images(int count, const std::vector<uint8_t>& pixels) {
    std::vector<uint8_t> bytes;
    put_be32(bytes, 0x00000803);
    put_be32(bytes, uint32_t(count));
    put_be32(bytes, 28);
    put_be32(bytes, 28);
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    return bytes;
}

std::vector<uint8_t> make_labels(int count, const std::vector<uint8_t>& labels,
                                 uint32_t magic = 0x00000801) {
    std::vector<uint8_t> bytes;
    put_be32(bytes, magic);
    put_be32(bytes, uint32_t(count));
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void write_gzip(const std::string& path, const std::vector<uint8_t>& bytes) {
    gzFile f = gzopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    REQUIRE(gzwrite(f, bytes.data(), unsigned(bytes.size())) == int(bytes.size()));
    gzclose(f);
}

} // namespace

TEST_CASE("idx loader round-trips images and labels") {
    TempDir dir;
    std::vector<uint8_t> pixels(3 * 28 * 28, 0);
    pixels[0] = 255;
    pixels[28 * 28 + 5] = 128;
    write_file(dir.file("imgs"), make_images(3, pixels));
    write_file(dir.file("lbls"), make_labels(3, {7, 2, 9}));
    RawMnist raw = load_mnist_idx(dir.file("imgs"), dir.file("lbls"));
    CHECK(raw.count == 3);
    CHECK(raw.rows == 28);
    CHECK(raw.cols == 28);
    CHECK(raw.images[0] == 255);
    CHECK(raw.images[28 * 28 + 5] == 128);
    CHECK(raw.labels == std::vector<uint8_t>{7, 2, 9});
}

TEST_CASE("idx loader inflates gzip-compressed files transparently") {
    TempDir dir;
    std::vector<uint8_t> pixels(2 * 28 * 28, 17);
    write_gzip(dir.file("imgs.gz"), make_images(2, pixels));
    write_gzip(dir.file("lbls.gz"), make_labels(2, {1, 4}));
    RawMnist raw = load_mnist_idx(dir.file("imgs.gz"), dir.file("lbls.gz"));
    CHECK(raw.count == 2);
    CHECK(raw.images.size() == 2 * 28 * 28);
    CHECK(raw.labels[1] == 4);
}

TEST_CASE("labels file carrying the image magic is rejected") {
    TempDir dir;
    write_file(dir.file("imgs"), make_images(1, std::vector<uint8_t>(28 * 28, 0)));
    write_file(dir.file("lbls"), make_labels(1, {3}, 0x00000803));
    CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs"), dir.file("lbls")),
                         doctest::Contains("0x00000803"), std::runtime_error);
}

TEST_CASE("truncated payload errors name the expected and actual byte counts") {
    TempDir dir;
    std::vector<uint8_t> bytes = make_images(2, std::vector<uint8_t>(2 * 28 * 28, 1));
    bytes.resize(bytes.size() - 100);
    write_file(dir.file("imgs"), bytes);
    write_file(dir.file("lbls"), make_labels(2, {0, 1}));
    CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs"), dir.file("lbls")),
                         doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("degenerate image counts are rejected") {
    TempDir dir;
    std::vector<uint8_t> bytes;
    put_be32(bytes, 0x00000803);
    put_be32(bytes, 0); // zero images
    put_be32(bytes, 28);
    put_be32(bytes, 28);
    write_file(dir.file("imgs"), bytes);
    write_file(dir.file("lbls"), make_labels(0, {}));
    CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs"), dir.file("lbls")),
                         doctest::Contains("degenerate"), std::runtime_error);
}

TEST_CASE("image/label count mismatch is rejected") {
    TempDir dir;
    write_file(dir.file("imgs"), make_images(3, std::vector<uint8_t>(3 * 28 * 28, 1)));
    write_file(dir.file("lbls"), make_labels(2, {0, 1}));
    CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs"), dir.file("lbls")),
                         doctest::Contains("mismatch"), std::runtime_error);
}

TEST_CASE("preprocess pads to 32x32 and standardizes with the given constants") {
    RawMnist raw;
    raw.count = 2;
    raw.rows = raw.cols = 28;
    raw.images.assign(2 * 28 * 28, 0);
    for (size_t i = 28 * 28; i < raw.images.size(); ++i) raw.images[i] = uint8_t(i % 251);
    raw.labels = {0, 1};
    const PixelStats stats = compute_pixel_stats(raw);

    // independent recomputation of the training statistics
    double sum = 0.0;
    for (uint8_t b : raw.images) sum += b / 255.0;
    const double mean = sum / double(raw.images.size());
    double sq = 0.0;
    for (uint8_t b : raw.images) sq += (b / 255.0 - mean) * (b / 255.0 - mean);
    const double stddev = std::sqrt(sq / double(raw.images.size()));
    CHECK(stats.mean == doctest::Approx(mean).epsilon(1e-9));
    CHECK(stats.stddev == doctest::Approx(stddev).epsilon(1e-9));

    Dataset ds = preprocess(raw, stats, "train");
    CHECK(ds.images.shape() == std::vector<int>{2, 1, 32, 32});

    const float zero_norm = float((0.0 - stats.mean) / stats.stddev);
    // all-zero first image is constant at the normalized zero value
    for (int i = 0; i < 32 * 32; ++i) CHECK(ds.images[i] == zero_norm);
    // the padding ring of any image equals the normalized zero value
    for (int i = 0; i < 32; ++i) {
        CHECK(ds.images.at(1, 0, 0, i) == zero_norm);
        CHECK(ds.images.at(1, 0, 31, i) == zero_norm);
        CHECK(ds.images.at(1, 0, i, 0) == zero_norm);
        CHECK(ds.images.at(1, 0, i, 31) == zero_norm);
        CHECK(ds.images.at(1, 0, 1, i) == zero_norm);
    }
    // an interior pixel is standardized
    const double raw_px = raw.images[28 * 28 + 0] / 255.0;
    CHECK(double(ds.images.at(1, 0, 2, 2)) ==
          doctest::Approx((raw_px - stats.mean) / stats.stddev).epsilon(1e-6));
    CHECK(ds.labels[1] == 1);
}

TEST_CASE("preprocess rejects non-28x28 input") {
    RawMnist raw;
    raw.count = 1;
    raw.rows = raw.cols = 16;
    raw.images.assign(256, 0);
    raw.labels = {1};
    CHECK_THROWS(preprocess(raw, {0.5, 0.5}, "x"));
}

TEST_CASE("synthetic blobs: determinism, balance, and a centroid-classifier oracle") {
    Dataset a = synthetic_blobs(500, 10, 42);
    Dataset b = synthetic_blobs(500, 10, 42);
    for (int64_t i = 0; i < a.images.size(); ++i) REQUIRE(a.images[i] == b.images[i]);

    std::map<int, int> counts;
    for (int label : a.labels) ++counts[label];
    REQUIRE(counts.size() == 10);
    int lo = 1 << 30, hi = 0;
    for (auto& [cls, n] : counts) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
    }
    CHECK(hi - lo <= 1);

    // nearest-centroid classifier fit on a separate draw
    Dataset train = synthetic_blobs(1000, 10, 7);
    Dataset test = synthetic_blobs(400, 10, 8);
    const int64_t dim = 32 * 32;
    std::vector<std::vector<double>> centroids(10, std::vector<double>(size_t(dim), 0.0));
    std::vector<int> n_per(10, 0);
    for (int s = 0; s < 1000; ++s) {
        const int c = train.labels[size_t(s)];
        ++n_per[size_t(c)];
        for (int64_t i = 0; i < dim; ++i)
            centroids[size_t(c)][size_t(i)] += train.images[int64_t(s) * dim + i];
    }
    for (int c = 0; c < 10; ++c)
        for (double& v : centroids[size_t(c)]) v /= double(n_per[size_t(c)]);
    int correct = 0;
    for (int s = 0; s < 400; ++s) {
        double best = 1e300;
        int arg = -1;
        for (int c = 0; c < 10; ++c) {
            double d2 = 0.0;
            for (int64_t i = 0; i < dim; ++i) {
                const double d = test.images[int64_t(s) * dim + i] - centroids[size_t(c)][size_t(i)];
                d2 += d * d;
            }
            if (d2 < best) {
                best = d2;
                arg = c;
            }
        }
        if (arg == test.labels[size_t(s)]) ++correct;
    }
    CHECK(double(correct) / 400.0 > 0.9);
}

TEST_CASE("batch iterator covers every index exactly once per epoch") {
    Dataset ds = synthetic_blobs(103, 5, 3);
    BatchIterator it(ds, 16, 9);
    for (int epoch = 0; epoch < 2; ++epoch) {
        it.start_epoch(epoch);
        Tensor x;
        std::vector<int> y;
        std::multiset<int> seen;
        int total = 0, batches = 0;
        std::vector<int> order = it.order();
        while (it.next(x, y)) {
            total += x.dim(0);
            ++batches;
            CHECK(x.dim(0) <= 16);
        }
        CHECK(total == 103);
        CHECK(batches == it.batches_per_epoch());
        for (int idx : order) seen.insert(idx);
        CHECK(seen.size() == 103);
        CHECK(*seen.begin() == 0);
        CHECK(*seen.rbegin() == 102);
        CHECK(std::set<int>(order.begin(), order.end()).size() == 103);
    }
}

TEST_CASE("batch iterator shuffles deterministically per (seed, epoch)") {
    Dataset ds = synthetic_blobs(64, 4, 5);
    BatchIterator a(ds, 8, 77);
    BatchIterator b(ds, 8, 77);
    a.start_epoch(3);
    b.start_epoch(3);
    CHECK(a.order() == b.order());
    b.start_epoch(4);
    CHECK(a.order() != b.order());
    BatchIterator c(ds, 8, 78);
    c.start_epoch(3);
    CHECK(a.order() != c.order());
}
