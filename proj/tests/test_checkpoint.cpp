#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <unistd.h>

#include "adnet/checkpoint.hpp"
#include "adnet/model.hpp"

using namespace adnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("adnet_ckpt_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Network trained_like_net(uint64_t seed) {
    Network net = build_lenet5_bn(NetBackend::Adder, true);
    init_params(net, InitScheme::FanIn, 0.0f, seed);
    // move the BN running statistics off their defaults
    Tensor x = Tensor::randn({4, 1, 32, 32}, 0.0f, 1.0f, seed + 1);
    net.forward(x, true);
    return net;
}

} // namespace

TEST_CASE("checkpoint round-trip restores every tensor bit-for-bit") {
    TempDir dir;
    Network net = trained_like_net(31);
    save_checkpoint(dir.file("a.adnw"), net);

    Network fresh = build_lenet5_bn(NetBackend::Adder, true);
    load_checkpoint(dir.file("a.adnw"), fresh);
    for (size_t i = 0; i < net.layers().size(); ++i) {
        const auto& a = net.layers()[i];
        const auto& b = fresh.layers()[i];
        for (int64_t e = 0; e < a.weights.size(); ++e) REQUIRE(a.weights[e] == b.weights[e]);
        if (a.spec.kind == LayerKind::BatchNorm) {
            for (int64_t e = 0; e < a.bn.gamma.size(); ++e) {
                REQUIRE(a.bn.gamma[e] == b.bn.gamma[e]);
                REQUIRE(a.bn.beta[e] == b.bn.beta[e]);
                REQUIRE(a.bn.running_mean[e] == b.bn.running_mean[e]);
                REQUIRE(a.bn.running_var[e] == b.bn.running_var[e]);
            }
        }
    }
}

TEST_CASE("checkpoint bytes are deterministic") {
    TempDir dir;
    Network net = trained_like_net(7);
    save_checkpoint(dir.file("a.adnw"), net);
    save_checkpoint(dir.file("b.adnw"), net);
    std::ifstream fa(dir.file("a.adnw"), std::ios::binary);
    std::ifstream fb(dir.file("b.adnw"), std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa.size() > 0);
    CHECK(sa == sb);
}

TEST_CASE("a corrupted checkpoint fails checksum validation and is refused") {
    TempDir dir;
    Network net = trained_like_net(9);
    save_checkpoint(dir.file("a.adnw"), net);

    std::fstream f(dir.file("a.adnw"), std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(200);
    char byte = 0x5A;
    f.write(&byte, 1);
    f.close();

    Network fresh = build_lenet5_bn(NetBackend::Adder, true);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("a.adnw"), fresh),
                         doctest::Contains("checksum"), std::runtime_error);
}

TEST_CASE("wrong magic and truncation are rejected") {
    TempDir dir;
    {
        std::ofstream out(dir.file("bad.adnw"), std::ios::binary);
        out << "NOPEnope this is not a checkpoint";
    }
    Network net = build_lenet5_bn(NetBackend::Adder, true);
    CHECK_THROWS(load_checkpoint(dir.file("bad.adnw"), net));
    {
        std::ofstream out(dir.file("tiny.adnw"), std::ios::binary);
        out << "AD";
    }
    CHECK_THROWS(load_checkpoint(dir.file("tiny.adnw"), net));
}

TEST_CASE("entry set must match the network exactly") {
    TempDir dir;
    Network net = trained_like_net(13);
    save_checkpoint(dir.file("a.adnw"), net);

    // a different topology cannot consume these entries
    std::vector<LayerSpec> specs{{LayerKind::Flatten, "flatten", 0, 0, 1, 0, false},
                                 {LayerKind::Fc, "fc", 2, 0, 1, 0, false}};
    Network other(std::move(specs), {4, 1, 1});
    CHECK_THROWS(load_checkpoint(dir.file("a.adnw"), other));
}

TEST_CASE("entries are readable without a network and include running stats") {
    TempDir dir;
    Network net = trained_like_net(17);
    save_checkpoint(dir.file("a.adnw"), net);
    auto entries = read_checkpoint_entries(dir.file("a.adnw"));
    bool saw_filters = false, saw_running = false;
    for (const auto& [name, tensor] : entries) {
        if (name == "conv1.filters") {
            saw_filters = true;
            CHECK(tensor.shape() == std::vector<int>{6, 1, 5, 5});
        }
        if (name == "bn1.running_mean") saw_running = true;
    }
    CHECK(saw_filters);
    CHECK(saw_running);
}

TEST_CASE("crc32 matches the known check value") {
    // IEEE CRC-32 of "123456789"
    const char* s = "123456789";
    CHECK(crc32_ieee(reinterpret_cast<const uint8_t*>(s), 9) == 0xCBF43926u);
}
