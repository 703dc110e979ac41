#include <doctest.h>

#include "adnet/op_count.hpp"

using namespace adnet;

TEST_CASE("single conv layer arithmetic: d=3, c_in=2, c_out=4, out 4x4") {
    std::vector<LayerSpec> specs{{LayerKind::Conv, "c", 4, 3, 1, 0, true}};
    Network net(std::move(specs), {2, 6, 6});
    OpCountReport r = count_ops(net);
    CHECK(r.total_mul == 3 * 3 * 2 * 4 * 4 * 4); // 1152
    CHECK(r.total_add == 1152);
}

TEST_CASE("LeNet-5-BN conv backend counts ~435K multiplications per image") {
    Network net = build_lenet5_bn(NetBackend::Conv, true);
    OpCountReport r = count_ops(net);
    // conv1 117600 + conv2 240000 + fc 48000 + 10080 + 840
    CHECK(r.total_mul == 416520);
    CHECK(r.total_add == 416520);
    CHECK(r.total_mul > 435000 * 0.90);
    CHECK(r.total_mul < 435000 * 1.10);
    CHECK(r.total_xnor == 0);
}

TEST_CASE("LeNet-5-BN adder backend counts ~870K additions and zero multiplications") {
    Network net = build_lenet5_bn(NetBackend::Adder, true);
    OpCountReport r = count_ops(net);
    CHECK(r.total_mul == 0);
    CHECK(r.total_add == 2 * 416520);
    CHECK(r.total_add > 870000 * 0.90);
    CHECK(r.total_add < 870000 * 1.10);
}

TEST_CASE("adder additions are exactly twice conv multiplications, layer by layer") {
    Network adder = build_lenet5_bn(NetBackend::Adder, true);
    Network conv = build_lenet5_bn(NetBackend::Conv, true);
    OpCountReport ra = count_ops(adder);
    OpCountReport rc = count_ops(conv);
    REQUIRE(ra.layers.size() == rc.layers.size());
    for (size_t i = 0; i < ra.layers.size(); ++i) {
        if (!ra.layers[i].counted) continue;
        CHECK(ra.layers[i].add == 2 * rc.layers[i].mul);
        CHECK(ra.layers[i].mul == 0);
    }
}

TEST_CASE("l2-adder squares count as multiplications") {
    Network l2 = build_lenet5_bn(NetBackend::L2Adder, true);
    OpCountReport r = count_ops(l2);
    // conv layers: mul like conv, add doubled; FC layers stay plain fc
    CHECK(r.layers[0].mul == 117600);
    CHECK(r.layers[0].add == 2 * 117600);
    CHECK(r.layers[9].kind == std::string("fc"));
}

TEST_CASE("latency model lands near the quoted 1.7M vs 2.6M cycles") {
    LatencyModel model; // mul 4, add 2
    OpCountReport adder = count_ops(build_lenet5_bn(NetBackend::Adder, true));
    OpCountReport conv = count_ops(build_lenet5_bn(NetBackend::Conv, true));
    const double adder_cycles = model_latency(adder, model);
    const double conv_cycles = model_latency(conv, model);
    CHECK(adder_cycles == 2.0 * 2 * 416520); // 1,666,080
    CHECK(conv_cycles == 6.0 * 416520);      // 2,499,120
    CHECK(adder_cycles > 1.7e6 * 0.90);
    CHECK(adder_cycles < 1.7e6 * 1.10);
    CHECK(conv_cycles > 2.6e6 * 0.90);
    CHECK(conv_cycles < 2.6e6 * 1.10);
}

TEST_CASE("an empty report has zero latency") {
    OpCountReport empty;
    CHECK(model_latency(empty, LatencyModel{}) == 0.0);
}

TEST_CASE("convention flags carve out FC, first/last, and BN") {
    Network net = build_lenet5_bn(NetBackend::Conv, true);

    CountConvention no_fc;
    no_fc.include_fc = false;
    CHECK(count_ops(net, no_fc).total_mul == 117600 + 240000);

    CountConvention cifar;
    cifar.include_fc = true;
    cifar.include_first_last = false;
    CHECK(count_ops(net, cifar).total_mul == 416520 - 117600 - 840);

    CountConvention with_bn;
    with_bn.include_bn = true;
    CHECK(count_ops(net, with_bn).total_mul > 416520);

    // the flag state is embedded in the report
    OpCountReport r = count_ops(net, cifar);
    CHECK(r.convention.include_first_last == false);
    CHECK(r.to_text().find("first/last=no") != std::string::npos);
}

TEST_CASE("reports are pure functions of topology and convention") {
    Network net = build_lenet5_bn(NetBackend::Adder, true);
    OpCountReport a = count_ops(net);
    OpCountReport b = count_ops(net);
    CHECK(a.total_add == b.total_add);
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.to_csv().find("conv1,adder-conv,1,0,235200") != std::string::npos);
}
