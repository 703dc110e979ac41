#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adnet/nn_ops.hpp"
#include "adnet/tensor.hpp"
#include "adnet/verify_lab.hpp"

using namespace adnet;
using adnet::kernels::ConvGeom;
namespace vf = adnet::verify;

TEST_CASE("batchnorm: gamma=1 beta=0 on constant input gives zeros") {
    BatchNormState s = BatchNormState::make(2);
    Tensor x = Tensor::full({4, 2, 3, 3}, 7.0f);
    Tensor y = batchnorm_forward(x, s);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(std::fabs(y[i]) < 1e-5);
}

TEST_CASE("batchnorm: gamma=2 beta=3 on already-normalized input is 2x+3") {
    const int n = 5000;
    BatchNormState s = BatchNormState::make(1);
    s.gamma[0] = 2.0f;
    s.beta[0] = 3.0f;
    Tensor x = Tensor::randn({n, 1}, 0.0f, 1.0f, 12);
    // exactly normalize the sample so batch stats are (0, 1)
    const double mu = x.mean();
    const double sd = std::sqrt(x.variance());
    x.map_([&](float v) { return float((v - mu) / sd); });
    Tensor y = batchnorm_forward(x, s);
    for (int64_t i = 0; i < y.size(); ++i)
        CHECK(double(y[i]) == doctest::Approx(2.0 * x[i] + 3.0).epsilon(1e-3));
}

TEST_CASE("batchnorm train mode standardizes each channel") {
    BatchNormState s = BatchNormState::make(3);
    Tensor x = Tensor::randn({8, 3, 4, 4}, 1.0f, 2.5f, 9);
    Tensor y = batchnorm_forward(x, s);
    const int64_t per_channel = 8 * 4 * 4;
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int b = 0; b < 8; ++b)
            for (int i = 0; i < 16; ++i) {
                const double v = y.at(b, c, i / 4, i % 4);
                sum += v;
                sq += v * v;
            }
        const double mean = sum / double(per_channel);
        const double var = sq / double(per_channel) - mean * mean;
        CHECK(std::fabs(mean) < 1e-5);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("batchnorm rejects train batches with one sample per statistic") {
    BatchNormState s = BatchNormState::make(4);
    Tensor x = Tensor::zeros({1, 4});
    CHECK_THROWS(batchnorm_forward(x, s));
    // eval mode is fine with a single sample
    s.mode = BnMode::Eval;
    CHECK_NOTHROW(batchnorm_forward(x, s));
}

TEST_CASE("batchnorm backward needs the forward cache") {
    BatchNormState s = BatchNormState::make(2);
    Tensor dy = Tensor::zeros({4, 2});
    CHECK_THROWS_AS(batchnorm_backward(dy, s), std::runtime_error);
}

TEST_CASE("batchnorm backward: zero dY gives zero gradients, and it is linear in dY") {
    BatchNormState s = BatchNormState::make(2);
    Tensor x = Tensor::randn({6, 2, 2, 2}, 0.0f, 1.5f, 33);
    batchnorm_forward(x, s);

    BatchNormGrads zero = batchnorm_backward(Tensor::zeros({6, 2, 2, 2}), s);
    for (int64_t i = 0; i < zero.d_input.size(); ++i) CHECK(zero.d_input[i] == 0.0f);
    CHECK(zero.d_gamma.l2_norm() == 0.0);
    CHECK(zero.d_beta.l2_norm() == 0.0);

    Tensor dy = Tensor::randn({6, 2, 2, 2}, 0.0f, 1.0f, 34);
    BatchNormGrads g1 = batchnorm_backward(dy, s);
    Tensor dy3 = dy;
    dy3.scale_(3.0f);
    BatchNormGrads g3 = batchnorm_backward(dy3, s);
    for (int64_t i = 0; i < g1.d_input.size(); ++i)
        CHECK(double(g3.d_input[i]) == doctest::Approx(3.0 * g1.d_input[i]).epsilon(1e-5));
    for (int c = 0; c < 2; ++c) {
        CHECK(double(g3.d_gamma[c]) == doctest::Approx(3.0 * g1.d_gamma[c]).epsilon(1e-5));
        CHECK(double(g3.d_beta[c]) == doctest::Approx(3.0 * g1.d_beta[c]).epsilon(1e-5));
    }
}

TEST_CASE("batchnorm backward matches central finite differences") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        vf::ProbeReport r = vf::fd_gradcheck(vf::FdOp::BatchNorm, seed, 1e-5);
        INFO(r.to_text());
        CHECK(r.pass());
    }
}

TEST_CASE("batchnorm running statistics converge to the data statistics") {
    BatchNormState s = BatchNormState::make(1);
    for (int step = 0; step < 200; ++step) {
        Tensor x = Tensor::randn({64, 1}, 2.0f, 3.0f, uint64_t(step));
        batchnorm_forward(x, s);
    }
    CHECK(double(s.running_mean[0]) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(double(s.running_var[0]) == doctest::Approx(9.0).epsilon(0.15));
    // eval mode now roughly standardizes fresh data
    s.mode = BnMode::Eval;
    Tensor x = Tensor::randn({512, 1}, 2.0f, 3.0f, 999);
    Tensor y = batchnorm_forward(x, s);
    CHECK(std::fabs(y.mean()) < 0.2);
    CHECK(y.variance() == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("relu forward/backward") {
    Tensor x({4}, {-1.0f, 2.0f, 0.0f, -0.5f});
    Tensor y = relu_forward(x);
    CHECK(y[0] == 0.0f);
    CHECK(y[1] == 2.0f);
    CHECK(y[2] == 0.0f);
    Tensor dy = Tensor::full({4}, 1.0f);
    Tensor dx = relu_backward(x, dy);
    CHECK(dx[0] == 0.0f);
    CHECK(dx[1] == 1.0f);
    CHECK(dx[2] == 0.0f); // gradient at exactly 0 routes nothing
}

TEST_CASE("maxpool of a constant block keeps the constant and routes to the first element") {
    Tensor x = Tensor::full({1, 1, 2, 2}, 4.25f);
    MaxPoolCache cache = maxpool2_forward(x);
    CHECK(cache.output[0] == 4.25f);
    CHECK(cache.argmax[0] == 0); // first index on ties
    Tensor dy = Tensor::full({1, 1, 1, 1}, 1.0f);
    Tensor dx = maxpool2_backward({1, 1, 2, 2}, cache.argmax, dy);
    CHECK(dx[0] == 1.0f);
    CHECK(dx[1] == 0.0f);
    CHECK(dx[2] == 0.0f);
    CHECK(dx[3] == 0.0f);
}

TEST_CASE("maxpool picks the max and routes gradient to it") {
    Tensor x({1, 1, 2, 4}, {1, 9, 2, 3, 4, 5, 8, 7});
    MaxPoolCache cache = maxpool2_forward(x);
    CHECK(cache.output[0] == 9.0f);
    CHECK(cache.output[1] == 8.0f);
    Tensor dy({1, 1, 1, 2}, {0.5f, 0.25f});
    Tensor dx = maxpool2_backward({1, 1, 2, 4}, cache.argmax, dy);
    CHECK(dx[1] == 0.5f);  // position of 9
    CHECK(dx[6] == 0.25f); // position of 8
    CHECK(dx[0] == 0.0f);
}

TEST_CASE("avgpool forward and backward") {
    Tensor x({1, 1, 2, 2}, {1.0f, 2.0f, 3.0f, 6.0f});
    Tensor y = avgpool2_forward(x);
    CHECK(y[0] == doctest::Approx(3.0));
    Tensor dy = Tensor::full({1, 1, 1, 1}, 1.0f);
    Tensor dx = avgpool2_backward({1, 1, 2, 2}, dy);
    for (int i = 0; i < 4; ++i) CHECK(dx[i] == doctest::Approx(0.25));
}

TEST_CASE("maxpool backward matches finite differences away from ties") {
    // scan seeds until every window's top-2 gap clears the FD step
    Tensor x;
    double margin = 0.0;
    uint64_t seed = 200;
    while (margin < 1e-3) {
        x = Tensor::randn({2, 2, 4, 4}, 0.0f, 1.0f, ++seed);
        margin = 1e9;
        for (int plane = 0; plane < 4; ++plane)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    float v[4] = {x.at(plane / 2, plane % 2, 2 * i, 2 * j),
                                  x.at(plane / 2, plane % 2, 2 * i, 2 * j + 1),
                                  x.at(plane / 2, plane % 2, 2 * i + 1, 2 * j),
                                  x.at(plane / 2, plane % 2, 2 * i + 1, 2 * j + 1)};
                    std::sort(v, v + 4);
                    margin = std::min(margin, double(v[3]) - double(v[2]));
                }
    }
    Tensor dy = Tensor::randn({2, 2, 2, 2}, 0.0f, 1.0f, 999);
    MaxPoolCache cache = maxpool2_forward(x);
    Tensor dx = maxpool2_backward(x.shape(), cache.argmax, dy);

    std::vector<double> xd = vf::tensor_to_double(x);
    const double h = 1e-5;
    for (int64_t e = 0; e < x.size(); ++e) {
        auto loss = [&]() {
            // double maxpool replica
            double total = 0.0;
            for (int plane = 0; plane < 4; ++plane)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        const auto at = [&](int r, int c) {
                            return xd[size_t((plane * 4 + r) * 4 + c)];
                        };
                        const double m = std::max({at(2 * i, 2 * j), at(2 * i, 2 * j + 1),
                                                   at(2 * i + 1, 2 * j), at(2 * i + 1, 2 * j + 1)});
                        total += double(dy[(plane * 2 + i) * 2 + j]) * m;
                    }
            return total;
        };
        const double keep = xd[size_t(e)];
        xd[size_t(e)] = keep + h;
        const double lp = loss();
        xd[size_t(e)] = keep - h;
        const double lm = loss();
        xd[size_t(e)] = keep;
        CHECK((lp - lm) / (2.0 * h) == doctest::Approx(double(dx[e])).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("pooling rejects odd spatial extents") {
    CHECK_THROWS(maxpool2_forward(Tensor::zeros({1, 1, 3, 4})));
    CHECK_THROWS(avgpool2_forward(Tensor::zeros({1, 1, 4, 5})));
}

TEST_CASE("flatten reshapes (N,C,H,W) to (N, CHW)") {
    Tensor x = Tensor::randn({3, 2, 4, 4}, 0.0f, 1.0f, 77);
    Tensor y = flatten(x);
    CHECK(y.shape() == std::vector<int>{3, 32});
    CHECK(y[5] == x[5]);
}

TEST_CASE("l2 adder equals the affine expression in conv output (appendix identity)") {
    vf::ProbeReport r = vf::affine_identity_probe(20, 99);
    INFO(r.to_text());
    CHECK(r.pass());
}

TEST_CASE("l2 adder exact filter gradient is twice the full-precision surrogate") {
    ConvGeom g = vf::random_geometry(4242);
    Tensor x = Tensor::randn({g.batch, g.c_in, g.in_h, g.in_w}, 0.0f, 1.0f, 1);
    Tensor f = Tensor::randn({g.c_out, g.c_in, g.k, g.k}, 0.0f, 1.0f, 2);
    Tensor dy = Tensor::randn({g.batch, g.c_out, g.out_h, g.out_w}, 0.0f, 1.0f, 3);
    AdderLayerParams p{f, g.stride, g.pad};
    Tensor surrogate = adder_backward_filter(x, p, dy);
    GradPair l2 = l2_adder_backward(x, p, dy);
    for (int64_t i = 0; i < surrogate.size(); ++i)
        CHECK(double(l2.d_params[i]) == doctest::Approx(2.0 * surrogate[i]).epsilon(1e-6));
}

TEST_CASE("conv and l2 gradients pass finite differences; the FD harness refuses surrogates") {
    for (uint64_t seed : {10u, 11u}) {
        vf::ProbeReport conv = vf::fd_gradcheck(vf::FdOp::Conv, seed, 1e-5);
        INFO(conv.to_text());
        CHECK(conv.pass());
        vf::ProbeReport l2 = vf::fd_gradcheck(vf::FdOp::L2Adder, seed, 1e-5);
        INFO(l2.to_text());
        CHECK(l2.pass());
    }
    CHECK_THROWS_AS(vf::fd_gradcheck(vf::FdOp::AdderSurrogate, 1, 1e-5), std::invalid_argument);
}
