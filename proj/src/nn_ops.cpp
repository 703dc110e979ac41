#include "adnet/nn_ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "adnet/kernels.hpp"
#include "adnet/parallel.hpp"

namespace adnet {

namespace {

using kernels::ConvGeom;

ConvGeom geom_for(const Tensor& x, const Tensor& filters, int stride, int pad, const char* what) {
    if (x.ndim() != 4) throw std::invalid_argument(std::string(what) + ": activation must be 4-d");
    if (filters.ndim() != 4)
        throw std::invalid_argument(std::string(what) + ": filters must be (c_out, c_in, k, k)");
    if (filters.dim(2) != filters.dim(3))
        throw std::invalid_argument(std::string(what) + ": only square kernels supported");
    if (filters.dim(1) != x.dim(1))
        throw std::invalid_argument(std::string(what) + ": filter c_in " +
                                    std::to_string(filters.dim(1)) + " does not match input channels " +
                                    std::to_string(x.dim(1)));
    return ConvGeom::make(x.dim(0), x.dim(1), x.dim(2), x.dim(3), filters.dim(0), filters.dim(2),
                          stride, pad);
}

void check_dy(const Tensor& dy, const ConvGeom& g, const char* what) {
    if (dy.ndim() != 4 || dy.dim(0) != g.batch || dy.dim(1) != g.c_out || dy.dim(2) != g.out_h ||
        dy.dim(3) != g.out_w)
        throw std::invalid_argument(std::string(what) + ": dY shape " + dy.shape_str() +
                                    " does not match forward output");
}

} // namespace

Tensor adder_forward(const Tensor& x, const AdderLayerParams& p) {
    ConvGeom g = geom_for(x, p.filters, p.stride, p.pad, "adder_forward");
    x.validate_finite("adder_forward input");
    p.filters.validate_finite("adder_forward filters");
    Tensor y({g.batch, g.c_out, g.out_h, g.out_w});
    kernels::active().adder_forward(x.data(), p.filters.data(), y.data(), g);
    y.validate_finite("adder_forward output");
    return y;
}

Tensor adder_backward_filter(const Tensor& x, const AdderLayerParams& p, const Tensor& dy) {
    ConvGeom g = geom_for(x, p.filters, p.stride, p.pad, "adder_backward_filter");
    check_dy(dy, g, "adder_backward_filter");
    Tensor df(p.filters.shape());
    kernels::active().adder_grad_filter(x.data(), p.filters.data(), dy.data(), df.data(), g);
    df.validate_finite("adder_backward_filter output");
    return df;
}

Tensor adder_backward_filter_sign(const Tensor& x, const AdderLayerParams& p, const Tensor& dy) {
    ConvGeom g = geom_for(x, p.filters, p.stride, p.pad, "adder_backward_filter_sign");
    check_dy(dy, g, "adder_backward_filter_sign");
    Tensor df(p.filters.shape());
    kernels::active().adder_grad_filter_sign(x.data(), p.filters.data(), dy.data(), df.data(), g);
    df.validate_finite("adder_backward_filter_sign output");
    return df;
}

Tensor adder_backward_input(const Tensor& x, const AdderLayerParams& p, const Tensor& dy) {
    ConvGeom g = geom_for(x, p.filters, p.stride, p.pad, "adder_backward_input");
    check_dy(dy, g, "adder_backward_input");
    Tensor dx(x.shape());
    kernels::active().adder_grad_input(x.data(), p.filters.data(), dy.data(), dx.data(), g);
    dx.validate_finite("adder_backward_input output");
    return dx;
}

Tensor conv_forward(const Tensor& x, const ConvLayerParams& p) {
    ConvGeom g = geom_for(x, p.filters, p.stride, p.pad, "conv_forward");
    x.validate_finite("conv_forward input");
    p.filters.validate_finite("conv_forward filters");
    Tensor y({g.batch, g.c_out, g.out_h, g.out_w});
    kernels::active().conv_forward(x.data(), p.filters.data(), y.data(), g);
    y.validate_finite("conv_forward output");
    return y;
}

GradPair conv_backward(const Tensor& x, const ConvLayerParams& p, const Tensor& dy) {
    ConvGeom g = geom_for(x, p.filters, p.stride, p.pad, "conv_backward");
    check_dy(dy, g, "conv_backward");
    GradPair out{Tensor(x.shape()), Tensor(p.filters.shape())};
    kernels::active().conv_grad_filter(x.data(), p.filters.data(), dy.data(), out.d_params.data(), g);
    kernels::active().conv_grad_input(x.data(), p.filters.data(), dy.data(), out.d_input.data(), g);
    out.d_params.validate_finite("conv_backward filter gradient");
    out.d_input.validate_finite("conv_backward input gradient");
    return out;
}

Tensor l2_adder_forward(const Tensor& x, const AdderLayerParams& p) {
    ConvGeom g = geom_for(x, p.filters, p.stride, p.pad, "l2_adder_forward");
    x.validate_finite("l2_adder_forward input");
    p.filters.validate_finite("l2_adder_forward filters");
    Tensor y({g.batch, g.c_out, g.out_h, g.out_w});
    kernels::active().l2_forward(x.data(), p.filters.data(), y.data(), g);
    y.validate_finite("l2_adder_forward output");
    return y;
}

GradPair l2_adder_backward(const Tensor& x, const AdderLayerParams& p, const Tensor& dy) {
    ConvGeom g = geom_for(x, p.filters, p.stride, p.pad, "l2_adder_backward");
    check_dy(dy, g, "l2_adder_backward");
    GradPair out{Tensor(x.shape()), Tensor(p.filters.shape())};
    kernels::active().l2_grad_filter(x.data(), p.filters.data(), dy.data(), out.d_params.data(), g);
    kernels::active().l2_grad_input(x.data(), p.filters.data(), dy.data(), out.d_input.data(), g);
    out.d_params.validate_finite("l2_adder_backward filter gradient");
    out.d_input.validate_finite("l2_adder_backward input gradient");
    return out;
}

// ---- batch normalization ----------------------------------------------------

BatchNormState BatchNormState::make(int channels) {
    BatchNormState s;
    s.gamma = Tensor::full({channels}, 1.0f);
    s.beta = Tensor::zeros({channels});
    s.running_mean = Tensor::zeros({channels});
    s.running_var = Tensor::full({channels}, 1.0f);
    return s;
}

namespace {

struct BnDims {
    int n, c;
    int64_t spatial;
};

BnDims bn_dims(const Tensor& x, const BatchNormState& s, const char* what) {
    if (x.ndim() != 2 && x.ndim() != 4)
        throw std::invalid_argument(std::string(what) + ": expected (N, C) or (N, C, H, W)");
    BnDims d{x.dim(0), x.dim(1), 1};
    if (x.ndim() == 4) d.spatial = int64_t(x.dim(2)) * x.dim(3);
    if (d.c != s.gamma.dim(0))
        throw std::invalid_argument(std::string(what) + ": channel count " + std::to_string(d.c) +
                                    " does not match state " + std::to_string(s.gamma.dim(0)));
    return d;
}

} // namespace

Tensor batchnorm_forward(const Tensor& x, BatchNormState& s) {
    BnDims d = bn_dims(x, s, "batchnorm_forward");
    x.validate_finite("batchnorm_forward input");
    const int64_t m = int64_t(d.n) * d.spatial;
    Tensor y(x.shape());

    if (s.mode == BnMode::Train) {
        if (m < 2)
            throw std::invalid_argument(
                "batchnorm_forward: train mode needs at least 2 samples per channel statistic");
        s.batch_mean.assign(size_t(d.c), 0.0);
        s.batch_sigma.assign(size_t(d.c), 0.0);
        std::vector<double> batch_var(size_t(d.c), 0.0);
        parallel_for(d.c, [&](int64_t c) {
            double sum = 0.0;
            for (int b = 0; b < d.n; ++b) {
                const float* p = x.data() + (int64_t(b) * d.c + c) * d.spatial;
                for (int64_t i = 0; i < d.spatial; ++i) sum += p[i];
            }
            const double mu = sum / double(m);
            double sq = 0.0;
            for (int b = 0; b < d.n; ++b) {
                const float* p = x.data() + (int64_t(b) * d.c + c) * d.spatial;
                for (int64_t i = 0; i < d.spatial; ++i) sq += (p[i] - mu) * (p[i] - mu);
            }
            const double var = sq / double(m);
            const double sigma = std::sqrt(var + double(s.eps));
            s.batch_mean[size_t(c)] = mu;
            s.batch_sigma[size_t(c)] = sigma;
            batch_var[size_t(c)] = var;
            const double g = s.gamma[c], bshift = s.beta[c];
            for (int b = 0; b < d.n; ++b) {
                const float* p = x.data() + (int64_t(b) * d.c + c) * d.spatial;
                float* q = y.data() + (int64_t(b) * d.c + c) * d.spatial;
                for (int64_t i = 0; i < d.spatial; ++i)
                    q[i] = float(g * ((p[i] - mu) / sigma) + bshift);
            }
        });
        for (int c = 0; c < d.c; ++c) {
            const double unbiased = batch_var[size_t(c)] * double(m) / double(m - 1);
            s.running_mean[c] = float((1.0 - s.momentum) * s.running_mean[c] +
                                      s.momentum * s.batch_mean[size_t(c)]);
            s.running_var[c] =
                float((1.0 - s.momentum) * s.running_var[c] + s.momentum * unbiased);
        }
        s.cached_input = x;
        s.has_cache = true;
    } else {
        parallel_for(d.c, [&](int64_t c) {
            const double mu = s.running_mean[c];
            const double sigma = std::sqrt(double(s.running_var[c]) + double(s.eps));
            const double g = s.gamma[c], bshift = s.beta[c];
            for (int b = 0; b < d.n; ++b) {
                const float* p = x.data() + (int64_t(b) * d.c + c) * d.spatial;
                float* q = y.data() + (int64_t(b) * d.c + c) * d.spatial;
                for (int64_t i = 0; i < d.spatial; ++i)
                    q[i] = float(g * ((p[i] - mu) / sigma) + bshift);
            }
        });
    }
    y.validate_finite("batchnorm_forward output");
    return y;
}

BatchNormGrads batchnorm_backward(const Tensor& dy, BatchNormState& s) {
    if (!s.has_cache)
        throw std::runtime_error("batchnorm_backward: no cached train-mode forward statistics");
    const Tensor& x = s.cached_input;
    if (!dy.same_shape(x))
        throw std::invalid_argument("batchnorm_backward: dY shape " + dy.shape_str() +
                                    " does not match cached input " + x.shape_str());
    BnDims d = bn_dims(x, s, "batchnorm_backward");
    const int64_t m = int64_t(d.n) * d.spatial;

    BatchNormGrads out{Tensor(x.shape()), Tensor({d.c}), Tensor({d.c})};
    parallel_for(d.c, [&](int64_t c) {
        const double mu = s.batch_mean[size_t(c)];
        const double sigma = s.batch_sigma[size_t(c)];
        const double g = s.gamma[c];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int b = 0; b < d.n; ++b) {
            const float* px = x.data() + (int64_t(b) * d.c + c) * d.spatial;
            const float* pdy = dy.data() + (int64_t(b) * d.c + c) * d.spatial;
            for (int64_t i = 0; i < d.spatial; ++i) {
                const double xhat = (px[i] - mu) / sigma;
                sum_dy += pdy[i];
                sum_dy_xhat += pdy[i] * xhat;
            }
        }
        out.d_gamma[c] = float(sum_dy_xhat);
        out.d_beta[c] = float(sum_dy);
        const double mean_dy = sum_dy / double(m);
        const double mean_dy_xhat = sum_dy_xhat / double(m);
        for (int b = 0; b < d.n; ++b) {
            const float* px = x.data() + (int64_t(b) * d.c + c) * d.spatial;
            const float* pdy = dy.data() + (int64_t(b) * d.c + c) * d.spatial;
            float* pdx = out.d_input.data() + (int64_t(b) * d.c + c) * d.spatial;
            for (int64_t i = 0; i < d.spatial; ++i) {
                const double xhat = (px[i] - mu) / sigma;
                pdx[i] = float((g / sigma) * (pdy[i] - mean_dy - xhat * mean_dy_xhat));
            }
        }
    });
    out.d_input.validate_finite("batchnorm_backward input gradient");
    return out;
}

// ---- activations / pooling ---------------------------------------------------

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    y.map_([](float v) { return v > 0.0f ? v : 0.0f; });
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    if (!x.same_shape(dy))
        throw std::invalid_argument("relu_backward: shape mismatch " + x.shape_str() + " vs " +
                                    dy.shape_str());
    Tensor dx(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
    return dx;
}

namespace {

void check_pool_input(const Tensor& x, const char* what) {
    if (x.ndim() != 4) throw std::invalid_argument(std::string(what) + ": expected 4-d input");
    if (x.dim(2) % 2 || x.dim(3) % 2)
        throw std::invalid_argument(std::string(what) + ": spatial extents must be even, got " +
                                    x.shape_str());
}

} // namespace

MaxPoolCache maxpool2_forward(const Tensor& x) {
    check_pool_input(x, "maxpool2_forward");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    MaxPoolCache cache{Tensor({n, c, h / 2, w / 2}), {}};
    cache.argmax.resize(size_t(cache.output.size()));
    for (int64_t plane = 0; plane < int64_t(n) * c; ++plane) {
        const float* src = x.data() + plane * h * w;
        float* dst = cache.output.data() + plane * (h / 2) * (w / 2);
        int64_t* arg = cache.argmax.data() + plane * (h / 2) * (w / 2);
        for (int i = 0; i < h / 2; ++i) {
            for (int j = 0; j < w / 2; ++j) {
                // strictly-greater comparison keeps the first index on ties
                int64_t best = int64_t(2 * i) * w + 2 * j;
                float best_v = src[best];
                const int64_t cand[3] = {int64_t(2 * i) * w + 2 * j + 1,
                                         int64_t(2 * i + 1) * w + 2 * j,
                                         int64_t(2 * i + 1) * w + 2 * j + 1};
                for (int64_t idx : cand) {
                    if (src[idx] > best_v) {
                        best_v = src[idx];
                        best = idx;
                    }
                }
                dst[int64_t(i) * (w / 2) + j] = best_v;
                arg[int64_t(i) * (w / 2) + j] = plane * h * w + best;
            }
        }
    }
    return cache;
}

Tensor maxpool2_backward(const std::vector<int>& input_shape, const std::vector<int64_t>& argmax,
                         const Tensor& dy) {
    if (argmax.size() != size_t(dy.size()))
        throw std::invalid_argument("maxpool2_backward: argmax/dY size mismatch");
    Tensor dx = Tensor::zeros(input_shape);
    for (int64_t i = 0; i < dy.size(); ++i) dx[argmax[size_t(i)]] += dy[i];
    return dx;
}

Tensor avgpool2_forward(const Tensor& x) {
    check_pool_input(x, "avgpool2_forward");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({n, c, h / 2, w / 2});
    for (int64_t plane = 0; plane < int64_t(n) * c; ++plane) {
        const float* src = x.data() + plane * h * w;
        float* dst = y.data() + plane * (h / 2) * (w / 2);
        for (int i = 0; i < h / 2; ++i)
            for (int j = 0; j < w / 2; ++j)
                dst[int64_t(i) * (w / 2) + j] =
                    0.25f * (src[int64_t(2 * i) * w + 2 * j] + src[int64_t(2 * i) * w + 2 * j + 1] +
                             src[int64_t(2 * i + 1) * w + 2 * j] +
                             src[int64_t(2 * i + 1) * w + 2 * j + 1]);
    }
    return y;
}

Tensor avgpool2_backward(const std::vector<int>& input_shape, const Tensor& dy) {
    Tensor dx = Tensor::zeros(input_shape);
    const int h = input_shape[2], w = input_shape[3];
    if (dy.size() * 4 != dx.size())
        throw std::invalid_argument("avgpool2_backward: dY does not match input shape");
    for (int64_t plane = 0; plane < int64_t(input_shape[0]) * input_shape[1]; ++plane) {
        const float* src = dy.data() + plane * (h / 2) * (w / 2);
        float* dst = dx.data() + plane * h * w;
        for (int i = 0; i < h / 2; ++i) {
            for (int j = 0; j < w / 2; ++j) {
                const float v = 0.25f * src[int64_t(i) * (w / 2) + j];
                dst[int64_t(2 * i) * w + 2 * j] = v;
                dst[int64_t(2 * i) * w + 2 * j + 1] = v;
                dst[int64_t(2 * i + 1) * w + 2 * j] = v;
                dst[int64_t(2 * i + 1) * w + 2 * j + 1] = v;
            }
        }
    }
    return dx;
}

Tensor flatten(const Tensor& x) {
    if (x.ndim() != 4) throw std::invalid_argument("flatten: expected 4-d input");
    return x.reshaped({x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
}

// ---- fully connected ---------------------------------------------------------

namespace {

void check_fc(const Tensor& x, const Tensor& w, const char* what) {
    if (x.ndim() != 2 || w.ndim() != 2)
        throw std::invalid_argument(std::string(what) + ": expected x (N, in) and w (in, out)");
    if (x.dim(1) != w.dim(0))
        throw std::invalid_argument(std::string(what) + ": in-feature mismatch " + x.shape_str() +
                                    " vs " + w.shape_str());
}

void check_fc_dy(const Tensor& dy, const Tensor& x, const Tensor& w, const char* what) {
    if (dy.ndim() != 2 || dy.dim(0) != x.dim(0) || dy.dim(1) != w.dim(1))
        throw std::invalid_argument(std::string(what) + ": dY shape " + dy.shape_str() +
                                    " does not match forward output");
}

} // namespace

Tensor adder_fc_forward(const Tensor& x, const Tensor& w) {
    check_fc(x, w, "adder_fc_forward");
    x.validate_finite("adder_fc_forward input");
    Tensor y({x.dim(0), w.dim(1)});
    kernels::active().fc_adder_forward(x.data(), w.data(), y.data(), x.dim(0), x.dim(1), w.dim(1));
    y.validate_finite("adder_fc_forward output");
    return y;
}

FcGrads adder_fc_backward(const Tensor& x, const Tensor& w, const Tensor& dy) {
    check_fc(x, w, "adder_fc_backward");
    check_fc_dy(dy, x, w, "adder_fc_backward");
    FcGrads out{Tensor(x.shape()), Tensor(w.shape())};
    kernels::active().fc_adder_grad_weight(x.data(), w.data(), dy.data(), out.d_weights.data(),
                                           x.dim(0), x.dim(1), w.dim(1));
    kernels::active().fc_adder_grad_input(x.data(), w.data(), dy.data(), out.d_input.data(),
                                          x.dim(0), x.dim(1), w.dim(1));
    out.d_weights.validate_finite("adder_fc_backward weight gradient");
    out.d_input.validate_finite("adder_fc_backward input gradient");
    return out;
}

Tensor adder_fc_backward_input(const Tensor& x, const Tensor& w, const Tensor& dy) {
    check_fc(x, w, "adder_fc_backward_input");
    check_fc_dy(dy, x, w, "adder_fc_backward_input");
    Tensor dx(x.shape());
    kernels::active().fc_adder_grad_input(x.data(), w.data(), dy.data(), dx.data(), x.dim(0),
                                          x.dim(1), w.dim(1));
    dx.validate_finite("adder_fc_backward_input output");
    return dx;
}

Tensor adder_fc_backward_weight_sign(const Tensor& x, const Tensor& w, const Tensor& dy) {
    check_fc(x, w, "adder_fc_backward_weight_sign");
    check_fc_dy(dy, x, w, "adder_fc_backward_weight_sign");
    Tensor dw(w.shape());
    kernels::active().fc_adder_grad_weight_sign(x.data(), w.data(), dy.data(), dw.data(), x.dim(0),
                                                x.dim(1), w.dim(1));
    dw.validate_finite("adder_fc_backward_weight_sign output");
    return dw;
}

Tensor fc_forward(const Tensor& x, const Tensor& w) {
    check_fc(x, w, "fc_forward");
    x.validate_finite("fc_forward input");
    Tensor y({x.dim(0), w.dim(1)});
    kernels::active().fc_mul_forward(x.data(), w.data(), y.data(), x.dim(0), x.dim(1), w.dim(1));
    y.validate_finite("fc_forward output");
    return y;
}

FcGrads fc_backward(const Tensor& x, const Tensor& w, const Tensor& dy) {
    check_fc(x, w, "fc_backward");
    check_fc_dy(dy, x, w, "fc_backward");
    FcGrads out{Tensor(x.shape()), Tensor(w.shape())};
    kernels::active().fc_mul_grad_weight(x.data(), w.data(), dy.data(), out.d_weights.data(),
                                         x.dim(0), x.dim(1), w.dim(1));
    kernels::active().fc_mul_grad_input(x.data(), w.data(), dy.data(), out.d_input.data(), x.dim(0),
                                        x.dim(1), w.dim(1));
    out.d_weights.validate_finite("fc_backward weight gradient");
    out.d_input.validate_finite("fc_backward input gradient");
    return out;
}

} // namespace adnet
