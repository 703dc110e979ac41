#pragma once

#include <cstdint>
#include <vector>

#include "adnet/tensor.hpp"

namespace adnet {

// Filter banks are stored (c_out, c_in, k, k); activations (N, C, H, W).
// Zero padding, cross-correlation orientation (no filter flip).

struct AdderLayerParams {
    Tensor filters;
    int stride = 1;
    int pad = 0;
};

struct ConvLayerParams {
    Tensor filters;
    int stride = 1;
    int pad = 0;
};

struct GradPair {
    Tensor d_input;
    Tensor d_params;
};

/// y(b,t,m,n) = -sum_{c,i,j} |x(b,c,m*s+i-pad,n*s+j-pad) - f(t,c,i,j)|,
/// out-of-bounds x reads as 0.  Every output element is <= 0.
Tensor adder_forward(const Tensor& x, const AdderLayerParams& p);

/// Full-precision surrogate df = sum dy * (x - f).  This is not the true
/// subgradient of the forward; the sign rule below is.
Tensor adder_backward_filter(const Tensor& x, const AdderLayerParams& p, const Tensor& dy);
/// df = sum dy * sgn(x - f) with sgn(0) = 0.
Tensor adder_backward_filter_sign(const Tensor& x, const AdderLayerParams& p, const Tensor& dy);
/// dx = sum dy * HT(f - x); HT clamps to [-1, 1], closed at the boundary.
Tensor adder_backward_input(const Tensor& x, const AdderLayerParams& p, const Tensor& dy);

Tensor conv_forward(const Tensor& x, const ConvLayerParams& p);
GradPair conv_backward(const Tensor& x, const ConvLayerParams& p, const Tensor& dy);

/// y = -sum (x - f)^2.  Smooth, so the backward below is the exact gradient:
/// d/df[-(x-f)^2] = 2(x-f), twice the full-precision surrogate, and
/// d/dx = 2(f-x).
Tensor l2_adder_forward(const Tensor& x, const AdderLayerParams& p);
GradPair l2_adder_backward(const Tensor& x, const AdderLayerParams& p, const Tensor& dy);

// ---- batch normalization ----------------------------------------------------

enum class BnMode { Train, Eval };

struct BatchNormState {
    Tensor gamma, beta;              // (C)
    Tensor running_mean, running_var; // (C); running_var uses the unbiased batch variance
    float eps = 1e-5f;
    float momentum = 0.1f; // running = (1-momentum)*running + momentum*batch
    BnMode mode = BnMode::Train;

    // Cache from the most recent train-mode forward.
    bool has_cache = false;
    Tensor cached_input;
    std::vector<double> batch_mean, batch_sigma; // sigma = sqrt(biased var + eps)

    static BatchNormState make(int channels);
};

/// Normalizes over all dims except dim 1 (channels).  Accepts (N, C) or
/// (N, C, H, W).  Train mode uses mini-batch statistics and updates the
/// running averages; eval mode uses the running statistics.  Rejects train
/// batches with a single element per channel.
Tensor batchnorm_forward(const Tensor& x, BatchNormState& s);

struct BatchNormGrads {
    Tensor d_input, d_gamma, d_beta;
};

/// Analytic input gradient through the batch statistics:
/// dx = (gamma/sigma) * (dy - mean(dy) - xhat * mean(dy*xhat)), with
/// dgamma = sum dy*xhat and dbeta = sum dy.  Requires the train-forward cache.
BatchNormGrads batchnorm_backward(const Tensor& dy, BatchNormState& s);

// ---- activations / pooling / reshape ----------------------------------------

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// 2x2 pooling with stride 2; spatial extents must be even.
struct MaxPoolCache {
    Tensor output;
    std::vector<int64_t> argmax; // flat input index per output element; ties -> first in scan order
};
MaxPoolCache maxpool2_forward(const Tensor& x);
Tensor maxpool2_backward(const std::vector<int>& input_shape, const std::vector<int64_t>& argmax,
                         const Tensor& dy);
Tensor avgpool2_forward(const Tensor& x);
Tensor avgpool2_backward(const std::vector<int>& input_shape, const Tensor& dy);

Tensor flatten(const Tensor& x); // (N,C,H,W) -> (N, C*H*W)

// ---- fully connected ---------------------------------------------------------

// x (N, in), w (in, out): the k = 1 specialization of the layers above.
Tensor adder_fc_forward(const Tensor& x, const Tensor& w);

struct FcGrads {
    Tensor d_input, d_weights;
};

FcGrads adder_fc_backward(const Tensor& x, const Tensor& w, const Tensor& dy);
Tensor adder_fc_backward_weight_sign(const Tensor& x, const Tensor& w, const Tensor& dy);
Tensor adder_fc_backward_input(const Tensor& x, const Tensor& w, const Tensor& dy);
Tensor fc_forward(const Tensor& x, const Tensor& w);
FcGrads fc_backward(const Tensor& x, const Tensor& w, const Tensor& dy);

} // namespace adnet
