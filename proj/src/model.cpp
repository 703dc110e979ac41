#include "adnet/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace adnet {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::AdderConv: return "adder-conv";
    case LayerKind::Conv: return "conv";
    case LayerKind::L2AdderConv: return "l2-adder-conv";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool2: return "maxpool";
    case LayerKind::AvgPool2: return "avgpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::AdderFc: return "adder-fc";
    case LayerKind::Fc: return "fc";
    }
    return "?";
}

NetBackend backend_from_string(const std::string& s) {
    if (s == "adder") return NetBackend::Adder;
    if (s == "conv") return NetBackend::Conv;
    if (s == "l2adder") return NetBackend::L2Adder;
    throw std::invalid_argument("unknown backend '" + s + "' (adder|conv|l2adder)");
}

const char* backend_name(NetBackend b) {
    switch (b) {
    case NetBackend::Adder: return "adder";
    case NetBackend::Conv: return "conv";
    case NetBackend::L2Adder: return "l2adder";
    }
    return "?";
}

namespace {

bool is_conv_family(LayerKind k) {
    return k == LayerKind::AdderConv || k == LayerKind::Conv || k == LayerKind::L2AdderConv;
}
bool is_fc_family(LayerKind k) { return k == LayerKind::AdderFc || k == LayerKind::Fc; }

std::vector<int> infer_out_shape(const LayerSpec& spec, const std::vector<int>& in,
                                 const std::string& net_pos) {
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("layer '" + spec.name + "' (" + net_pos + "): " + why);
    };
    if (is_conv_family(spec.kind)) {
        if (in.size() != 3) fail("expects (C,H,W) input");
        const int oh = (in[1] + 2 * spec.pad - spec.kernel) / spec.stride + 1;
        const int ow = (in[2] + 2 * spec.pad - spec.kernel) / spec.stride + 1;
        if (in[1] + 2 * spec.pad < spec.kernel || in[2] + 2 * spec.pad < spec.kernel || oh < 1 ||
            ow < 1)
            fail("filter does not fit input " + std::to_string(in[1]) + "x" + std::to_string(in[2]));
        return {spec.out_channels, oh, ow};
    }
    switch (spec.kind) {
    case LayerKind::BatchNorm:
    case LayerKind::ReLU:
        return in;
    case LayerKind::MaxPool2:
    case LayerKind::AvgPool2:
        if (in.size() != 3) fail("expects (C,H,W) input");
        if (in[1] % 2 || in[2] % 2) fail("pooling needs even spatial extents");
        return {in[0], in[1] / 2, in[2] / 2};
    case LayerKind::Flatten: {
        int features = 1;
        for (int e : in) features *= e;
        return {features};
    }
    case LayerKind::AdderFc:
    case LayerKind::Fc:
        if (in.size() != 1) fail("expects flattened (features) input");
        return {spec.out_channels};
    default:
        fail("unknown layer kind");
    }
    return {};
}

} // namespace

Network::Network(std::vector<LayerSpec> specs, std::vector<int> input_shape)
    : input_shape_(std::move(input_shape)) {
    if (input_shape_.size() != 3)
        throw std::invalid_argument("network input shape must be (C, H, W)");
    std::set<std::string> names;
    std::vector<int> shape = input_shape_;
    layers_.reserve(specs.size());
    for (size_t li = 0; li < specs.size(); ++li) {
        LayerSpec& spec = specs[li];
        if (spec.name.empty()) spec.name = std::string(layer_kind_name(spec.kind)) + std::to_string(li);
        if (!names.insert(spec.name).second)
            throw std::invalid_argument("duplicate layer name '" + spec.name + "'");
        Layer layer;
        layer.spec = spec;
        layer.in_shape = shape;
        layer.out_shape = infer_out_shape(spec, shape, "position " + std::to_string(li));
        if (is_conv_family(spec.kind))
            layer.weights = Tensor::zeros({spec.out_channels, shape[0], spec.kernel, spec.kernel});
        else if (is_fc_family(spec.kind))
            layer.weights = Tensor::zeros({shape[0], spec.out_channels});
        else if (spec.kind == LayerKind::BatchNorm)
            layer.bn = BatchNormState::make(shape[0]);
        shape = layer.out_shape;
        layers_.push_back(std::move(layer));
    }
}

Tensor Network::forward(const Tensor& batch, bool train) {
    if (batch.ndim() != 4 || batch.dim(1) != input_shape_[0] || batch.dim(2) != input_shape_[1] ||
        batch.dim(3) != input_shape_[2])
        throw std::invalid_argument("forward: batch shape " + batch.shape_str() +
                                    " does not match network input (N, " +
                                    std::to_string(input_shape_[0]) + ", " +
                                    std::to_string(input_shape_[1]) + ", " +
                                    std::to_string(input_shape_[2]) + ")");
    const int n = batch.dim(0);
    Tensor x = batch;
    for (Layer& layer : layers_) {
        if (train) layer.cached_input = x;
        try {
            x = apply_forward(layer, x, train);
        } catch (const std::exception& e) {
            throw std::runtime_error("layer '" + layer.spec.name + "': " + e.what());
        }
        // runtime shape must equal the build-time inference
        std::vector<int> expect = layer.out_shape;
        expect.insert(expect.begin(), n);
        if (x.shape() != expect)
            throw std::logic_error("layer '" + layer.spec.name + "' produced " + x.shape_str() +
                                   ", inferred " + Tensor::zeros(expect).shape_str());
    }
    if (train) {
        has_forward_cache_ = true;
        cached_batch_ = batch;
    }
    return x;
}

Tensor Network::apply_forward(Layer& layer, const Tensor& input, bool train) {
    Tensor x = input;
    switch (layer.spec.kind) {
        case LayerKind::AdderConv: {
            AdderLayerParams p{layer.weights, layer.spec.stride, layer.spec.pad};
            x = adder_forward(x, p);
            break;
        }
        case LayerKind::Conv: {
            ConvLayerParams p{layer.weights, layer.spec.stride, layer.spec.pad};
            x = conv_forward(x, p);
            break;
        }
        case LayerKind::L2AdderConv: {
            AdderLayerParams p{layer.weights, layer.spec.stride, layer.spec.pad};
            x = l2_adder_forward(x, p);
            break;
        }
        case LayerKind::BatchNorm:
            layer.bn.mode = train ? BnMode::Train : BnMode::Eval;
            x = batchnorm_forward(x, layer.bn);
            break;
        case LayerKind::ReLU:
            x = relu_forward(x);
            break;
        case LayerKind::MaxPool2: {
            MaxPoolCache cache = maxpool2_forward(x);
            if (train) layer.pool_argmax = std::move(cache.argmax);
            x = std::move(cache.output);
            break;
        }
        case LayerKind::AvgPool2:
            x = avgpool2_forward(x);
            break;
        case LayerKind::Flatten:
            x = flatten(x);
            break;
        case LayerKind::AdderFc:
            x = adder_fc_forward(x, layer.weights);
            break;
        case LayerKind::Fc:
            x = fc_forward(x, layer.weights);
            break;
    }
    return x;
}

GradMap Network::backward(const Tensor& d_logits) {
    if (!has_forward_cache_)
        throw std::runtime_error("backward called without a preceding train-mode forward");
    GradMap grads;
    Tensor g = d_logits;
    const bool sign_rule = grad_rule == GradRule::Sign;
    for (size_t li = layers_.size(); li-- > 0;) {
        Layer& layer = layers_[li];
        const bool first = li == 0; // input gradient of the first layer is never consumed
        switch (layer.spec.kind) {
        case LayerKind::AdderConv: {
            AdderLayerParams p{layer.weights, layer.spec.stride, layer.spec.pad};
            grads[layer.spec.name + ".filters"] =
                sign_rule ? adder_backward_filter_sign(layer.cached_input, p, g)
                          : adder_backward_filter(layer.cached_input, p, g);
            if (!first) g = adder_backward_input(layer.cached_input, p, g);
            break;
        }
        case LayerKind::Conv: {
            ConvLayerParams p{layer.weights, layer.spec.stride, layer.spec.pad};
            GradPair gp = conv_backward(layer.cached_input, p, g);
            grads[layer.spec.name + ".filters"] = std::move(gp.d_params);
            if (!first) g = std::move(gp.d_input);
            break;
        }
        case LayerKind::L2AdderConv: {
            AdderLayerParams p{layer.weights, layer.spec.stride, layer.spec.pad};
            GradPair gp = l2_adder_backward(layer.cached_input, p, g);
            grads[layer.spec.name + ".filters"] = std::move(gp.d_params);
            if (!first) g = std::move(gp.d_input);
            break;
        }
        case LayerKind::BatchNorm: {
            BatchNormGrads bg = batchnorm_backward(g, layer.bn);
            grads[layer.spec.name + ".gamma"] = std::move(bg.d_gamma);
            grads[layer.spec.name + ".beta"] = std::move(bg.d_beta);
            g = std::move(bg.d_input);
            break;
        }
        case LayerKind::ReLU:
            g = relu_backward(layer.cached_input, g);
            break;
        case LayerKind::MaxPool2:
            g = maxpool2_backward(layer.cached_input.shape(), layer.pool_argmax, g);
            break;
        case LayerKind::AvgPool2:
            g = avgpool2_backward(layer.cached_input.shape(), g);
            break;
        case LayerKind::Flatten:
            g = g.reshaped(layer.cached_input.shape());
            break;
        case LayerKind::AdderFc: {
            if (sign_rule)
                grads[layer.spec.name + ".weights"] =
                    adder_fc_backward_weight_sign(layer.cached_input, layer.weights, g);
            else
                grads[layer.spec.name + ".weights"] =
                    adder_fc_backward(layer.cached_input, layer.weights, g).d_weights;
            if (!first) g = adder_fc_backward_input(layer.cached_input, layer.weights, g);
            break;
        }
        case LayerKind::Fc: {
            FcGrads fg = fc_backward(layer.cached_input, layer.weights, g);
            grads[layer.spec.name + ".weights"] = std::move(fg.d_weights);
            if (!first) g = std::move(fg.d_input);
            break;
        }
        }
    }
    return grads;
}

std::vector<NamedParam> Network::parameters() {
    std::vector<NamedParam> params;
    for (Layer& layer : layers_) {
        switch (layer.spec.kind) {
        case LayerKind::AdderConv:
        case LayerKind::L2AdderConv:
            params.push_back({layer.spec.name + ".filters", &layer.weights,
                              NamedParam::Class::AdderFilter});
            break;
        case LayerKind::Conv:
            params.push_back({layer.spec.name + ".filters", &layer.weights,
                              NamedParam::Class::Weight});
            break;
        case LayerKind::AdderFc:
            params.push_back({layer.spec.name + ".weights", &layer.weights,
                              NamedParam::Class::AdderFilter});
            break;
        case LayerKind::Fc:
            params.push_back({layer.spec.name + ".weights", &layer.weights,
                              NamedParam::Class::Weight});
            break;
        case LayerKind::BatchNorm:
            params.push_back({layer.spec.name + ".gamma", &layer.bn.gamma,
                              NamedParam::Class::BnScale});
            params.push_back({layer.spec.name + ".beta", &layer.bn.beta,
                              NamedParam::Class::BnShift});
            break;
        default:
            break;
        }
    }
    return params;
}

int64_t Network::param_count() const {
    int64_t count = 0;
    for (const Layer& layer : layers_) {
        count += layer.weights.size();
        if (layer.spec.kind == LayerKind::BatchNorm)
            count += layer.bn.gamma.size() + layer.bn.beta.size();
    }
    return count;
}

Network build_lenet5_bn(NetBackend backend, bool replace_fc, bool full_precision_first_last) {
    const LayerKind conv_kind = backend == NetBackend::Adder   ? LayerKind::AdderConv
                                : backend == NetBackend::Conv ? LayerKind::Conv
                                                              : LayerKind::L2AdderConv;
    // No l2 FC form exists; the l2adder backend keeps plain FC layers.
    const LayerKind fc_kind =
        (replace_fc && backend == NetBackend::Adder) ? LayerKind::AdderFc : LayerKind::Fc;

    std::vector<LayerSpec> specs;
    auto conv = [&](const std::string& name, int out, bool is_first) {
        LayerKind kind = (is_first && full_precision_first_last) ? LayerKind::Conv : conv_kind;
        bool repl = !(is_first && full_precision_first_last);
        specs.push_back({kind, name, out, 5, 1, 0, repl});
    };
    auto fc = [&](const std::string& name, int out, bool is_last) {
        LayerKind kind = (is_last && full_precision_first_last) ? LayerKind::Fc : fc_kind;
        bool repl = replace_fc && !(is_last && full_precision_first_last);
        specs.push_back({kind, name, out, 0, 1, 0, repl});
    };

    conv("conv1", 6, true);
    specs.push_back({LayerKind::BatchNorm, "bn1", 0, 0, 1, 0, false});
    specs.push_back({LayerKind::ReLU, "relu1", 0, 0, 1, 0, false});
    specs.push_back({LayerKind::MaxPool2, "pool1", 0, 0, 1, 0, false});
    conv("conv2", 16, false);
    specs.push_back({LayerKind::BatchNorm, "bn2", 0, 0, 1, 0, false});
    specs.push_back({LayerKind::ReLU, "relu2", 0, 0, 1, 0, false});
    specs.push_back({LayerKind::MaxPool2, "pool2", 0, 0, 1, 0, false});
    specs.push_back({LayerKind::Flatten, "flatten", 0, 0, 1, 0, false});
    fc("fc1", 120, false);
    specs.push_back({LayerKind::BatchNorm, "bn3", 0, 0, 1, 0, false});
    specs.push_back({LayerKind::ReLU, "relu3", 0, 0, 1, 0, false});
    fc("fc2", 84, false);
    specs.push_back({LayerKind::BatchNorm, "bn4", 0, 0, 1, 0, false});
    specs.push_back({LayerKind::ReLU, "relu4", 0, 0, 1, 0, false});
    fc("fc3", 10, true);

    return Network(std::move(specs), {1, 32, 32});
}

LossGrad softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2)
        throw std::invalid_argument("softmax_cross_entropy: logits must be (N, classes)");
    const int n = logits.dim(0), classes = logits.dim(1);
    if (int(labels.size()) != n)
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    Tensor d({n, classes});
    double loss = 0.0;
    for (int b = 0; b < n; ++b) {
        if (labels[size_t(b)] < 0 || labels[size_t(b)] >= classes)
            throw std::invalid_argument("softmax_cross_entropy: label " +
                                        std::to_string(labels[size_t(b)]) + " out of range [0, " +
                                        std::to_string(classes) + ")");
        const float* row = logits.data() + int64_t(b) * classes;
        double mx = row[0];
        for (int c = 1; c < classes; ++c) mx = std::max(mx, double(row[c]));
        double denom = 0.0;
        for (int c = 0; c < classes; ++c) denom += std::exp(double(row[c]) - mx);
        const double log_denom = std::log(denom);
        loss += log_denom - (double(row[labels[size_t(b)]]) - mx);
        for (int c = 0; c < classes; ++c) {
            const double p = std::exp(double(row[c]) - mx) / denom;
            const double onehot = c == labels[size_t(b)] ? 1.0 : 0.0;
            d[int64_t(b) * classes + c] = float((p - onehot) / double(n));
        }
    }
    return {loss / double(n), std::move(d)};
}

void init_params(Network& net, InitScheme scheme, float stddev, uint64_t seed) {
    uint64_t idx = 0;
    for (Network::Layer& layer : net.layers()) {
        if (layer.spec.kind == LayerKind::BatchNorm) {
            layer.bn = BatchNormState::make(layer.bn.gamma.dim(0));
            continue;
        }
        if (layer.weights.empty()) continue;
        float sd = stddev;
        if (scheme == InitScheme::FanIn) {
            const int64_t fan_in = layer.weights.ndim() == 4
                                       ? int64_t(layer.weights.dim(1)) * layer.weights.dim(2) *
                                             layer.weights.dim(3)
                                       : layer.weights.dim(0);
            sd = float(1.0 / std::sqrt(double(fan_in)));
        }
        layer.weights = Tensor::randn(layer.weights.shape(), 0.0f, sd, mix64(seed, idx));
        ++idx;
    }
}

} // namespace adnet
