#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adnet/nn_ops.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

enum class LayerKind {
    AdderConv,
    Conv,
    L2AdderConv,
    BatchNorm,
    ReLU,
    MaxPool2,
    AvgPool2,
    Flatten,
    AdderFc,
    Fc,
};

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
    LayerKind kind;
    std::string name;
    int out_channels = 0; // conv-family / fc
    int kernel = 0;       // conv-family
    int stride = 1;
    int pad = 0;
    bool replaceable = false; // switches with the network backend
};

enum class NetBackend { Adder, Conv, L2Adder };
NetBackend backend_from_string(const std::string& s);
const char* backend_name(NetBackend b);

/// Filter-gradient rule for the adder layers (the sign rule exists for the
/// ablation; the input gradient is always the HardTanh rule).
enum class GradRule { FullPrecision, Sign };

struct NamedParam {
    enum class Class { AdderFilter, Weight, BnScale, BnShift };
    std::string name;
    Tensor* tensor;
    Class cls;
};

using GradMap = std::map<std::string, Tensor>;

class Network {
public:
    struct Layer {
        LayerSpec spec;
        Tensor weights;    // filters (c_out,c_in,k,k) or FC weights (in,out); empty otherwise
        BatchNormState bn; // BatchNorm layers only
        std::vector<int> in_shape;  // per-sample, inferred at build
        std::vector<int> out_shape; // per-sample, inferred at build

        // forward cache (train mode)
        Tensor cached_input;
        std::vector<int64_t> pool_argmax;
    };

    /// input_shape is per-sample (C, H, W); shapes are chained at build time
    /// and re-checked at run time.
    Network(std::vector<LayerSpec> specs, std::vector<int> input_shape);

    Tensor forward(const Tensor& batch, bool train);
    /// Needs a preceding train-mode forward; covers every trainable parameter.
    GradMap backward(const Tensor& d_logits);

    std::vector<NamedParam> parameters(); // stable topology order
    int64_t param_count() const;

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<int>& input_shape() const { return input_shape_; }

    GradRule grad_rule = GradRule::FullPrecision;

private:
    Tensor apply_forward(Layer& layer, const Tensor& input, bool train);

    std::vector<Layer> layers_;
    std::vector<int> input_shape_;
    bool has_forward_cache_ = false;
    Tensor cached_batch_;
};

/// LeNet-5-BN: conv(6,5x5) and conv(16,5x5) blocks as conv->BN->ReLU->maxpool,
/// then 400-120-84-10 fully connected with BN+ReLU after the two hidden FC
/// layers (layer order and the FC BNs are assumptions; adder FC outputs are
/// always <= 0, so a ReLU without normalization in front would zero them).
/// `backend` selects the kind of every replaceable layer; `replace_fc`
/// controls whether the FC layers switch too (the l2adder backend keeps
/// plain FC).  `full_precision_first_last` keeps the first conv and last FC
/// in conv/fc form, the usual binary-network convention.
Network build_lenet5_bn(NetBackend backend, bool replace_fc,
                        bool full_precision_first_last = false);

struct LossGrad {
    double loss;
    Tensor d_logits;
};

/// Mean cross-entropy over the batch with a max-shifted softmax.
LossGrad softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

enum class InitScheme { Normal, FanIn };

/// Deterministic per (scheme, seed).  Normal fills every weight tensor with
/// N(0, stddev^2); FanIn uses std = 1/sqrt(k^2 c_in) per filter bank
/// (1/sqrt(in_features) for FC).  BN parameters reset to gamma=1, beta=0.
void init_params(Network& net, InitScheme scheme, float stddev, uint64_t seed);

} // namespace adnet
