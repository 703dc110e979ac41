#include "adnet/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace adnet {

LrMode lr_mode_from_string(const std::string& s) {
    if (s == "none") return LrMode::None;
    if (s == "alr") return LrMode::ALR;
    if (s == "ilr") return LrMode::ILR;
    throw std::invalid_argument("unknown lr_mode '" + s + "' (none|alr|ilr)");
}

double adaptive_local_lr(const Tensor& grad, double eta) {
    constexpr double kFloor = 1e-12;
    const double norm = grad.l2_norm();
    return eta * std::sqrt(double(grad.size())) / std::max(norm, kFloor);
}

double cosine_lr(int epoch, int total_epochs, double gamma0) {
    if (total_epochs < 1) throw std::invalid_argument("cosine_lr: total_epochs must be >= 1");
    return 0.5 * gamma0 * (1.0 + std::cos(std::numbers::pi * double(epoch) / double(total_epochs)));
}

void begin_epoch(OptimizerState& opt, int epoch) {
    opt.current_lr = cosine_lr(epoch, opt.total_epochs, opt.gamma0);
}

void sgd_step(OptimizerState& opt, Network& net, const GradMap& grads,
              std::map<std::string, double>* alpha_out) {
    const float lr = float(opt.current_lr);
    const float mu = float(opt.momentum);
    const float wd = float(opt.weight_decay);
    for (NamedParam& param : net.parameters()) {
        auto it = grads.find(param.name);
        if (it == grads.end())
            throw std::invalid_argument("sgd_step: missing gradient for parameter '" + param.name +
                                        "'");
        const Tensor& g_raw = it->second;
        if (!g_raw.same_shape(*param.tensor))
            throw std::invalid_argument("sgd_step: gradient shape mismatch for '" + param.name +
                                        "'");

        float alpha = 1.0f;
        if (param.cls == NamedParam::Class::AdderFilter) {
            if (opt.lr_mode == LrMode::ALR)
                alpha = float(adaptive_local_lr(g_raw, opt.eta));
            else if (opt.lr_mode == LrMode::ILR)
                alpha = float(opt.ilr_factor);
            if (alpha_out) (*alpha_out)[param.name] = alpha;
        }
        const bool decay = param.cls == NamedParam::Class::AdderFilter ||
                           param.cls == NamedParam::Class::Weight;

        // alpha scales the raw gradient only; decay enters afterwards at the
        // global rate.  Folding decay in before the scaling is unstable: a
        // small raw gradient makes alpha large and the amplified decay term
        // overshoots the weights into oscillating divergence.
        Tensor g = g_raw;
        if (alpha != 1.0f) g.scale_(alpha);
        if (decay && wd != 0.0f) {
            const Tensor& p = *param.tensor;
            for (int64_t i = 0; i < g.size(); ++i) g[i] += wd * p[i];
        }

        Tensor& v = opt.velocity.try_emplace(param.name, Tensor::zeros(g.shape())).first->second;
        Tensor& p = *param.tensor;
        if (mu != 0.0f) {
            for (int64_t i = 0; i < g.size(); ++i) {
                v[i] = mu * v[i] + g[i];
                p[i] -= lr * (g[i] + mu * v[i]);
            }
        } else {
            for (int64_t i = 0; i < g.size(); ++i) p[i] -= lr * g[i];
        }
        p.validate_finite(param.name.c_str());
    }
    ++opt.step_count;
}

} // namespace adnet
