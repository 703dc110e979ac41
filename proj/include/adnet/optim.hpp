#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "adnet/model.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

enum class LrMode { None, ALR, ILR };
LrMode lr_mode_from_string(const std::string& s);

/// NAG with weight decay and the adaptive per-layer rate for adder filters.
struct OptimizerState {
    double gamma0 = 0.1;       // initial global rate, cosine-annealed per epoch
    int total_epochs = 1;
    double current_lr = 0.1;   // gamma for the current epoch
    double eta = 0.1;          // adder local-rate hyper-parameter
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LrMode lr_mode = LrMode::ALR;
    double ilr_factor = 100.0; // constant multiplier in ILR mode
    std::map<std::string, Tensor> velocity;
    int64_t step_count = 0;
};

/// alpha_l = eta*sqrt(k) / max(||grad||_2, 1e-12), k = element count.  For
/// any nonzero gradient, ||alpha_l * grad||_2 = eta*sqrt(k).
double adaptive_local_lr(const Tensor& grad, double eta);

/// gamma(t) = 0.5 * gamma0 * (1 + cos(pi * t / total)), no restarts.
double cosine_lr(int epoch, int total_epochs, double gamma0);

/// Sets current_lr from the schedule; call once per epoch.
void begin_epoch(OptimizerState& opt, int epoch);

/// One update over every parameter.  Adder-filter gradients get alpha_l
/// (computed from the raw gradient, before weight decay and momentum) or the
/// ILR constant; weight decay applies to weight tensors only (never BN) and
/// is added after the alpha scaling, at the global rate; Nesterov form
/// v <- mu*v + g, p <- p - lr*(g + mu*v).  `alpha_out`, when given, receives
/// the per-layer alpha values used this step.
void sgd_step(OptimizerState& opt, Network& net, const GradMap& grads,
              std::map<std::string, double>* alpha_out = nullptr);

} // namespace adnet
