#include "kernels_detail.hpp"

namespace adnet::kernels {

namespace d = detail;

namespace {

void l2_grad_filter_scalar(const float* x, const float* filt, const float* dy, float* df,
                           const ConvGeom& g) {
    d::grad_filter_scalar<d::AdderGradFilter>(x, filt, dy, df, g);
    d::double_in_place(df, int64_t(g.c_out) * g.c_in * g.k * g.k);
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        "scalar",
        d::forward_scalar<d::AdderFwd>,
        d::forward_scalar<d::ConvFwd>,
        d::forward_scalar<d::L2Fwd>,
        d::grad_filter_scalar<d::AdderGradFilter>,
        d::grad_filter_scalar<d::SignGradFilter>,
        d::grad_filter_scalar<d::ConvGradFilter>,
        l2_grad_filter_scalar,
        d::grad_input_scalar<d::AdderGradInput>,
        d::grad_input_scalar<d::ConvGradInput>,
        d::grad_input_scalar<d::L2GradInput>,
        d::fc_forward_scalar<d::FcAdderFwd>,
        d::fc_grad_weight_scalar<d::FcAdderGradWeight>,
        d::fc_grad_weight_scalar<d::FcSignGradWeight>,
        d::fc_grad_input_scalar<d::FcAdderGradInput>,
        d::fc_forward_scalar<d::FcMulFwd>,
        d::fc_grad_weight_scalar<d::FcMulGradWeight>,
        d::fc_grad_input_scalar<d::FcMulGradInput>,
    };
    return table;
}

} // namespace adnet::kernels
