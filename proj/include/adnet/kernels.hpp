#pragma once

#include <string>

namespace adnet::kernels {

/// Geometry of one cross-correlation-shaped layer application.  Output
/// extents follow out = (in + 2*pad - k)/stride + 1 with zero padding and
/// no filter flip.
struct ConvGeom {
    int batch = 1;
    int c_in = 1;
    int in_h = 1;
    int in_w = 1;
    int c_out = 1;
    int k = 1;
    int stride = 1;
    int pad = 0;
    int out_h = 0;
    int out_w = 0;

    static ConvGeom make(int batch, int c_in, int in_h, int in_w, int c_out, int k, int stride,
                         int pad);
    int pad_h() const { return in_h + 2 * pad; }
    int pad_w() const { return in_w + 2 * pad; }
};

// One implementation of every hot inner loop.  Layouts: activations
// (N, C, H, W), filters (c_out, c_in, k, k), FC weights (in, out), all
// row-major float.  Accumulation is per output element in double, in a
// fixed order (forward: c_in,ki,kj; filter grads: batch,m,n; input grads:
// c_out,ki,kj; FC along the analogous axes), so every implementation of a
// given entry produces bit-identical results.
struct KernelTable {
    const char* name;

    // y(b,t,m,n) = -sum |x - f|   (out-of-bounds x counts as 0)
    void (*adder_forward)(const float* x, const float* filt, float* y, const ConvGeom& g);
    // y = sum x*f (plain cross-correlation)
    void (*conv_forward)(const float* x, const float* filt, float* y, const ConvGeom& g);
    // y = -sum (x-f)^2
    void (*l2_forward)(const float* x, const float* filt, float* y, const ConvGeom& g);

    // df(t,c,i,j) = sum_{b,m,n} dy * (x - f)   (full-precision surrogate)
    void (*adder_grad_filter)(const float* x, const float* filt, const float* dy, float* df,
                              const ConvGeom& g);
    // df = sum dy * sgn(x - f), sgn(0) = 0
    void (*adder_grad_filter_sign)(const float* x, const float* filt, const float* dy, float* df,
                                   const ConvGeom& g);
    // df = sum dy * x (exact)
    void (*conv_grad_filter)(const float* x, const float* filt, const float* dy, float* df,
                             const ConvGeom& g);
    // df = sum dy * 2(x - f): exact gradient of -sum (x-f)^2, i.e. twice the
    // full-precision surrogate.
    void (*l2_grad_filter)(const float* x, const float* filt, const float* dy, float* df,
                           const ConvGeom& g);

    // dx(b,c,p,q) = sum_{t and windows covering (p,q)} dy * HT(f - x),
    // HT = clamp to [-1, 1] (closed at the boundary).
    void (*adder_grad_input)(const float* x, const float* filt, const float* dy, float* dx,
                             const ConvGeom& g);
    // dx = sum dy * f (exact)
    void (*conv_grad_input)(const float* x, const float* filt, const float* dy, float* dx,
                            const ConvGeom& g);
    // dx = sum dy * 2(f - x) (exact)
    void (*l2_grad_input)(const float* x, const float* filt, const float* dy, float* dx,
                          const ConvGeom& g);

    // Fully connected: x (n, in), w (in, out), y/dy (n, out).
    void (*fc_adder_forward)(const float* x, const float* w, float* y, int n, int in_f, int out_f);
    void (*fc_adder_grad_weight)(const float* x, const float* w, const float* dy, float* dw, int n,
                                 int in_f, int out_f);
    void (*fc_adder_grad_weight_sign)(const float* x, const float* w, const float* dy, float* dw,
                                      int n, int in_f, int out_f);
    void (*fc_adder_grad_input)(const float* x, const float* w, const float* dy, float* dx, int n,
                                int in_f, int out_f);
    void (*fc_mul_forward)(const float* x, const float* w, float* y, int n, int in_f, int out_f);
    void (*fc_mul_grad_weight)(const float* x, const float* w, const float* dy, float* dw, int n,
                               int in_f, int out_f);
    void (*fc_mul_grad_input)(const float* x, const float* w, const float* dy, float* dx, int n,
                              int in_f, int out_f);
};

enum class Impl { Scalar, Avx2 };

bool avx2_available();
const KernelTable& kernel_table(Impl impl); // throws if impl not available here

/// Active table: AVX2 when the CPU has it, scalar otherwise; ADNET_KERNEL
/// (scalar|avx2|auto) or set_active_impl overrides.
const KernelTable& active();
Impl active_impl();
void set_active_impl(Impl impl);

std::string impl_name(Impl impl);

} // namespace adnet::kernels
