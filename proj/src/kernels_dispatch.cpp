#include "adnet/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "kernels_tables.hpp"

namespace adnet::kernels {

ConvGeom ConvGeom::make(int batch, int c_in, int in_h, int in_w, int c_out, int k, int stride,
                        int pad) {
    if (batch < 1 || c_in < 1 || in_h < 1 || in_w < 1 || c_out < 1 || k < 1)
        throw std::invalid_argument("conv geometry extents must be positive");
    if (stride < 1 || pad < 0) throw std::invalid_argument("invalid stride/padding");
    ConvGeom g{batch, c_in, in_h, in_w, c_out, k, stride, pad, 0, 0};
    g.out_h = (in_h + 2 * pad - k) / stride + 1;
    g.out_w = (in_w + 2 * pad - k) / stride + 1;
    if (in_h + 2 * pad < k || in_w + 2 * pad < k || g.out_h < 1 || g.out_w < 1)
        throw std::invalid_argument("filter does not fit the padded input");
    return g;
}

bool avx2_available() {
#if defined(ADNET_HAVE_AVX2)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable& kernel_table(Impl impl) {
    switch (impl) {
    case Impl::Scalar:
        return scalar_table();
    case Impl::Avx2:
#if defined(ADNET_HAVE_AVX2)
        if (avx2_available()) return avx2_table();
#endif
        throw std::runtime_error("avx2 kernels not available on this machine");
    }
    throw std::logic_error("unknown kernel impl");
}

namespace {

Impl initial_impl() {
    if (const char* env = std::getenv("ADNET_KERNEL")) {
        if (std::strcmp(env, "scalar") == 0) return Impl::Scalar;
        if (std::strcmp(env, "avx2") == 0) return Impl::Avx2; // fails loudly later if absent
        // anything else (incl. "auto") falls through to detection
    }
    return avx2_available() ? Impl::Avx2 : Impl::Scalar;
}

Impl g_impl = initial_impl();

} // namespace

const KernelTable& active() { return kernel_table(g_impl); }

Impl active_impl() { return g_impl; }

void set_active_impl(Impl impl) {
    kernel_table(impl); // validate availability
    g_impl = impl;
}

std::string impl_name(Impl impl) { return impl == Impl::Scalar ? "scalar" : "avx2"; }

} // namespace adnet::kernels
