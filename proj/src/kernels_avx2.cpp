// AVX2 variants.  Four double lanes map onto four independent output
// elements (output columns for forward/input-grad, filter columns for
// filter-grad, output features for FC); the reduction axis is never
// vectorized, so each lane repeats the scalar accumulation order exactly
// and results are bit-identical to the scalar table.
#include <immintrin.h>

#include "kernels_detail.hpp"
#include "kernels_tables.hpp"

namespace adnet::kernels {

namespace d = detail;

namespace {

inline __m256d load4(const float* p) { return _mm256_cvtps_pd(_mm_loadu_ps(p)); }
inline void store4(float* p, __m256d v) { _mm_storeu_ps(p, _mm256_cvtpd_ps(v)); }
inline __m256d negv(__m256d v) { return _mm256_xor_pd(v, _mm256_set1_pd(-0.0)); }
inline __m256d absv(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }
inline __m256d hardtanhv(__m256d v) {
    return _mm256_min_pd(_mm256_max_pd(v, _mm256_set1_pd(-1.0)), _mm256_set1_pd(1.0));
}
inline __m256d signv(__m256d v) {
    const __m256d zero = _mm256_setzero_pd();
    __m256d pos = _mm256_and_pd(_mm256_cmp_pd(v, zero, _CMP_GT_OQ), _mm256_set1_pd(1.0));
    __m256d neg = _mm256_and_pd(_mm256_cmp_pd(v, zero, _CMP_LT_OQ), _mm256_set1_pd(-1.0));
    return _mm256_or_pd(pos, neg);
}

struct AdderFwdV : d::AdderFwd {
    static __m256d termv(__m256d x, __m256d f) { return negv(absv(_mm256_sub_pd(x, f))); }
};
struct ConvFwdV : d::ConvFwd {
    static __m256d termv(__m256d x, __m256d f) { return _mm256_mul_pd(x, f); }
};
struct L2FwdV : d::L2Fwd {
    static __m256d termv(__m256d x, __m256d f) {
        __m256d diff = _mm256_sub_pd(x, f);
        return negv(_mm256_mul_pd(diff, diff));
    }
};
struct AdderGradFilterV : d::AdderGradFilter {
    static __m256d termv(__m256d dy, __m256d x, __m256d f) {
        return _mm256_mul_pd(dy, _mm256_sub_pd(x, f));
    }
};
struct SignGradFilterV : d::SignGradFilter {
    static __m256d termv(__m256d dy, __m256d x, __m256d f) {
        return _mm256_mul_pd(dy, signv(_mm256_sub_pd(x, f)));
    }
};
struct ConvGradFilterV : d::ConvGradFilter {
    static __m256d termv(__m256d dy, __m256d x, __m256d) { return _mm256_mul_pd(dy, x); }
};
struct AdderGradInputV : d::AdderGradInput {
    static __m256d termv(__m256d dy, __m256d f, __m256d x) {
        return _mm256_mul_pd(dy, hardtanhv(_mm256_sub_pd(f, x)));
    }
};
struct ConvGradInputV : d::ConvGradInput {
    static __m256d termv(__m256d dy, __m256d f, __m256d) { return _mm256_mul_pd(dy, f); }
};
struct L2GradInputV : d::L2GradInput {
    static __m256d termv(__m256d dy, __m256d f, __m256d x) {
        __m256d diff = _mm256_sub_pd(f, x);
        return _mm256_mul_pd(dy, _mm256_add_pd(diff, diff));
    }
};
struct FcAdderFwdV : d::FcAdderFwd {
    static __m256d termv(__m256d x, __m256d w) { return negv(absv(_mm256_sub_pd(x, w))); }
};
struct FcMulFwdV : d::FcMulFwd {
    static __m256d termv(__m256d x, __m256d w) { return _mm256_mul_pd(x, w); }
};
struct FcAdderGradWeightV : d::FcAdderGradWeight {
    static __m256d termv(__m256d dy, __m256d x, __m256d w) {
        return _mm256_mul_pd(dy, _mm256_sub_pd(x, w));
    }
};
struct FcSignGradWeightV : d::FcSignGradWeight {
    static __m256d termv(__m256d dy, __m256d x, __m256d w) {
        return _mm256_mul_pd(dy, signv(_mm256_sub_pd(x, w)));
    }
};
struct FcMulGradWeightV : d::FcMulGradWeight {
    static __m256d termv(__m256d dy, __m256d x, __m256d) { return _mm256_mul_pd(dy, x); }
};

// ---- conv-family forward: lanes over output columns (stride 1 only) ----

template <class TermV>
void forward_avx2(const float* x, const float* filt, float* y, const ConvGeom& g) {
    if (g.stride != 1) {
        d::forward_scalar<TermV>(x, filt, y, g);
        return;
    }
    std::vector<float> padded;
    const float* xp = x;
    if (g.pad > 0) {
        padded = d::zero_pad_nchw(x, g.batch, g.c_in, g.in_h, g.in_w, g.pad);
        xp = padded.data();
    }
    const int ph = g.pad_h(), pw = g.pad_w();
    parallel_for(int64_t(g.batch) * g.c_out, [&](int64_t slice) {
        const int b = int(slice / g.c_out), t = int(slice % g.c_out);
        const float* fbase = filt + int64_t(t) * g.c_in * g.k * g.k;
        float* yrow = y + (int64_t(b) * g.c_out + t) * g.out_h * g.out_w;
        for (int m = 0; m < g.out_h; ++m) {
            int n = 0;
            for (; n + 4 <= g.out_w; n += 4) {
                __m256d acc = _mm256_setzero_pd();
                for (int c = 0; c < g.c_in; ++c) {
                    for (int i = 0; i < g.k; ++i) {
                        const float* xrow =
                            xp + ((int64_t(b) * g.c_in + c) * ph + (m + i)) * pw + n;
                        const float* frow = fbase + (int64_t(c) * g.k + i) * g.k;
                        for (int j = 0; j < g.k; ++j)
                            acc = _mm256_add_pd(
                                acc, TermV::termv(load4(xrow + j), _mm256_set1_pd(double(frow[j]))));
                    }
                }
                store4(yrow + int64_t(m) * g.out_w + n, acc);
            }
            for (; n < g.out_w; ++n)
                yrow[int64_t(m) * g.out_w + n] = d::forward_one<TermV>(xp, fbase, g, ph, pw, b, m, n);
        }
    });
}

// ---- filter gradient: lanes over filter columns (any stride) ----

template <class TermV>
void grad_filter_avx2(const float* x, const float* filt, const float* dy, float* df,
                      const ConvGeom& g) {
    std::vector<float> padded;
    const float* xp = x;
    if (g.pad > 0) {
        padded = d::zero_pad_nchw(x, g.batch, g.c_in, g.in_h, g.in_w, g.pad);
        xp = padded.data();
    }
    const int ph = g.pad_h(), pw = g.pad_w();
    const int64_t fsz = int64_t(g.c_in) * g.k * g.k;
    parallel_for(g.c_out, [&](int64_t t) {
        std::vector<double> acc(size_t(fsz), 0.0);
        const float* fbase = filt + t * fsz;
        for (int b = 0; b < g.batch; ++b) {
            for (int m = 0; m < g.out_h; ++m) {
                for (int n = 0; n < g.out_w; ++n) {
                    const double dys =
                        dy[((int64_t(b) * g.c_out + t) * g.out_h + m) * g.out_w + n];
                    const __m256d dyv = _mm256_set1_pd(dys);
                    for (int c = 0; c < g.c_in; ++c) {
                        for (int i = 0; i < g.k; ++i) {
                            const float* xrow =
                                xp + ((int64_t(b) * g.c_in + c) * ph + (m * g.stride + i)) * pw +
                                int64_t(n) * g.stride;
                            const float* frow = fbase + (int64_t(c) * g.k + i) * g.k;
                            double* arow = acc.data() + (int64_t(c) * g.k + i) * g.k;
                            int j = 0;
                            for (; j + 4 <= g.k; j += 4)
                                _mm256_storeu_pd(
                                    arow + j,
                                    _mm256_add_pd(_mm256_loadu_pd(arow + j),
                                                  TermV::termv(dyv, load4(xrow + j), load4(frow + j))));
                            for (; j < g.k; ++j)
                                arow[j] += TermV::term(dys, double(xrow[j]), double(frow[j]));
                        }
                    }
                }
            }
        }
        for (int64_t e = 0; e < fsz; ++e) df[t * fsz + e] = float(acc[size_t(e)]);
    });
}

void l2_grad_filter_avx2(const float* x, const float* filt, const float* dy, float* df,
                         const ConvGeom& g) {
    grad_filter_avx2<AdderGradFilterV>(x, filt, dy, df, g);
    d::double_in_place(df, int64_t(g.c_out) * g.c_in * g.k * g.k);
}

// ---- input gradient: lanes over input columns (stride-1 fast path) ----

template <class TermV>
void grad_input_avx2(const float* x, const float* filt, const float* dy, float* dx,
                     const ConvGeom& g) {
    if (!d::grad_input_fast_ok(g)) {
        d::grad_input_generic_scalar<TermV>(x, filt, dy, dx, g);
        return;
    }
    const int L = g.k - 1 - g.pad;
    std::vector<float> pdy = d::zero_pad_nchw(dy, g.batch, g.c_out, g.out_h, g.out_w, L);
    const int pdh = g.out_h + 2 * L, pdw = g.out_w + 2 * L;
    parallel_for(int64_t(g.batch) * g.c_in, [&](int64_t slice) {
        const int b = int(slice / g.c_in), c = int(slice % g.c_in);
        const float* xplane = x + (int64_t(b) * g.c_in + c) * g.in_h * g.in_w;
        float* dxplane = dx + (int64_t(b) * g.c_in + c) * g.in_h * g.in_w;
        for (int p = 0; p < g.in_h; ++p) {
            int q = 0;
            for (; q + 4 <= g.in_w; q += 4) {
                const __m256d xv = load4(xplane + int64_t(p) * g.in_w + q);
                __m256d acc = _mm256_setzero_pd();
                for (int t = 0; t < g.c_out; ++t) {
                    for (int i = 0; i < g.k; ++i) {
                        const float* dyrow =
                            pdy.data() +
                            ((int64_t(b) * g.c_out + t) * pdh + (p + g.k - 1 - i)) * pdw + q;
                        const float* frow = filt + ((int64_t(t) * g.c_in + c) * g.k + i) * g.k;
                        for (int j = 0; j < g.k; ++j)
                            acc = _mm256_add_pd(acc,
                                                TermV::termv(load4(dyrow + (g.k - 1 - j)),
                                                             _mm256_set1_pd(double(frow[j])), xv));
                    }
                }
                store4(dxplane + int64_t(p) * g.in_w + q, acc);
            }
            for (; q < g.in_w; ++q)
                dxplane[int64_t(p) * g.in_w + q] =
                    d::grad_input_fast_one<TermV>(pdy.data(), filt, g, pdh, pdw, b, c, p, q,
                                                  double(xplane[int64_t(p) * g.in_w + q]));
        }
    });
}

// ---- fully connected: lanes over output features ----

template <class TermV>
void fc_forward_avx2(const float* x, const float* w, float* y, int n, int in_f, int out_f) {
    parallel_for(n, [&](int64_t b) {
        const float* xrow = x + b * in_f;
        float* yrow = y + b * out_f;
        int o = 0;
        for (; o + 4 <= out_f; o += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (int f = 0; f < in_f; ++f)
                acc = _mm256_add_pd(acc, TermV::termv(_mm256_set1_pd(double(xrow[f])),
                                                      load4(w + int64_t(f) * out_f + o)));
            store4(yrow + o, acc);
        }
        for (; o < out_f; ++o) {
            double acc = 0.0;
            for (int f = 0; f < in_f; ++f)
                acc += TermV::term(double(xrow[f]), double(w[int64_t(f) * out_f + o]));
            yrow[o] = float(acc);
        }
    });
}

template <class TermV>
void fc_grad_weight_avx2(const float* x, const float* w, const float* dy, float* dw, int n,
                         int in_f, int out_f) {
    parallel_for(in_f, [&](int64_t f) {
        const float* wrow = w + f * out_f;
        float* dwrow = dw + f * out_f;
        std::vector<double> acc(size_t(out_f), 0.0);
        for (int b = 0; b < n; ++b) {
            const double xs = x[int64_t(b) * in_f + f];
            const __m256d xv = _mm256_set1_pd(xs);
            const float* dyrow = dy + int64_t(b) * out_f;
            int o = 0;
            for (; o + 4 <= out_f; o += 4)
                _mm256_storeu_pd(acc.data() + o,
                                 _mm256_add_pd(_mm256_loadu_pd(acc.data() + o),
                                               TermV::termv(load4(dyrow + o), xv, load4(wrow + o))));
            for (; o < out_f; ++o)
                acc[size_t(o)] += TermV::term(double(dyrow[o]), xs, double(wrow[o]));
        }
        for (int o = 0; o < out_f; ++o) dwrow[o] = float(acc[size_t(o)]);
    });
}

} // namespace

const KernelTable& avx2_table() {
    static const KernelTable table = {
        "avx2",
        forward_avx2<AdderFwdV>,
        forward_avx2<ConvFwdV>,
        forward_avx2<L2FwdV>,
        grad_filter_avx2<AdderGradFilterV>,
        grad_filter_avx2<SignGradFilterV>,
        grad_filter_avx2<ConvGradFilterV>,
        l2_grad_filter_avx2,
        grad_input_avx2<AdderGradInputV>,
        grad_input_avx2<ConvGradInputV>,
        grad_input_avx2<L2GradInputV>,
        fc_forward_avx2<FcAdderFwdV>,
        fc_grad_weight_avx2<FcAdderGradWeightV>,
        fc_grad_weight_avx2<FcSignGradWeightV>,
        d::fc_grad_input_scalar<d::FcAdderGradInput>,
        fc_forward_avx2<FcMulFwdV>,
        fc_grad_weight_avx2<FcMulGradWeightV>,
        d::fc_grad_input_scalar<d::FcMulGradInput>,
    };
    return table;
}

} // namespace adnet::kernels
