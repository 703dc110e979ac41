// Internal: shared scalar skeletons for the kernel tables.  The SIMD tables
// reuse these for remainder lanes and for the paths they do not vectorize,
// which is what keeps every implementation of an entry bit-identical: the
// per-output-element term order is fixed here and the SIMD variants map
// vector lanes onto independent output elements only.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "adnet/kernels.hpp"
#include "adnet/parallel.hpp"

namespace adnet::kernels::detail {

// Clamp to [-1, 1], closed at the boundary; written to mirror the
// max_pd/min_pd instruction semantics.
inline double hardtanh(double d) {
    double t = d > -1.0 ? d : -1.0;
    return t < 1.0 ? t : 1.0;
}

inline double sign_of(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

// ---- term functors -------------------------------------------------------

struct AdderFwd {
    static double term(double x, double f) { return -std::fabs(x - f); }
};
struct ConvFwd {
    static double term(double x, double f) { return x * f; }
};
struct L2Fwd {
    static double term(double x, double f) {
        double d = x - f;
        return -(d * d);
    }
};

struct AdderGradFilter {
    static double term(double dy, double x, double f) { return dy * (x - f); }
};
struct SignGradFilter {
    static double term(double dy, double x, double f) { return dy * sign_of(x - f); }
};
struct ConvGradFilter {
    static double term(double dy, double x, double) { return dy * x; }
};

struct AdderGradInput {
    static double term(double dy, double f, double x) { return dy * hardtanh(f - x); }
};
struct ConvGradInput {
    static double term(double dy, double f, double) { return dy * f; }
};
struct L2GradInput {
    static double term(double dy, double f, double x) {
        double d = f - x;
        return dy * (d + d);
    }
};

struct FcAdderFwd {
    static double term(double x, double w) { return -std::fabs(x - w); }
};
struct FcMulFwd {
    static double term(double x, double w) { return x * w; }
};
struct FcAdderGradWeight {
    static double term(double dy, double x, double w) { return dy * (x - w); }
};
struct FcSignGradWeight {
    static double term(double dy, double x, double w) { return dy * sign_of(x - w); }
};
struct FcMulGradWeight {
    static double term(double dy, double x, double) { return dy * x; }
};
struct FcAdderGradInput {
    static double term(double dy, double w, double x) { return dy * hardtanh(w - x); }
};
struct FcMulGradInput {
    static double term(double dy, double w, double) { return dy * w; }
};

// ---- padding scratch ------------------------------------------------------

inline std::vector<float> zero_pad_nchw(const float* x, int b, int c, int h, int w, int pad) {
    const int ph = h + 2 * pad, pw = w + 2 * pad;
    std::vector<float> out(size_t(int64_t(b) * c * ph * pw), 0.0f);
    for (int64_t plane = 0; plane < int64_t(b) * c; ++plane) {
        const float* src = x + plane * h * w;
        float* dst = out.data() + plane * ph * pw + int64_t(pad) * pw + pad;
        for (int row = 0; row < h; ++row) {
            for (int col = 0; col < w; ++col) dst[col] = src[col];
            src += w;
            dst += pw;
        }
    }
    return out;
}

inline bool grad_input_fast_ok(const ConvGeom& g) { return g.stride == 1 && g.pad <= g.k - 1; }

// ---- forward --------------------------------------------------------------

template <class Term>
inline float forward_one(const float* xp, const float* fbase, const ConvGeom& g, int ph, int pw,
                         int b, int m, int n) {
    double acc = 0.0;
    for (int c = 0; c < g.c_in; ++c) {
        for (int i = 0; i < g.k; ++i) {
            const float* xrow = xp + ((int64_t(b) * g.c_in + c) * ph + (m * g.stride + i)) * pw +
                                int64_t(n) * g.stride;
            const float* frow = fbase + (int64_t(c) * g.k + i) * g.k;
            for (int j = 0; j < g.k; ++j) acc += Term::term(double(xrow[j]), double(frow[j]));
        }
    }
    return float(acc);
}

template <class Term>
void forward_scalar(const float* x, const float* filt, float* y, const ConvGeom& g) {
    std::vector<float> padded;
    const float* xp = x;
    if (g.pad > 0) {
        padded = zero_pad_nchw(x, g.batch, g.c_in, g.in_h, g.in_w, g.pad);
        xp = padded.data();
    }
    const int ph = g.pad_h(), pw = g.pad_w();
    parallel_for(int64_t(g.batch) * g.c_out, [&](int64_t slice) {
        const int b = int(slice / g.c_out), t = int(slice % g.c_out);
        const float* fbase = filt + int64_t(t) * g.c_in * g.k * g.k;
        float* yrow = y + (int64_t(b) * g.c_out + t) * g.out_h * g.out_w;
        for (int m = 0; m < g.out_h; ++m)
            for (int n = 0; n < g.out_w; ++n)
                yrow[int64_t(m) * g.out_w + n] = forward_one<Term>(xp, fbase, g, ph, pw, b, m, n);
    });
}

// ---- filter gradient -------------------------------------------------------

// Per-filter-element accumulation order is (batch, m, n); the (c, i, j)
// accumulator array is private to the c_out slice.
template <class Term>
void grad_filter_scalar(const float* x, const float* filt, const float* dy, float* df,
                        const ConvGeom& g) {
    std::vector<float> padded;
    const float* xp = x;
    if (g.pad > 0) {
        padded = zero_pad_nchw(x, g.batch, g.c_in, g.in_h, g.in_w, g.pad);
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
                    const double dyv =
                        dy[((int64_t(b) * g.c_out + t) * g.out_h + m) * g.out_w + n];
                    for (int c = 0; c < g.c_in; ++c) {
                        for (int i = 0; i < g.k; ++i) {
                            const float* xrow =
                                xp + ((int64_t(b) * g.c_in + c) * ph + (m * g.stride + i)) * pw +
                                int64_t(n) * g.stride;
                            const float* frow = fbase + (int64_t(c) * g.k + i) * g.k;
                            double* arow = acc.data() + (int64_t(c) * g.k + i) * g.k;
                            for (int j = 0; j < g.k; ++j)
                                arow[j] += Term::term(dyv, double(xrow[j]), double(frow[j]));
                        }
                    }
                }
            }
        }
        for (int64_t e = 0; e < fsz; ++e) df[t * fsz + e] = float(acc[size_t(e)]);
    });
}

// ---- input gradient ---------------------------------------------------------

// stride == 1 fast path: walk a zero-padded dY so each dx element sums its
// (t, i, j) terms without bounds tests; padding contributes dy = 0 terms,
// which leave the accumulator bits unchanged.
template <class Term>
inline float grad_input_fast_one(const float* pdy, const float* filt, const ConvGeom& g, int pdh,
                                 int pdw, int b, int c, int p, int q, double xv) {
    double acc = 0.0;
    for (int t = 0; t < g.c_out; ++t) {
        for (int i = 0; i < g.k; ++i) {
            const float* dyrow =
                pdy + ((int64_t(b) * g.c_out + t) * pdh + (p + g.k - 1 - i)) * pdw + q;
            const float* frow = filt + ((int64_t(t) * g.c_in + c) * g.k + i) * g.k;
            for (int j = 0; j < g.k; ++j)
                acc += Term::term(double(dyrow[g.k - 1 - j]), double(frow[j]), xv);
        }
    }
    return float(acc);
}

template <class Term>
void grad_input_fast_scalar(const float* x, const float* filt, const float* dy, float* dx,
                            const ConvGeom& g) {
    const int L = g.k - 1 - g.pad;
    std::vector<float> pdy = zero_pad_nchw(dy, g.batch, g.c_out, g.out_h, g.out_w, L);
    const int pdh = g.out_h + 2 * L, pdw = g.out_w + 2 * L;
    parallel_for(int64_t(g.batch) * g.c_in, [&](int64_t slice) {
        const int b = int(slice / g.c_in), c = int(slice % g.c_in);
        const float* xplane = x + (int64_t(b) * g.c_in + c) * g.in_h * g.in_w;
        float* dxplane = dx + (int64_t(b) * g.c_in + c) * g.in_h * g.in_w;
        for (int p = 0; p < g.in_h; ++p)
            for (int q = 0; q < g.in_w; ++q)
                dxplane[int64_t(p) * g.in_w + q] =
                    grad_input_fast_one<Term>(pdy.data(), filt, g, pdh, pdw, b, c, p, q,
                                              double(xplane[int64_t(p) * g.in_w + q]));
    });
}

template <class Term>
void grad_input_generic_scalar(const float* x, const float* filt, const float* dy, float* dx,
                               const ConvGeom& g) {
    parallel_for(int64_t(g.batch) * g.c_in, [&](int64_t slice) {
        const int b = int(slice / g.c_in), c = int(slice % g.c_in);
        const float* xplane = x + (int64_t(b) * g.c_in + c) * g.in_h * g.in_w;
        float* dxplane = dx + (int64_t(b) * g.c_in + c) * g.in_h * g.in_w;
        for (int p = 0; p < g.in_h; ++p) {
            for (int q = 0; q < g.in_w; ++q) {
                const double xv = xplane[int64_t(p) * g.in_w + q];
                double acc = 0.0;
                for (int t = 0; t < g.c_out; ++t) {
                    for (int i = 0; i < g.k; ++i) {
                        const int mnum = p + g.pad - i;
                        if (mnum < 0 || mnum % g.stride) continue;
                        const int m = mnum / g.stride;
                        if (m >= g.out_h) continue;
                        for (int j = 0; j < g.k; ++j) {
                            const int nnum = q + g.pad - j;
                            if (nnum < 0 || nnum % g.stride) continue;
                            const int n = nnum / g.stride;
                            if (n >= g.out_w) continue;
                            const double dyv =
                                dy[((int64_t(b) * g.c_out + t) * g.out_h + m) * g.out_w + n];
                            const double fv = filt[((int64_t(t) * g.c_in + c) * g.k + i) * g.k + j];
                            acc += Term::term(dyv, fv, xv);
                        }
                    }
                }
                dxplane[int64_t(p) * g.in_w + q] = float(acc);
            }
        }
    });
}

template <class Term>
void grad_input_scalar(const float* x, const float* filt, const float* dy, float* dx,
                       const ConvGeom& g) {
    if (grad_input_fast_ok(g))
        grad_input_fast_scalar<Term>(x, filt, dy, dx, g);
    else
        grad_input_generic_scalar<Term>(x, filt, dy, dx, g);
}

// ---- fully connected --------------------------------------------------------

template <class Term>
void fc_forward_scalar(const float* x, const float* w, float* y, int n, int in_f, int out_f) {
    parallel_for(n, [&](int64_t b) {
        const float* xrow = x + b * in_f;
        float* yrow = y + b * out_f;
        for (int o = 0; o < out_f; ++o) {
            double acc = 0.0;
            for (int f = 0; f < in_f; ++f)
                acc += Term::term(double(xrow[f]), double(w[int64_t(f) * out_f + o]));
            yrow[o] = float(acc);
        }
    });
}

template <class Term>
void fc_grad_weight_scalar(const float* x, const float* w, const float* dy, float* dw, int n,
                           int in_f, int out_f) {
    parallel_for(in_f, [&](int64_t f) {
        const float* wrow = w + f * out_f;
        float* dwrow = dw + f * out_f;
        std::vector<double> acc(size_t(out_f), 0.0);
        for (int b = 0; b < n; ++b) {
            const double xv = x[int64_t(b) * in_f + f];
            const float* dyrow = dy + int64_t(b) * out_f;
            for (int o = 0; o < out_f; ++o)
                acc[size_t(o)] += Term::term(double(dyrow[o]), xv, double(wrow[o]));
        }
        for (int o = 0; o < out_f; ++o) dwrow[o] = float(acc[size_t(o)]);
    });
}

template <class Term>
void fc_grad_input_scalar(const float* x, const float* w, const float* dy, float* dx, int n,
                          int in_f, int out_f) {
    parallel_for(n, [&](int64_t b) {
        const float* xrow = x + b * in_f;
        const float* dyrow = dy + b * out_f;
        float* dxrow = dx + b * in_f;
        for (int f = 0; f < in_f; ++f) {
            const double xv = xrow[f];
            const float* wrow = w + int64_t(f) * out_f;
            double acc = 0.0;
            for (int o = 0; o < out_f; ++o) acc += Term::term(double(dyrow[o]), double(wrow[o]), xv);
            dxrow[f] = float(acc);
        }
    });
}

// Exact doubling of the stored float commutes with the final rounding, so
// scaling after the fact equals using a 2(x-f) term.
inline void double_in_place(float* data, int64_t count) {
    for (int64_t i = 0; i < count; ++i) data[i] *= 2.0f;
}

} // namespace adnet::kernels::detail
