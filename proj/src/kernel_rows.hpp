#pragma once

// Per-row kernel bodies shared by the serial and OpenMP drivers. Each body
// writes a disjoint slice of the output, which is what lets the parallel
// driver hand rows to threads without changing summation order.

#include "mgsgan/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace mgsgan::kernels::rows {

inline void matmul_row(const double* a, const double* b, double* c, std::size_t row,
                       std::size_t k, std::size_t n) {
    double* out = c + row * n;
    std::fill(out, out + n, 0.0);
    const double* arow = a + row * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = arow[kk];
        const double* brow = b + kk * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += av * brow[j];
    }
}

inline void linear_forward_row(const double* x, const double* w, const double* bias, double* y,
                               std::size_t row, std::size_t in, std::size_t out) {
    const double* xr = x + row * in;
    double* yr = y + row * out;
    for (std::size_t o = 0; o < out; ++o) {
        yr[o] = (bias ? bias[o] : 0.0) + dot(xr, w + o * in, in);
    }
}

inline void linear_backward_input_row(const double* dy, const double* w, double* dx,
                                      std::size_t row, std::size_t in, std::size_t out) {
    const double* dyr = dy + row * out;
    double* dxr = dx + row * in;
    for (std::size_t o = 0; o < out; ++o) {
        const double g = dyr[o];
        const double* wr = w + o * in;
        for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wr[i];
    }
}

// Output row `o` of dw (and dbias[o]).
inline void linear_backward_weight_row(const double* dy, const double* x, double* dw,
                                       double* dbias, std::size_t o, std::size_t batch,
                                       std::size_t in, std::size_t out) {
    double* dwr = dw ? dw + o * in : nullptr;
    double bsum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double g = dy[b * out + o];
        bsum += g;
        if (dwr) {
            const double* xr = x + b * in;
            for (std::size_t i = 0; i < in; ++i) dwr[i] += g * xr[i];
        }
    }
    if (dbias) dbias[o] += bsum;
}

// Valid output range [lo_begin, lo_end) for kernel tap k: input index
// lo*s + k - p must land in [0, L).
inline void tap_range(const ConvGeometry& g, std::size_t k, std::size_t& lo_begin,
                      std::size_t& lo_end) {
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride);
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(g.padding);
    const std::ptrdiff_t L = static_cast<std::ptrdiff_t>(g.in_length);
    std::ptrdiff_t first = off >= 0 ? 0 : (-off + s - 1) / s;
    std::ptrdiff_t last = L - 1 - off < 0 ? -1 : (L - 1 - off) / s;  // inclusive
    first = std::max<std::ptrdiff_t>(first, 0);
    last = std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(g.out_length) - 1);
    lo_begin = static_cast<std::size_t>(first);
    lo_end = last >= first ? static_cast<std::size_t>(last + 1) : lo_begin;
}

inline std::ptrdiff_t tap_offset(const ConvGeometry& g, std::size_t k) {
    return static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(g.padding);
}

inline std::ptrdiff_t at(const ConvGeometry& g, std::size_t lo, std::ptrdiff_t off) {
    return static_cast<std::ptrdiff_t>(lo * g.stride) + off;
}

// Output row (b, co) for flat index bc = b * out_channels + co.
inline void conv_forward_row(const double* x, const double* w, const double* bias, double* y,
                             const ConvGeometry& g, std::size_t bc) {
    const std::size_t b = bc / g.out_channels;
    const std::size_t co = bc % g.out_channels;
    double* yr = y + bc * g.out_length;
    std::fill(yr, yr + g.out_length, bias ? bias[co] : 0.0);
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const double* xr = x + (b * g.in_channels + ci) * g.in_length;
        const double* wr = w + (co * g.in_channels + ci) * g.kernel;
        for (std::size_t k = 0; k < g.kernel; ++k) {
            std::size_t lo0, lo1;
            tap_range(g, k, lo0, lo1);
            const double wk = wr[k];
            const std::ptrdiff_t off = tap_offset(g, k);
            for (std::size_t lo = lo0; lo < lo1; ++lo) yr[lo] += wk * xr[at(g, lo, off)];
        }
    }
}

// Input-gradient row (b, ci) for flat index bci = b * in_channels + ci.
inline void conv_backward_input_row(const double* dy, const double* w, double* dx,
                                    const ConvGeometry& g, std::size_t bci) {
    const std::size_t b = bci / g.in_channels;
    const std::size_t ci = bci % g.in_channels;
    double* dxr = dx + bci * g.in_length;
    for (std::size_t co = 0; co < g.out_channels; ++co) {
        const double* dyr = dy + (b * g.out_channels + co) * g.out_length;
        const double* wr = w + (co * g.in_channels + ci) * g.kernel;
        for (std::size_t k = 0; k < g.kernel; ++k) {
            std::size_t lo0, lo1;
            tap_range(g, k, lo0, lo1);
            const double wk = wr[k];
            const std::ptrdiff_t off = tap_offset(g, k);
            for (std::size_t lo = lo0; lo < lo1; ++lo) dxr[at(g, lo, off)] += wk * dyr[lo];
        }
    }
}

// Weight-gradient slice (co, ci) for flat index cc = co * in_channels + ci;
// dbias[co] is accumulated by the ci == 0 slice.
inline void conv_backward_weight_row(const double* dy, const double* x, double* dw, double* dbias,
                                     const ConvGeometry& g, std::size_t cc) {
    const std::size_t co = cc / g.in_channels;
    const std::size_t ci = cc % g.in_channels;
    double* dwr = dw ? dw + cc * g.kernel : nullptr;
    double bsum = 0.0;
    for (std::size_t b = 0; b < g.batch; ++b) {
        const double* dyr = dy + (b * g.out_channels + co) * g.out_length;
        if (dbias && ci == 0) {
            for (std::size_t lo = 0; lo < g.out_length; ++lo) bsum += dyr[lo];
        }
        if (!dwr) continue;
        const double* xr = x + (b * g.in_channels + ci) * g.in_length;
        for (std::size_t k = 0; k < g.kernel; ++k) {
            std::size_t lo0, lo1;
            tap_range(g, k, lo0, lo1);
            const std::ptrdiff_t off = tap_offset(g, k);
            double acc = 0.0;
            for (std::size_t lo = lo0; lo < lo1; ++lo) acc += dyr[lo] * xr[at(g, lo, off)];
            dwr[k] += acc;
        }
    }
    if (dbias && ci == 0) dbias[co] += bsum;
}

}  // namespace mgsgan::kernels::rows
