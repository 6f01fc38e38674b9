#pragma once

// Dense and 1-D convolution kernels used by the autodiff ops.
//
// Two implementations share one signature set: `serial` is the reference,
// `parallel` splits the outermost independent loop across OpenMP threads.
// Every output element is reduced by exactly one thread in the same order as
// the serial version, so both produce bit-identical results for any thread
// count. Backward kernels accumulate (+=) into their outputs.

#include <cstddef>
#include <span>

namespace mgsgan::kernels {

struct ConvGeometry {
    std::size_t batch = 1;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t in_length = 1;
    std::size_t out_length = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
};

/// floor((L + 2p - K) / s) + 1; zero when the kernel does not fit.
std::size_t conv_output_length(std::size_t in_length, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

/// Fixed-order dot product with four partial sums.
double dot(const double* a, const double* b, std::size_t n);

#define MGSGAN_KERNEL_DECLS                                                                       \
    /* c[m,n] = a[m,k] * b[k,n] */                                                               \
    void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,        \
                std::size_t m, std::size_t k, std::size_t n);                                     \
    /* y[b,o] = bias[o] + sum_i x[b,i] w[o,i]; bias may be empty */                               \
    void linear_forward(std::span<const double> x, std::span<const double> w,                     \
                        std::span<const double> bias, std::span<double> y, std::size_t batch,     \
                        std::size_t in, std::size_t out);                                         \
    /* dx[b,i] += sum_o dy[b,o] w[o,i] */                                                         \
    void linear_backward_input(std::span<const double> dy, std::span<const double> w,             \
                               std::span<double> dx, std::size_t batch, std::size_t in,           \
                               std::size_t out);                                                  \
    /* dw[o,i] += sum_b dy[b,o] x[b,i]; dbias[o] += sum_b dy[b,o]; either output may be empty */  \
    void linear_backward_weight(std::span<const double> dy, std::span<const double> x,            \
                                std::span<double> dw, std::span<double> dbias, std::size_t batch, \
                                std::size_t in, std::size_t out);                                 \
    /* y[b,co,l] = bias[co] + sum_{ci,k} w[co,ci,k] x[b,ci,l*s+k-p] */                            \
    void conv1d_forward(std::span<const double> x, std::span<const double> w,                     \
                        std::span<const double> bias, std::span<double> y,                        \
                        const ConvGeometry& g);                                                   \
    /* dx += adjoint of conv1d_forward (without bias) applied to dy */                            \
    void conv1d_backward_input(std::span<const double> dy, std::span<const double> w,             \
                               std::span<double> dx, const ConvGeometry& g);                      \
    void conv1d_backward_weight(std::span<const double> dy, std::span<const double> x,            \
                                std::span<double> dw, std::span<double> dbias,                    \
                                const ConvGeometry& g);

namespace serial {
MGSGAN_KERNEL_DECLS
}

namespace parallel {
MGSGAN_KERNEL_DECLS
/// Threads the parallel kernels will use (1 without OpenMP).
int max_threads();
void set_threads(int n);
}

#undef MGSGAN_KERNEL_DECLS

}  // namespace mgsgan::kernels
