#include "mgsgan/kernels.hpp"

#include "kernel_rows.hpp"

namespace mgsgan::kernels {

std::size_t conv_output_length(std::size_t in_length, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
    if (stride == 0 || in_length + 2 * padding < kernel) return 0;
    return (in_length + 2 * padding - kernel) / stride + 1;
}

double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

namespace serial {

namespace {
const double* ptr_or_null(std::span<const double> s) { return s.empty() ? nullptr : s.data(); }
double* ptr_or_null(std::span<double> s) { return s.empty() ? nullptr : s.data(); }
}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) rows::matmul_row(a.data(), b.data(), c.data(), r, k, n);
}

void linear_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y, std::size_t batch,
                    std::size_t in, std::size_t out) {
    for (std::size_t r = 0; r < batch; ++r)
        rows::linear_forward_row(x.data(), w.data(), ptr_or_null(bias), y.data(), r, in, out);
}

void linear_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, std::size_t batch, std::size_t in,
                           std::size_t out) {
    for (std::size_t r = 0; r < batch; ++r)
        rows::linear_backward_input_row(dy.data(), w.data(), dx.data(), r, in, out);
}

void linear_backward_weight(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> dbias, std::size_t batch,
                            std::size_t in, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o)
        rows::linear_backward_weight_row(dy.data(), x.data(), ptr_or_null(dw), ptr_or_null(dbias),
                                         o, batch, in, out);
}

void conv1d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y, const ConvGeometry& g) {
    const std::size_t n = g.batch * g.out_channels;
    for (std::size_t r = 0; r < n; ++r)
        rows::conv_forward_row(x.data(), w.data(), ptr_or_null(bias), y.data(), g, r);
}

void conv1d_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, const ConvGeometry& g) {
    const std::size_t n = g.batch * g.in_channels;
    for (std::size_t r = 0; r < n; ++r)
        rows::conv_backward_input_row(dy.data(), w.data(), dx.data(), g, r);
}

void conv1d_backward_weight(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> dbias, const ConvGeometry& g) {
    const std::size_t n = g.out_channels * g.in_channels;
    for (std::size_t r = 0; r < n; ++r)
        rows::conv_backward_weight_row(dy.data(), x.data(), ptr_or_null(dw), ptr_or_null(dbias), g,
                                       r);
}

}  // namespace serial
}  // namespace mgsgan::kernels
