#include "mgsgan/kernels.hpp"

#include "kernel_rows.hpp"

#ifdef MGSGAN_HAVE_OPENMP
#include <omp.h>
#endif

#include <cstdint>

namespace mgsgan::kernels::parallel {

namespace {

const double* ptr_or_null(std::span<const double> s) { return s.empty() ? nullptr : s.data(); }
double* ptr_or_null(std::span<double> s) { return s.empty() ? nullptr : s.data(); }

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kMinWork = 1u << 14;

template <class Body>
void for_rows(std::size_t rows, std::size_t work_per_row, Body&& body) {
#ifdef MGSGAN_HAVE_OPENMP
    const auto n = static_cast<std::int64_t>(rows);
    if (rows > 1 && rows * work_per_row >= kMinWork && omp_get_max_threads() > 1) {
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < n; ++r) body(static_cast<std::size_t>(r));
        return;
    }
#else
    (void)work_per_row;
#endif
    for (std::size_t r = 0; r < rows; ++r) body(r);
}

}  // namespace

int max_threads() {
#ifdef MGSGAN_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef MGSGAN_HAVE_OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
    for_rows(m, k * n, [&](std::size_t r) { rows::matmul_row(a.data(), b.data(), c.data(), r, k, n); });
}

void linear_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y, std::size_t batch,
                    std::size_t in, std::size_t out) {
    for_rows(batch, in * out, [&](std::size_t r) {
        rows::linear_forward_row(x.data(), w.data(), ptr_or_null(bias), y.data(), r, in, out);
    });
}

void linear_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, std::size_t batch, std::size_t in,
                           std::size_t out) {
    for_rows(batch, in * out, [&](std::size_t r) {
        rows::linear_backward_input_row(dy.data(), w.data(), dx.data(), r, in, out);
    });
}

void linear_backward_weight(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> dbias, std::size_t batch,
                            std::size_t in, std::size_t out) {
    for_rows(out, batch * in, [&](std::size_t o) {
        rows::linear_backward_weight_row(dy.data(), x.data(), ptr_or_null(dw), ptr_or_null(dbias),
                                         o, batch, in, out);
    });
}

void conv1d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y, const ConvGeometry& g) {
    for_rows(g.batch * g.out_channels, g.in_channels * g.kernel * g.out_length, [&](std::size_t r) {
        rows::conv_forward_row(x.data(), w.data(), ptr_or_null(bias), y.data(), g, r);
    });
}

void conv1d_backward_input(std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx, const ConvGeometry& g) {
    for_rows(g.batch * g.in_channels, g.out_channels * g.kernel * g.out_length, [&](std::size_t r) {
        rows::conv_backward_input_row(dy.data(), w.data(), dx.data(), g, r);
    });
}

void conv1d_backward_weight(std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw, std::span<double> dbias, const ConvGeometry& g) {
    for_rows(g.out_channels * g.in_channels, g.batch * g.kernel * g.out_length, [&](std::size_t r) {
        rows::conv_backward_weight_row(dy.data(), x.data(), ptr_or_null(dw), ptr_or_null(dbias), g,
                                       r);
    });
}

}  // namespace mgsgan::kernels::parallel
