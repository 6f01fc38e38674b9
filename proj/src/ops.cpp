#include "mgsgan/errors.hpp"
#include "mgsgan/kernels.hpp"
#include "mgsgan/tensor.hpp"

#include "graph_internal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgsgan::ad {

using detail::make_result;
namespace kp = kernels::parallel;

namespace {

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got shape " + shape_string(t.shape()));
    }
}

bool present(const Tensor& t) { return t.size() > 0; }

// Size of b's period when it is broadcast over a's leading axis; a.size()
// when shapes are equal.
std::size_t broadcast_period(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return a.size();
    if (a.rank() == b.rank() + 1 && std::equal(b.shape().begin(), b.shape().end(), a.shape().begin() + 1)) {
        return b.size();
    }
    mismatch(op, a, b);
}

Node& input(Node& out, std::size_t i) { return *out.inputs[i]; }

std::vector<double> map_values(const Tensor& x, auto&& f) {
    std::vector<double> out(x.size());
    const auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(v[i]);
    return out;
}

// Unary op whose derivative depends on the input and output values.
Tensor unary(const char* op, const Tensor& x, auto&& f, auto&& df) {
    return make_result(op, x.shape(), map_values(x, f), {x}, [df](Node& out) {
        Node& in = input(out, 0);
        if (!in.requires_grad) return;
        auto& gi = in.grad_buffer();
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += out.grad[i] * df(in.value[i], out.value[i]);
    });
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    const std::size_t period = broadcast_period("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i % period];
    return make_result("add", a.shape(), std::move(out), {a, b}, [period](Node& out) {
        Node& na = input(out, 0);
        Node& nb = input(out, 1);
        if (na.requires_grad) {
            auto& g = na.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
        }
        if (nb.requires_grad) {
            auto& g = nb.grad_buffer();
            for (std::size_t i = 0; i < out.grad.size(); ++i) g[i % period] += out.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    const std::size_t period = broadcast_period("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i % period];
    return make_result("sub", a.shape(), std::move(out), {a, b}, [period](Node& out) {
        Node& na = input(out, 0);
        Node& nb = input(out, 1);
        if (na.requires_grad) {
            auto& g = na.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
        }
        if (nb.requires_grad) {
            auto& g = nb.grad_buffer();
            for (std::size_t i = 0; i < out.grad.size(); ++i) g[i % period] -= out.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const std::size_t period = broadcast_period("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i % period];
    return make_result("mul", a.shape(), std::move(out), {a, b}, [period](Node& out) {
        Node& na = input(out, 0);
        Node& nb = input(out, 1);
        if (na.requires_grad) {
            auto& g = na.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * nb.value[i % period];
        }
        if (nb.requires_grad) {
            auto& g = nb.grad_buffer();
            for (std::size_t i = 0; i < out.grad.size(); ++i) g[i % period] += out.grad[i] * na.value[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary("scale", a, [factor](double v) { return v * factor; },
                 [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
    return unary("add_scalar", a, [offset](double v) { return v + offset; },
                 [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary("leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
                 [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor sigmoid(const Tensor& x) {
    return unary(
        "sigmoid", x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double s) { return s * (1.0 - s); });
}

Tensor tanh(const Tensor& x) {
    return unary("tanh", x, [](double v) { return std::tanh(v); },
                 [](double, double t) { return 1.0 - t * t; });
}

Tensor log(const Tensor& x) {
    for (double v : x.values()) {
        if (!(v > 0.0)) throw NumericError("log of non-positive value " + std::to_string(v));
    }
    return unary("log", x, [](double v) { return std::log(v); },
                 [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (lo > hi) throw ContractError("clamp: lo > hi");
    return unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
                 [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor clamp_box(const Tensor& x, std::span<const double> lower, std::span<const double> upper) {
    require_rank("clamp_box", x, 2);
    const std::size_t f = x.dim(1);
    if (lower.size() != f || upper.size() != f) {
        throw DimensionError("clamp_box: bounds of length " + std::to_string(lower.size()) + "/" +
                             std::to_string(upper.size()) + " for shape " + shape_string(x.shape()));
    }
    std::vector<double> lo(lower.begin(), lower.end()), hi(upper.begin(), upper.end());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t j = i % f;
        if (lo[j] > hi[j]) throw ContractError("clamp_box: lower > upper at feature " + std::to_string(j));
        out[i] = std::clamp(x[i], lo[j], hi[j]);
    }
    return make_result("clamp_box", x.shape(), std::move(out), {x},
                       [lo = std::move(lo), hi = std::move(hi), f](Node& out) {
                           Node& in = input(out, 0);
                           if (!in.requires_grad) return;
                           auto& g = in.grad_buffer();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               const std::size_t j = i % f;
                               if (in.value[i] > lo[j] && in.value[i] < hi[j]) g[i] += out.grad[i];
                           }
                       });
}

Tensor softmax(const Tensor& x) {
    require_rank("softmax", x, 2);
    const std::size_t rows = x.dim(0), n = x.dim(1);
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.values().data() + r * n;
        double* yr = out.data() + r * n;
        const double mx = *std::max_element(xr, xr + n);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += (yr[j] = std::exp(xr[j] - mx));
        for (std::size_t j = 0; j < n; ++j) yr[j] /= total;
    }
    return make_result("softmax", x.shape(), std::move(out), {x}, [rows, n](Node& out) {
        Node& in = input(out, 0);
        if (!in.requires_grad) return;
        auto& g = in.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* s = out.value.data() + r * n;
            const double* go = out.grad.data() + r * n;
            double inner = 0.0;
            for (std::size_t j = 0; j < n; ++j) inner += go[j] * s[j];
            for (std::size_t j = 0; j < n; ++j) g[r * n + j] += s[j] * (go[j] - inner);
        }
    });
}

// ---- dense / conv ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    if (a.dim(1) != b.dim(0)) mismatch("matmul", a, b);
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n);
    kp::matmul(a.values(), b.values(), out, m, k, n);
    return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& out) {
        Node& na = input(out, 0);
        Node& nb = input(out, 1);
        if (na.requires_grad) {
            // ga[m,k] += g[m,n] . b[k,n]^T
            std::vector<double> tmp(m * k);
            kp::linear_forward(out.grad, nb.value, {}, tmp, m, n, k);
            auto& g = na.grad_buffer();
            for (std::size_t i = 0; i < tmp.size(); ++i) g[i] += tmp[i];
        }
        if (nb.requires_grad) {
            // gb[k,n] += a[m,k]^T . g[m,n]
            kp::linear_backward_weight(na.value, out.grad, nb.grad_buffer(), {}, m, n, k);
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank("linear", x, 2);
    require_rank("linear", weight, 2);
    const std::size_t batch = x.dim(0), in = x.dim(1), outf = weight.dim(0);
    if (weight.dim(1) != in) mismatch("linear", x, weight);
    const bool has_bias = present(bias);
    if (has_bias && bias.shape() != Shape{outf}) mismatch("linear", weight, bias);
    std::vector<double> out(batch * outf);
    kp::linear_forward(x.values(), weight.values(), has_bias ? bias.values() : std::span<const double>{},
                       out, batch, in, outf);
    std::vector<Tensor> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    return make_result("linear", {batch, outf}, std::move(out), std::move(inputs),
                       [batch, in, outf, has_bias](Node& out) {
                           Node& nx = input(out, 0);
                           Node& nw = input(out, 1);
                           if (nx.requires_grad) {
                               kp::linear_backward_input(out.grad, nw.value, nx.grad_buffer(), batch, in, outf);
                           }
                           std::span<double> dw, db;
                           if (nw.requires_grad) dw = nw.grad_buffer();
                           if (has_bias && input(out, 2).requires_grad) db = input(out, 2).grad_buffer();
                           if (!dw.empty() || !db.empty()) {
                               kp::linear_backward_weight(out.grad, nx.value, dw, db, batch, in, outf);
                           }
                       });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    require_rank("conv1d", x, 3);
    require_rank("conv1d", weight, 3);
    if (stride == 0) throw ContractError("conv1d: stride must be positive");
    if (weight.dim(1) != x.dim(1)) mismatch("conv1d", x, weight);
    kernels::ConvGeometry g;
    g.batch = x.dim(0);
    g.in_channels = x.dim(1);
    g.in_length = x.dim(2);
    g.out_channels = weight.dim(0);
    g.kernel = weight.dim(2);
    g.stride = stride;
    g.padding = padding;
    g.out_length = kernels::conv_output_length(g.in_length, g.kernel, stride, padding);
    if (g.out_length == 0) mismatch("conv1d", x, weight);
    const bool has_bias = present(bias);
    if (has_bias && bias.shape() != Shape{g.out_channels}) mismatch("conv1d", weight, bias);
    std::vector<double> out(g.batch * g.out_channels * g.out_length);
    kp::conv1d_forward(x.values(), weight.values(), has_bias ? bias.values() : std::span<const double>{}, out, g);
    std::vector<Tensor> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    return make_result("conv1d", {g.batch, g.out_channels, g.out_length}, std::move(out), std::move(inputs),
                       [g, has_bias](Node& out) {
                           Node& nx = input(out, 0);
                           Node& nw = input(out, 1);
                           if (nx.requires_grad) kp::conv1d_backward_input(out.grad, nw.value, nx.grad_buffer(), g);
                           std::span<double> dw, db;
                           if (nw.requires_grad) dw = nw.grad_buffer();
                           if (has_bias && input(out, 2).requires_grad) db = input(out, 2).grad_buffer();
                           if (!dw.empty() || !db.empty()) kp::conv1d_backward_weight(out.grad, nx.value, dw, db, g);
                       });
}

Tensor conv1d_transpose(const Tensor& y, const Tensor& weight, const Tensor& bias,
                        std::size_t stride, std::size_t padding, std::size_t out_length) {
    require_rank("conv1d_transpose", y, 3);
    require_rank("conv1d_transpose", weight, 3);
    if (stride == 0) throw ContractError("conv1d_transpose: stride must be positive");
    if (weight.dim(0) != y.dim(1)) mismatch("conv1d_transpose", y, weight);
    // Geometry of the forward conv this op is the adjoint of.
    kernels::ConvGeometry g;
    g.batch = y.dim(0);
    g.out_channels = weight.dim(0);
    g.in_channels = weight.dim(1);
    g.kernel = weight.dim(2);
    g.stride = stride;
    g.padding = padding;
    g.in_length = out_length;
    g.out_length = y.dim(2);
    if (kernels::conv_output_length(out_length, g.kernel, stride, padding) != g.out_length) {
        throw DimensionError("conv1d_transpose: output length " + std::to_string(out_length) +
                             " is not consistent with input shape " + shape_string(y.shape()) +
                             " and kernel " + shape_string(weight.shape()));
    }
    const bool has_bias = present(bias);
    if (has_bias && bias.shape() != Shape{g.in_channels}) mismatch("conv1d_transpose", weight, bias);
    std::vector<double> out(g.batch * g.in_channels * g.in_length, 0.0);
    kp::conv1d_backward_input(y.values(), weight.values(), out, g);
    if (has_bias) {
        for (std::size_t r = 0; r < g.batch * g.in_channels; ++r) {
            const double bv = bias[r % g.in_channels];
            for (std::size_t l = 0; l < g.in_length; ++l) out[r * g.in_length + l] += bv;
        }
    }
    std::vector<Tensor> inputs{y, weight};
    if (has_bias) inputs.push_back(bias);
    return make_result("conv1d_transpose", {g.batch, g.in_channels, g.in_length}, std::move(out),
                       std::move(inputs), [g, has_bias](Node& out) {
                           Node& ny = input(out, 0);
                           Node& nw = input(out, 1);
                           if (ny.requires_grad) {
                               std::vector<double> tmp(ny.value.size());
                               kp::conv1d_forward(out.grad, nw.value, {}, tmp, g);
                               auto& gy = ny.grad_buffer();
                               for (std::size_t i = 0; i < tmp.size(); ++i) gy[i] += tmp[i];
                           }
                           if (nw.requires_grad) {
                               kp::conv1d_backward_weight(ny.value, out.grad, nw.grad_buffer(), {}, g);
                           }
                           if (has_bias && input(out, 2).requires_grad) {
                               auto& gb = input(out, 2).grad_buffer();
                               for (std::size_t r = 0; r < g.batch * g.in_channels; ++r) {
                                   double s = 0.0;
                                   for (std::size_t l = 0; l < g.in_length; ++l) s += out.grad[r * g.in_length + l];
                                   gb[r % g.in_channels] += s;
                               }
                           }
                       });
}

// ---- statistics ----------------------------------------------------------------

Tensor batch_mean(const Tensor& x) {
    if (x.rank() < 1 || x.dim(0) == 0) throw DimensionError("batch_mean: empty leading axis");
    const std::size_t b = x.dim(0), inner = x.size() / b;
    std::vector<double> out(inner, 0.0);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t i = 0; i < inner; ++i) out[i] += x[r * inner + i];
    for (double& v : out) v /= static_cast<double>(b);
    Shape shape(x.shape().begin() + 1, x.shape().end());
    return make_result("batch_mean", std::move(shape), std::move(out), {x}, [b, inner](Node& out) {
        Node& in = input(out, 0);
        if (!in.requires_grad) return;
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i % inner] / static_cast<double>(b);
    });
}

Tensor batch_var(const Tensor& x) {
    if (x.rank() < 1 || x.dim(0) == 0) throw DimensionError("batch_var: empty leading axis");
    const std::size_t b = x.dim(0), inner = x.size() / b;
    std::vector<double> mu(inner, 0.0), out(inner, 0.0);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t i = 0; i < inner; ++i) mu[i] += x[r * inner + i];
    for (double& v : mu) v /= static_cast<double>(b);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t i = 0; i < inner; ++i) {
            const double d = x[r * inner + i] - mu[i];
            out[i] += d * d;
        }
    for (double& v : out) v /= static_cast<double>(b);
    Shape shape(x.shape().begin() + 1, x.shape().end());
    return make_result("batch_var", std::move(shape), std::move(out), {x},
                       [b, inner, mu = std::move(mu)](Node& out) {
                           Node& in = input(out, 0);
                           if (!in.requires_grad) return;
                           auto& g = in.grad_buffer();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               const std::size_t j = i % inner;
                               g[i] += out.grad[j] * 2.0 * (in.value[i] - mu[j]) / static_cast<double>(b);
                           }
                       });
}

namespace {

struct ChannelLayout {
    std::size_t batch, channels, length;
    std::size_t count() const { return batch * length; }
    std::size_t channel_of(std::size_t i) const { return (i / length) % channels; }
};

ChannelLayout channel_layout(const char* op, const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    if (x.rank() != 2 && x.rank() != 3) {
        throw DimensionError(std::string(op) + ": expected [B,C] or [B,C,L], got " + shape_string(x.shape()));
    }
    ChannelLayout l{x.dim(0), x.dim(1), x.rank() == 3 ? x.dim(2) : 1};
    if (gamma.shape() != Shape{l.channels}) mismatch(op, x, gamma);
    if (beta.shape() != Shape{l.channels}) mismatch(op, x, beta);
    return l;
}

}  // namespace

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  std::span<double> batch_stats_out) {
    const ChannelLayout l = channel_layout("batch_norm", x, gamma, beta);
    if (l.count() < 2) throw ContractError("batch_norm: train mode needs at least 2 values per channel");
    std::vector<double> mu(l.channels, 0.0), var(l.channels, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) mu[l.channel_of(i)] += x[i];
    for (double& v : mu) v /= static_cast<double>(l.count());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - mu[l.channel_of(i)];
        var[l.channel_of(i)] += d * d;
    }
    for (double& v : var) v /= static_cast<double>(l.count());
    detail::check_finite("batch_norm statistics", var);
    std::vector<double> inv_std(l.channels);
    for (std::size_t c = 0; c < l.channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    if (batch_stats_out.size() == 2 * l.channels) {
        std::copy(mu.begin(), mu.end(), batch_stats_out.begin());
        std::copy(var.begin(), var.end(), batch_stats_out.begin() + static_cast<std::ptrdiff_t>(l.channels));
    }
    std::vector<double> xhat(x.size()), out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t c = l.channel_of(i);
        xhat[i] = (x[i] - mu[c]) * inv_std[c];
        out[i] = gamma[c] * xhat[i] + beta[c];
    }
    return make_result("batch_norm", x.shape(), std::move(out), {x, gamma, beta},
                       [l, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& out) {
                           Node& nx = input(out, 0);
                           Node& ng = input(out, 1);
                           Node& nb = input(out, 2);
                           std::vector<double> sum_g(l.channels, 0.0), sum_gx(l.channels, 0.0);
                           for (std::size_t i = 0; i < out.grad.size(); ++i) {
                               const std::size_t c = l.channel_of(i);
                               sum_g[c] += out.grad[i];
                               sum_gx[c] += out.grad[i] * xhat[i];
                           }
                           if (ng.requires_grad) {
                               auto& g = ng.grad_buffer();
                               for (std::size_t c = 0; c < l.channels; ++c) g[c] += sum_gx[c];
                           }
                           if (nb.requires_grad) {
                               auto& g = nb.grad_buffer();
                               for (std::size_t c = 0; c < l.channels; ++c) g[c] += sum_g[c];
                           }
                           if (nx.requires_grad) {
                               auto& g = nx.grad_buffer();
                               const double n = static_cast<double>(l.count());
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                   const std::size_t c = l.channel_of(i);
                                   g[i] += ng.value[c] * inv_std[c] / n *
                                           (n * out.grad[i] - sum_g[c] - xhat[i] * sum_gx[c]);
                               }
                           }
                       });
}

Tensor batch_norm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                            std::span<const double> mean_in, std::span<const double> var_in, double eps) {
    const ChannelLayout l = channel_layout("batch_norm_inference", x, gamma, beta);
    if (mean_in.size() != l.channels || var_in.size() != l.channels) {
        throw DimensionError("batch_norm_inference: running statistics do not match " + shape_string(x.shape()));
    }
    std::vector<double> inv_std(l.channels);
    for (std::size_t c = 0; c < l.channels; ++c) inv_std[c] = 1.0 / std::sqrt(var_in[c] + eps);
    std::vector<double> xhat(x.size()), out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t c = l.channel_of(i);
        xhat[i] = (x[i] - mean_in[c]) * inv_std[c];
        out[i] = gamma[c] * xhat[i] + beta[c];
    }
    return make_result("batch_norm_inference", x.shape(), std::move(out), {x, gamma, beta},
                       [l, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& out) {
                           Node& nx = input(out, 0);
                           Node& ng = input(out, 1);
                           Node& nb = input(out, 2);
                           for (std::size_t i = 0; i < out.grad.size(); ++i) {
                               const std::size_t c = l.channel_of(i);
                               if (nx.requires_grad) nx.grad_buffer()[i] += out.grad[i] * ng.value[c] * inv_std[c];
                               if (ng.requires_grad) ng.grad_buffer()[c] += out.grad[i] * xhat[i];
                               if (nb.requires_grad) nb.grad_buffer()[c] += out.grad[i];
                           }
                       });
}

// ---- structure -------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
    }
    std::vector<double> out(x.values().begin(), x.values().end());
    return make_result("reshape", std::move(shape), std::move(out), {x}, [](Node& out) {
        Node& in = input(out, 0);
        if (!in.requires_grad) return;
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
    });
}

Tensor flatten(const Tensor& x) {
    if (x.rank() < 1) throw DimensionError("flatten: scalar input");
    const std::size_t b = x.dim(0);
    return reshape(x, {b, b ? x.size() / b : 0});
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const Shape& ref = parts.front().shape();
    if (axis >= ref.size()) throw DimensionError("concat: axis out of range for " + shape_string(ref));
    Shape shape = ref;
    shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.rank() != ref.size()) mismatch("concat", parts.front(), p);
        for (std::size_t a = 0; a < ref.size(); ++a) {
            if (a != axis && p.dim(a) != ref[a]) mismatch("concat", parts.front(), p);
        }
        shape[axis] += p.dim(axis);
    }
    const std::size_t outer = std::accumulate(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(axis),
                                              std::size_t{1}, std::multiplies<>());
    const std::size_t inner = std::accumulate(ref.begin() + static_cast<std::ptrdiff_t>(axis) + 1, ref.end(),
                                              std::size_t{1}, std::multiplies<>());
    std::vector<std::size_t> chunk(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) chunk[p] = parts[p].dim(axis) * inner;
    const std::size_t row = shape[axis] * inner;
    std::vector<double> out(outer * row);
    for (std::size_t o = 0; o < outer; ++o) {
        std::size_t off = o * row;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            const auto v = parts[p].values();
            std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * chunk[p]), chunk[p],
                        out.begin() + static_cast<std::ptrdiff_t>(off));
            off += chunk[p];
        }
    }
    return make_result("concat", std::move(shape), std::move(out), parts, [outer, row, chunk](Node& out) {
        std::size_t base = 0;
        for (std::size_t p = 0; p < chunk.size(); ++p) {
            Node& in = input(out, p);
            if (in.requires_grad) {
                auto& g = in.grad_buffer();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < chunk[p]; ++i) g[o * chunk[p] + i] += out.grad[o * row + base + i];
            }
            base += chunk[p];
        }
    });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    if (x.rank() < 1 || begin > end || end > x.dim(0)) {
        throw DimensionError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") out of range for " + shape_string(x.shape()));
    }
    const std::size_t inner = x.dim(0) ? x.size() / x.dim(0) : 0;
    Shape shape = x.shape();
    shape[0] = end - begin;
    const auto v = x.values();
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * inner),
                            v.begin() + static_cast<std::ptrdiff_t>(end * inner));
    return make_result("slice_rows", std::move(shape), std::move(out), {x}, [begin, inner](Node& out) {
        Node& in = input(out, 0);
        if (!in.requires_grad) return;
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < out.grad.size(); ++i) g[begin * inner + i] += out.grad[i];
    });
}

// ---- reductions ----------------------------------------------------------------

Tensor sum(const Tensor& x) {
    const double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
    return make_result("sum", {}, {s}, {x}, [](Node& out) {
        Node& in = input(out, 0);
        if (!in.requires_grad) return;
        for (double& g : in.grad_buffer()) g += out.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor weighted_sum(const Tensor& x, std::span<const double> weights) {
    if (weights.size() != x.size()) {
        throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for shape " +
                             shape_string(x.shape()));
    }
    std::vector<double> w(weights.begin(), weights.end());
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += x[i] * w[i];
    return make_result("weighted_sum", {}, {s}, {x}, [w = std::move(w)](Node& out) {
        Node& in = input(out, 0);
        if (!in.requires_grad) return;
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[0] * w[i];
    });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> index) {
    require_rank("pick", x, 2);
    const std::size_t b = x.dim(0), n = x.dim(1);
    if (index.size() != b) {
        throw DimensionError("pick: " + std::to_string(index.size()) + " indices for shape " + shape_string(x.shape()));
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    std::vector<double> out(b);
    for (std::size_t r = 0; r < b; ++r) {
        if (idx[r] >= n) throw ContractError("pick: index " + std::to_string(idx[r]) + " >= " + std::to_string(n));
        out[r] = x[r * n + idx[r]];
    }
    return make_result("pick", {b}, std::move(out), {x}, [n, idx = std::move(idx)](Node& out) {
        Node& in = input(out, 0);
        if (!in.requires_grad) return;
        auto& g = in.grad_buffer();
        for (std::size_t r = 0; r < idx.size(); ++r) g[r * n + idx[r]] += out.grad[r];
    });
}

}  // namespace mgsgan::ad
