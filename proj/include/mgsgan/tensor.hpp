#pragma once

// Reverse-mode differentiation over dense double-precision tensors.
//
// A Tensor is a shared handle to a graph node. Every op creates a fresh node
// that records its inputs and a backward closure; the graph is rebuilt on each
// forward pass and released when the last handle to the loss goes away.
// Nodes carry a per-thread creation sequence number, so sorting reachable
// nodes by descending sequence is a valid reverse topological order.
//
// Broadcasting is limited to a leading batch dimension: a binary op accepts
// b.shape == a.shape[1:] and applies b to every batch row of a.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mgsgan::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until a gradient reaches this node
    bool requires_grad = false;
    std::uint64_t sequence = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    /// Zero-initialized gradient buffer, allocated on first use.
    std::vector<double>& grad_buffer();
};

class Tensor {
public:
    Tensor();
    explicit Tensor(std::shared_ptr<Node> node);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }

    std::span<const double> values() const { return node_->value; }
    /// Direct write access; only meaningful for leaves (parameters, buffers).
    std::span<double> mutable_values() { return node_->value; }
    double item() const;
    double operator[](std::size_t i) const { return node_->value[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad();
    /// Drops the gradient buffer entirely (has_grad() becomes false).
    void clear_grad() { node_->grad.clear(); }

    /// New leaf sharing no state with this tensor.
    Tensor clone() const;
    /// New leaf with a copy of the value and requires_grad = false.
    Tensor detach() const;

    bool is_leaf() const { return node_->inputs.empty() && !node_->backward; }
    const char* op() const { return node_->op; }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Reachable nodes that require grad, in the order backward visits them.
std::vector<const Node*> backward_order(const Tensor& root);

/// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
/// a scalar loss. Throws ContractError on a non-scalar loss.
void backward(const Tensor& loss);

// ---- ops -----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor neg(const Tensor& a);

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [B,in], weight [out,in], bias [out] (may be a default Tensor) -> [B,out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// x [B,Cin,L], weight [Cout,Cin,K], bias [Cout] or empty -> [B,Cout,Lout]
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
/// Adjoint of conv1d with respect to its input. y [B,Cout,Lin], weight
/// [Cout,Cin,K], bias [Cin] or empty -> [B,Cin,out_length]. out_length must
/// satisfy conv_output_length(out_length, K, stride, padding) == Lin.
Tensor conv1d_transpose(const Tensor& y, const Tensor& weight, const Tensor& bias,
                        std::size_t stride, std::size_t padding, std::size_t out_length);

Tensor leaky_relu(const Tensor& x, double negative_slope);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Natural log; non-positive inputs raise NumericError.
Tensor log(const Tensor& x);
/// Softmax along the last axis of a [B,N] tensor.
Tensor softmax(const Tensor& x);

/// Elementwise clamp to [lo, hi]; gradient passes where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);
/// Per-feature clamp of x [B,F] into [lower[f], upper[f]]; lower/upper are
/// constants. Gradient is identity strictly inside the box, zero outside.
Tensor clamp_box(const Tensor& x, std::span<const double> lower, std::span<const double> upper);

/// Mean / biased variance over the leading axis: [B, ...] -> [...].
Tensor batch_mean(const Tensor& x);
Tensor batch_var(const Tensor& x);

/// Train-mode batch normalization over axes (0, 2) of [B,C,L] or axis 0 of
/// [B,C]. Writes the batch mean and biased variance per channel into
/// `batch_stats_out` (length 2C: means then variances) when non-empty.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  std::span<double> batch_stats_out = {});
/// Eval-mode batch normalization with fixed statistics (no gradient to them).
Tensor batch_norm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                            std::span<const double> mean, std::span<const double> var,
                            double eps);

Tensor reshape(const Tensor& x, Shape shape);
/// [B, ...] -> [B, prod(...)]
Tensor flatten(const Tensor& x);
/// Concatenates along `axis`; all other extents must match.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Rows [begin, end) of the leading axis.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// sum_i x[i] * weights[i] with constant weights.
Tensor weighted_sum(const Tensor& x, std::span<const double> weights);
/// out[b] = x[b, index[b]] for x [B,N].
Tensor pick(const Tensor& x, std::span<const std::size_t> index);

}  // namespace mgsgan::ad
