#pragma once

#include "mgsgan/tensor.hpp"

#include <initializer_list>
#include <vector>

namespace mgsgan::ad::detail {

std::uint64_t next_sequence();

/// Raises NumericError naming `op` if any value is NaN or Inf.
void check_finite(const char* op, std::span<const double> values);

/// Builds an op result. When no input requires grad the inputs and closure
/// are dropped, so constant subgraphs are never recorded.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward);

}  // namespace mgsgan::ad::detail
