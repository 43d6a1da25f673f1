#pragma once

#include <string>
#include <string_view>

#include "diffpool/matrix.hpp"

namespace diffpool {

enum class ActivationKind { sigmoid, tanh, relu, softmax, identity };

std::string_view to_string(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);

double sigmoid(double x);

// Elementwise, except softmax which normalises each row.
Matrix activation_forward(const Matrix& a, ActivationKind kind);

// dL/da given dL/dout and the forward output. Softmax is not handled here; its
// gradient is fused with the cross-entropy loss.
Matrix activation_backward(const Matrix& out, const Matrix& grad_out, ActivationKind kind);

}  // namespace diffpool
