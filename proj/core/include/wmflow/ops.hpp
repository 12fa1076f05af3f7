#pragma once

#include "wmflow/rng.hpp"
#include "wmflow/tensor.hpp"

namespace wmflow {

// Pure Real64 tensor kernels. Forward passes use a fixed summation order
// (channel-major, then kernel row, then kernel column) so results are
// bit-reproducible; the autodiff layer and the integer flow share these.

// x [N,C,H,W], w [F,C,k,k], b [F] -> [N,F,H',W']
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& w, int stride, int padding,
                         int in_h, int in_w);
Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& x, int stride, int padding,
                          int kernel);
Tensor conv2d_grad_bias(const Tensor& grad_out);

// x [N,C,H,W], w [C,F,k,k], b [F] -> [N,F,H'',W''] with
// H'' = (H-1)*stride - 2*padding + k. Adjoint of conv2d under axis-swapped
// weights: <conv2d(a,w~),b> == <a, transposed_conv2d(b,w)> for w~[f,c] = w[c,f].
Tensor transposed_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                         int padding);
Tensor transposed_conv2d_grad_input(const Tensor& grad_out, const Tensor& w, int stride,
                                    int padding);
Tensor transposed_conv2d_grad_weight(const Tensor& grad_out, const Tensor& x, int stride,
                                     int padding, int kernel);

enum class RoundMode {
  Deterministic,  // nearest integer, ties away from zero
  Stochastic,     // round(x) + u, u ~ U(-0.5, 0.5); training only
  Identity,       // no-op; used by gradient checks on the STE surrogate
};

// elementwise rounding per the straight-through contract
Tensor round_tensor(const Tensor& x, RoundMode mode, Rng* rng);

// channel statistics for spatial attention: [N,C,H,W] -> [N,1,H,W]
Tensor channel_mean(const Tensor& x);
Tensor channel_max(const Tensor& x);

}  // namespace wmflow
