#pragma once

#include <span>
#include <vector>

#include "wmflow/autodiff.hpp"
#include "wmflow/rng.hpp"
#include "wmflow/tensor.hpp"

namespace wmflow {

// Up/down-sampling networks used inside each coupling layer: an initial
// convolution, n_blocks sampling blocks (conv + spatial attention + stride-2
// resampling conv), and a final convolution. Down nets halve the spatial size
// and add n_feat channels per block; up nets mirror them with transposed
// convolutions.
struct SubnetConfig {
  enum class Dir { Down, Up };
  Dir direction = Dir::Down;
  int in_channels = 1;
  int out_channels = 1;
  int n_feat = 8;
  int n_blocks = 2;
};

struct ConvParams {
  Tensor w;
  Tensor b;
};

struct SubnetBlock {
  ConvParams conv;      // 3x3, channel-preserving
  ConvParams att;       // 7x7 over [mean,max] channel pair -> 1 gate channel
  ConvParams resample;  // 4x4 stride-2 conv (down) or transposed conv (up)
};

struct SubnetParams {
  ConvParams initial;
  std::vector<SubnetBlock> blocks;
  ConvParams final_conv;
};

// Fan-in scaled uniform init; the final convolution is zeroed so an untrained
// flow starts out near the identity.
SubnetParams init_subnet(const SubnetConfig& cfg, Rng& rng);

// canonical flat ordering used by the optimizer, checkpoints and the graph
std::vector<Tensor*> subnet_tensors(SubnetParams& p);
size_t subnet_tensor_count(const SubnetConfig& cfg);

// features * sigmoid(conv7x7(concat(channel-mean, channel-max))), gate
// broadcast over channels
Value spatial_attention(const Value& x, const Value& att_w, const Value& att_b);

// params must follow the subnet_tensors ordering
Value subnet_forward(const Value& x, std::span<const Value> params, const SubnetConfig& cfg);

}  // namespace wmflow
