#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "wmflow/autodiff.hpp"
#include "wmflow/subnets.hpp"

namespace wmflow {

// Geometry of one trained model. The watermark map is map_side x map_side
// (one channel), so num_bits == map_side^2, and each down block halves the
// image side: height == map_side * 2^n_blocks. Square covers only.
struct FlowGeometry {
  int height = 32;
  int width = 32;
  int channels = 1;
  int num_layers = 2;  // coupling layers
  int map_side = 8;
  int num_bits = 64;
  int n_feat = 8;
  int n_blocks = 2;

  void validate() const;
  bool operator==(const FlowGeometry&) const = default;
};

FlowGeometry make_geometry(int height, int channels, int map_side, int num_layers, int n_feat);

// One coupling layer: s1 = r1 + round(U(r2));
//                     s2 = r2 * round(exp(sigmoid(S(s1)))) + round(Q(s1)).
// U lifts the map branch to image shape; S and Q project the image branch to
// map shape. The multiplier lands in {1,2,3}, so the inverse never divides
// by zero.
struct CouplingParams {
  SubnetParams u, s, q;
};

struct FlowParams {
  FlowGeometry geom;
  std::vector<CouplingParams> layers;
};

FlowParams init_flow(const FlowGeometry& geom, uint64_t seed);

SubnetConfig u_config(const FlowGeometry& geom);
SubnetConfig s_config(const FlowGeometry& geom);
SubnetConfig q_config(const FlowGeometry& geom);

// canonical flat parameter order: layer 0 (U, S, Q), layer 1 (U, S, Q), ...
std::vector<Tensor*> flow_tensors(FlowParams& params);

// {0,1}^M <-> {-1,+1} map, row-major
Tensor bits_to_map(const std::vector<uint8_t>& bits, int map_side);
std::vector<uint8_t> map_to_bits(const Tensor& map);  // bit = 1 iff value >= 0

struct FlowForward {
  Tensor stego_overflowed;  // Int64 [C,H,W], may exceed [0,255]
  Tensor z;                 // Int64 [1,L,L]
};

struct FlowInverse {
  Tensor cover;      // Int64 [C,H,W] (lossless) or Real64 (lossy)
  Tensor wm_logits;  // Real64 [1,L,L]
};

// Exact integer forward: cover [C,H,W] in [0,255], wm_map [1,1,L,L] of +-1.
FlowForward flow_forward(const Tensor& cover, const Tensor& wm_map, const FlowParams& params);

// Exact inverse of flow_forward. Division must be exact; a nonzero remainder
// proves the stego was modified and raises InexactDivision.
FlowInverse flow_inverse_lossless(const Tensor& stego, const Tensor& z, const FlowParams& params);

// Robust inverse for noised stegos: Real64 division, z_hat defaults to zeros.
FlowInverse flow_inverse_lossy(const Tensor& noised, const FlowParams& params);

// Differentiable graph versions used in training. `params` follows the
// flow_tensors order; mode selects deterministic/stochastic/identity rounding.
std::pair<Value, Value> flow_forward_graph(const Value& cover, const Value& wm_map,
                                           std::span<const Value> params,
                                           const FlowGeometry& geom, RoundMode mode, Rng* rng);
std::pair<Value, Value> flow_inverse_graph(const Value& noised, const Value& z_hat,
                                           std::span<const Value> params,
                                           const FlowGeometry& geom, RoundMode mode, Rng* rng);

}  // namespace wmflow
