#include "wmflow/subnets.hpp"

#include <cmath>

namespace wmflow {

namespace {

constexpr double kLeakySlope = 0.01;

Tensor uniform_init(Shape shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(Kind::Real64, std::move(shape));
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  double* p = t.real_data();
  for (int64_t i = 0; i < t.size(); ++i) p[i] = rng.uniform(-a, a);
  return t;
}

ConvParams make_conv(int out_c, int in_c, int k, Rng& rng, bool zero) {
  ConvParams c;
  if (zero) {
    c.w = Tensor::zeros(Kind::Real64, {out_c, in_c, k, k});
  } else {
    c.w = uniform_init({out_c, in_c, k, k}, in_c * k * k, rng);
  }
  c.b = Tensor::zeros(Kind::Real64, {out_c});
  return c;
}

// transposed-conv weights are stored [in, out, k, k]
ConvParams make_tconv(int in_c, int out_c, int k, Rng& rng) {
  ConvParams c;
  c.w = uniform_init({in_c, out_c, k, k}, in_c * k * k, rng);
  c.b = Tensor::zeros(Kind::Real64, {out_c});
  return c;
}

int widest_channels(const SubnetConfig& cfg) { return cfg.n_feat * (cfg.n_blocks + 1); }

}  // namespace

SubnetParams init_subnet(const SubnetConfig& cfg, Rng& rng) {
  if (cfg.n_feat < 1 || cfg.n_blocks < 0 || cfg.in_channels < 1 || cfg.out_channels < 1)
    throw Error(ErrorCode::BadParams, "invalid subnet config");
  SubnetParams p;
  const bool down = cfg.direction == SubnetConfig::Dir::Down;
  int ch = down ? cfg.n_feat : widest_channels(cfg);
  p.initial = make_conv(ch, cfg.in_channels, 3, rng, false);
  for (int i = 0; i < cfg.n_blocks; ++i) {
    SubnetBlock blk;
    blk.conv = make_conv(ch, ch, 3, rng, false);
    blk.att = make_conv(1, 2, 7, rng, false);
    if (down) {
      blk.resample = make_conv(ch + cfg.n_feat, ch, 4, rng, false);
      ch += cfg.n_feat;
    } else {
      blk.resample = make_tconv(ch, ch - cfg.n_feat, 4, rng);
      ch -= cfg.n_feat;
    }
    p.blocks.push_back(std::move(blk));
  }
  p.final_conv = make_conv(cfg.out_channels, ch, 3, rng, /*zero=*/true);
  return p;
}

std::vector<Tensor*> subnet_tensors(SubnetParams& p) {
  std::vector<Tensor*> out{&p.initial.w, &p.initial.b};
  for (auto& blk : p.blocks) {
    out.push_back(&blk.conv.w);
    out.push_back(&blk.conv.b);
    out.push_back(&blk.att.w);
    out.push_back(&blk.att.b);
    out.push_back(&blk.resample.w);
    out.push_back(&blk.resample.b);
  }
  out.push_back(&p.final_conv.w);
  out.push_back(&p.final_conv.b);
  return out;
}

size_t subnet_tensor_count(const SubnetConfig& cfg) {
  return 4 + 6 * static_cast<size_t>(cfg.n_blocks);
}

Value spatial_attention(const Value& x, const Value& att_w, const Value& att_b) {
  Value stats = v_concat_channels(v_channel_mean(x), v_channel_max(x));
  Value gate = v_sigmoid(v_conv2d(stats, att_w, att_b, 1, 3));
  return v_mul_gate(x, gate);
}

Value subnet_forward(const Value& x, std::span<const Value> params, const SubnetConfig& cfg) {
  if (params.size() != subnet_tensor_count(cfg))
    throw Error(ErrorCode::ShapeMismatch, "subnet parameter count mismatch");
  const bool down = cfg.direction == SubnetConfig::Dir::Down;
  size_t i = 0;
  auto next = [&]() -> const Value& { return params[i++]; };

  const Value& iw = next();
  const Value& ib = next();
  Value h = v_conv2d(x, iw, ib, 1, 1);
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const Value& cw = next();
    const Value& cb = next();
    const Value& aw = next();
    const Value& ab = next();
    const Value& rw = next();
    const Value& rb = next();
    h = v_leaky_relu(v_conv2d(h, cw, cb, 1, 1), kLeakySlope);
    h = spatial_attention(h, aw, ab);
    if (down)
      h = v_leaky_relu(v_conv2d(h, rw, rb, 2, 1), kLeakySlope);
    else
      h = v_leaky_relu(v_tconv2d(h, rw, rb, 2, 1), kLeakySlope);
  }
  const Value& fw = next();
  const Value& fb = next();
  return v_conv2d(h, fw, fb, 1, 1);
}

}  // namespace wmflow
