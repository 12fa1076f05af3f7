#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "wmflow/ops.hpp"
#include "wmflow/tensor.hpp"

namespace wmflow {

// Tape-free reverse-mode engine over a small fixed op set. Nodes are immutable
// after forward construction; backward() only writes gradients. Creation order
// is a topological order of the DAG, which keeps traversal deterministic.
struct AdNode {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<AdNode>> parents;
  std::function<void(AdNode&)> backprop;
  bool needs_grad = false;
  int64_t id = 0;

  void ensure_grad() {
    if (grad.size() == 0) grad = Tensor::zeros(Kind::Real64, value.shape());
  }
};

class Value {
 public:
  Value() = default;

  static Value constant(Tensor t);
  static Value leaf(Tensor t);  // a trainable parameter; receives a gradient

  bool defined() const { return node_ != nullptr; }
  const Tensor& tensor() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::shared_ptr<AdNode> node() const { return node_; }

  explicit Value(std::shared_ptr<AdNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<AdNode> node_;
};

Value operator+(const Value& a, const Value& b);
Value operator-(const Value& a, const Value& b);
Value operator*(const Value& a, const Value& b);
Value operator/(const Value& a, const Value& b);

Value v_scale(const Value& a, double s);
Value v_offset(const Value& a, double s);
Value v_sigmoid(const Value& a);
Value v_exp(const Value& a);
Value v_relu(const Value& a);
Value v_leaky_relu(const Value& a, double slope);
Value v_round_ste(const Value& a, RoundMode mode, Rng* rng);
Value v_conv2d(const Value& x, const Value& w, const Value& b, int stride, int padding);
Value v_tconv2d(const Value& x, const Value& w, const Value& b, int stride, int padding);
Value v_channel_mean(const Value& x);
Value v_channel_max(const Value& x);
Value v_concat_channels(const Value& a, const Value& b);
Value v_mul_gate(const Value& x, const Value& gate);  // gate [N,1,H,W] over channels
Value v_sum(const Value& a);
Value v_mean(const Value& a);
Value v_mse(const Value& a, const Value& b);

// Reverse-topological traversal from a scalar loss; gradients accumulate
// additively into every leaf reachable from it.
void backward(const Value& loss);

// Max relative error between analytic and central-difference gradients of a
// scalar function. The function must be deterministic (re-seed any rng per
// call); rounding sites should run in RoundMode::Identity for the check.
double grad_check(const std::function<Value(const std::vector<Value>&)>& f,
                  const std::vector<Tensor>& params, double eps);

}  // namespace wmflow
