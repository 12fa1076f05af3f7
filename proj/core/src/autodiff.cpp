#include "wmflow/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace wmflow {

namespace {

int64_t next_node_id() {
  static int64_t counter = 0;
  return ++counter;
}

std::shared_ptr<AdNode> make_node(Tensor value, std::vector<std::shared_ptr<AdNode>> parents,
                                  std::function<void(AdNode&)> backprop) {
  auto n = std::make_shared<AdNode>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backprop = std::move(backprop);
  n->id = next_node_id();
  for (const auto& p : n->parents)
    if (p->needs_grad) n->needs_grad = true;
  return n;
}

// equal shapes, or one side scalar
enum class Bc { None, A, B };

Bc broadcast_kind(const Tensor& a, const Tensor& b, const char* where) {
  if (a.same_shape(b)) return Bc::None;
  if (a.is_scalar()) return Bc::A;
  if (b.is_scalar()) return Bc::B;
  throw Error(ErrorCode::ShapeMismatch, std::string(where) + ": " + shape_str(a.shape()) + " vs " +
                                            shape_str(b.shape()));
  return Bc::None;
}

void accumulate(AdNode& target, const Tensor& delta) {
  target.ensure_grad();
  double* g = target.grad.real_data();
  const double* d = delta.real_data();
  const int64_t n = delta.size();
  if (target.grad.size() == n) {
    for (int64_t i = 0; i < n; ++i) g[i] += d[i];
  } else {
    // scalar parent of a broadcast op
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += d[i];
    g[0] += acc;
  }
}

Tensor binary_eval(const Tensor& a, const Tensor& b, Bc bc, char op) {
  const Tensor& big = (bc == Bc::A) ? b : a;
  Tensor out = Tensor::zeros(Kind::Real64, big.shape());
  const int64_t n = out.size();
  double* o = out.real_data();
  const double* pa = a.real_data();
  const double* pb = b.real_data();
  for (int64_t i = 0; i < n; ++i) {
    const double x = (bc == Bc::A) ? pa[0] : pa[i];
    const double y = (bc == Bc::B) ? pb[0] : pb[i];
    switch (op) {
      case '+': o[i] = x + y; break;
      case '-': o[i] = x - y; break;
      case '*': o[i] = x * y; break;
      case '/':
        if (y == 0.0) throw Error(ErrorCode::DivisionByZero, "elementwise division by exact zero");
        o[i] = x / y;
        break;
    }
  }
  return out;
}

Tensor map_unary(const Tensor& a, const std::function<double(double)>& f) {
  Tensor out = Tensor::zeros(Kind::Real64, a.shape());
  const double* p = a.real_data();
  double* o = out.real_data();
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) o[i] = f(p[i]);
  return out;
}

}  // namespace

Value Value::constant(Tensor t) {
  auto n = make_node(t.to_real(), {}, nullptr);
  n->needs_grad = false;
  return Value(n);
}

Value Value::leaf(Tensor t) {
  auto n = make_node(t.to_real(), {}, nullptr);
  n->needs_grad = true;
  return Value(n);
}

Value operator+(const Value& a, const Value& b) {
  Bc bc = broadcast_kind(a.tensor(), b.tensor(), "add");
  Tensor out = binary_eval(a.tensor(), b.tensor(), bc, '+');
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn](AdNode& self) {
    if (an->needs_grad) accumulate(*an, self.grad);
    if (bn->needs_grad) accumulate(*bn, self.grad);
  }));
}

Value operator-(const Value& a, const Value& b) {
  Bc bc = broadcast_kind(a.tensor(), b.tensor(), "sub");
  Tensor out = binary_eval(a.tensor(), b.tensor(), bc, '-');
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn](AdNode& self) {
    if (an->needs_grad) accumulate(*an, self.grad);
    if (bn->needs_grad) {
      Tensor neg = map_unary(self.grad, [](double g) { return -g; });
      accumulate(*bn, neg);
    }
  }));
}

Value operator*(const Value& a, const Value& b) {
  Bc bc = broadcast_kind(a.tensor(), b.tensor(), "mul");
  Tensor out = binary_eval(a.tensor(), b.tensor(), bc, '*');
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn, bc](AdNode& self) {
    const int64_t n = self.grad.size();
    const double* g = self.grad.real_data();
    if (an->needs_grad) {
      const double* pb = bn->value.real_data();
      Tensor da = Tensor::zeros(Kind::Real64, self.value.shape());
      double* d = da.real_data();
      for (int64_t i = 0; i < n; ++i) d[i] = g[i] * ((bc == Bc::B) ? pb[0] : pb[i]);
      accumulate(*an, da);
    }
    if (bn->needs_grad) {
      const double* pa = an->value.real_data();
      Tensor db = Tensor::zeros(Kind::Real64, self.value.shape());
      double* d = db.real_data();
      for (int64_t i = 0; i < n; ++i) d[i] = g[i] * ((bc == Bc::A) ? pa[0] : pa[i]);
      accumulate(*bn, db);
    }
  }));
}

Value operator/(const Value& a, const Value& b) {
  Bc bc = broadcast_kind(a.tensor(), b.tensor(), "div");
  Tensor out = binary_eval(a.tensor(), b.tensor(), bc, '/');
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn, bc](AdNode& self) {
    const int64_t n = self.grad.size();
    const double* g = self.grad.real_data();
    const double* pa = an->value.real_data();
    const double* pb = bn->value.real_data();
    if (an->needs_grad) {
      Tensor da = Tensor::zeros(Kind::Real64, self.value.shape());
      double* d = da.real_data();
      for (int64_t i = 0; i < n; ++i) d[i] = g[i] / ((bc == Bc::B) ? pb[0] : pb[i]);
      accumulate(*an, da);
    }
    if (bn->needs_grad) {
      Tensor db = Tensor::zeros(Kind::Real64, self.value.shape());
      double* d = db.real_data();
      for (int64_t i = 0; i < n; ++i) {
        const double x = (bc == Bc::A) ? pa[0] : pa[i];
        const double y = (bc == Bc::B) ? pb[0] : pb[i];
        d[i] = -g[i] * x / (y * y);
      }
      accumulate(*bn, db);
    }
  }));
}

Value v_scale(const Value& a, double s) {
  auto an = a.node();
  Tensor out = map_unary(a.tensor(), [s](double x) { return x * s; });
  return Value(make_node(std::move(out), {an}, [an, s](AdNode& self) {
    if (!an->needs_grad) return;
    Tensor d = map_unary(self.grad, [s](double g) { return g * s; });
    accumulate(*an, d);
  }));
}

Value v_offset(const Value& a, double s) {
  auto an = a.node();
  Tensor out = map_unary(a.tensor(), [s](double x) { return x + s; });
  return Value(make_node(std::move(out), {an}, [an](AdNode& self) {
    if (an->needs_grad) accumulate(*an, self.grad);
  }));
}

Value v_sigmoid(const Value& a) {
  auto an = a.node();
  Tensor out = map_unary(a.tensor(), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return Value(make_node(std::move(out), {an}, [an](AdNode& self) {
    if (!an->needs_grad) return;
    const double* y = self.value.real_data();
    const double* g = self.grad.real_data();
    Tensor d = Tensor::zeros(Kind::Real64, self.value.shape());
    double* pd = d.real_data();
    for (int64_t i = 0; i < d.size(); ++i) pd[i] = g[i] * y[i] * (1.0 - y[i]);
    accumulate(*an, d);
  }));
}

Value v_exp(const Value& a) {
  auto an = a.node();
  Tensor out = map_unary(a.tensor(), [](double x) { return std::exp(x); });
  return Value(make_node(std::move(out), {an}, [an](AdNode& self) {
    if (!an->needs_grad) return;
    const double* y = self.value.real_data();
    const double* g = self.grad.real_data();
    Tensor d = Tensor::zeros(Kind::Real64, self.value.shape());
    double* pd = d.real_data();
    for (int64_t i = 0; i < d.size(); ++i) pd[i] = g[i] * y[i];
    accumulate(*an, d);
  }));
}

Value v_relu(const Value& a) {
  auto an = a.node();
  Tensor out = map_unary(a.tensor(), [](double x) { return x > 0.0 ? x : 0.0; });
  return Value(make_node(std::move(out), {an}, [an](AdNode& self) {
    if (!an->needs_grad) return;
    const double* x = an->value.real_data();
    const double* g = self.grad.real_data();
    Tensor d = Tensor::zeros(Kind::Real64, self.value.shape());
    double* pd = d.real_data();
    for (int64_t i = 0; i < d.size(); ++i) pd[i] = x[i] > 0.0 ? g[i] : 0.0;
    accumulate(*an, d);
  }));
}

Value v_leaky_relu(const Value& a, double slope) {
  auto an = a.node();
  Tensor out = map_unary(a.tensor(), [slope](double x) { return x > 0.0 ? x : slope * x; });
  return Value(make_node(std::move(out), {an}, [an, slope](AdNode& self) {
    if (!an->needs_grad) return;
    const double* x = an->value.real_data();
    const double* g = self.grad.real_data();
    Tensor d = Tensor::zeros(Kind::Real64, self.value.shape());
    double* pd = d.real_data();
    for (int64_t i = 0; i < d.size(); ++i) pd[i] = x[i] > 0.0 ? g[i] : slope * g[i];
    accumulate(*an, d);
  }));
}

Value v_round_ste(const Value& a, RoundMode mode, Rng* rng) {
  auto an = a.node();
  Tensor out = round_tensor(a.tensor(), mode, rng);
  // straight-through: identity Jacobian
  return Value(make_node(std::move(out), {an}, [an](AdNode& self) {
    if (an->needs_grad) accumulate(*an, self.grad);
  }));
}

Value v_conv2d(const Value& x, const Value& w, const Value& b, int stride, int padding) {
  auto xn = x.node(), wn = w.node(), bn = b.node();
  Tensor out = conv2d(x.tensor(), w.tensor(), b.tensor(), stride, padding);
  return Value(make_node(std::move(out), {xn, wn, bn}, [xn, wn, bn, stride, padding](AdNode& self) {
    if (xn->needs_grad) {
      Tensor gx = conv2d_grad_input(self.grad, wn->value, stride, padding, xn->value.dim(2),
                                    xn->value.dim(3));
      accumulate(*xn, gx);
    }
    if (wn->needs_grad) {
      Tensor gw = conv2d_grad_weight(self.grad, xn->value, stride, padding, wn->value.dim(2));
      accumulate(*wn, gw);
    }
    if (bn->needs_grad) accumulate(*bn, conv2d_grad_bias(self.grad));
  }));
}

Value v_tconv2d(const Value& x, const Value& w, const Value& b, int stride, int padding) {
  auto xn = x.node(), wn = w.node(), bn = b.node();
  Tensor out = transposed_conv2d(x.tensor(), w.tensor(), b.tensor(), stride, padding);
  return Value(make_node(std::move(out), {xn, wn, bn}, [xn, wn, bn, stride, padding](AdNode& self) {
    if (xn->needs_grad)
      accumulate(*xn, transposed_conv2d_grad_input(self.grad, wn->value, stride, padding));
    if (wn->needs_grad)
      accumulate(*wn, transposed_conv2d_grad_weight(self.grad, xn->value, stride, padding,
                                                    wn->value.dim(2)));
    if (bn->needs_grad) accumulate(*bn, conv2d_grad_bias(self.grad));
  }));
}

Value v_channel_mean(const Value& x) {
  auto xn = x.node();
  Tensor out = channel_mean(x.tensor());
  return Value(make_node(std::move(out), {xn}, [xn](AdNode& self) {
    if (!xn->needs_grad) return;
    const int n = xn->value.dim(0), c = xn->value.dim(1);
    const int64_t plane = int64_t(xn->value.dim(2)) * xn->value.dim(3);
    Tensor d = Tensor::zeros(Kind::Real64, xn->value.shape());
    double* pd = d.real_data();
    const double* g = self.grad.real_data();
    for (int nn = 0; nn < n; ++nn)
      for (int cc = 0; cc < c; ++cc)
        for (int64_t i = 0; i < plane; ++i)
          pd[(int64_t(nn) * c + cc) * plane + i] = g[nn * plane + i] / c;
    accumulate(*xn, d);
  }));
}

Value v_channel_max(const Value& x) {
  auto xn = x.node();
  Tensor out = channel_max(x.tensor());
  return Value(make_node(std::move(out), {xn}, [xn](AdNode& self) {
    if (!xn->needs_grad) return;
    const int n = xn->value.dim(0), c = xn->value.dim(1);
    const int64_t plane = int64_t(xn->value.dim(2)) * xn->value.dim(3);
    Tensor d = Tensor::zeros(Kind::Real64, xn->value.shape());
    double* pd = d.real_data();
    const double* g = self.grad.real_data();
    const double* xv = xn->value.real_data();
    for (int nn = 0; nn < n; ++nn)
      for (int64_t i = 0; i < plane; ++i) {
        int best = 0;
        double bv = xv[int64_t(nn) * c * plane + i];
        for (int cc = 1; cc < c; ++cc) {
          double v = xv[(int64_t(nn) * c + cc) * plane + i];
          if (v > bv) { bv = v; best = cc; }
        }
        pd[(int64_t(nn) * c + best) * plane + i] = g[nn * plane + i];
      }
    accumulate(*xn, d);
  }));
}

Value v_concat_channels(const Value& a, const Value& b) {
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (ta.ndim() != 4 || tb.ndim() != 4 || ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(2) ||
      ta.dim(3) != tb.dim(3))
    throw Error(ErrorCode::ShapeMismatch, "concat_channels shape mismatch");
  const int n = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1);
  const int64_t plane = int64_t(ta.dim(2)) * ta.dim(3);
  Tensor out = Tensor::zeros(Kind::Real64, {n, ca + cb, ta.dim(2), ta.dim(3)});
  double* po = out.real_data();
  const double* pa = ta.real_data();
  const double* pb = tb.real_data();
  for (int nn = 0; nn < n; ++nn) {
    std::copy(pa + int64_t(nn) * ca * plane, pa + int64_t(nn + 1) * ca * plane,
              po + int64_t(nn) * (ca + cb) * plane);
    std::copy(pb + int64_t(nn) * cb * plane, pb + int64_t(nn + 1) * cb * plane,
              po + int64_t(nn) * (ca + cb) * plane + int64_t(ca) * plane);
  }
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn, ca, cb, plane, n](AdNode& self) {
    const double* g = self.grad.real_data();
    if (an->needs_grad) {
      Tensor da = Tensor::zeros(Kind::Real64, an->value.shape());
      double* d = da.real_data();
      for (int nn = 0; nn < n; ++nn)
        std::copy(g + int64_t(nn) * (ca + cb) * plane, g + int64_t(nn) * (ca + cb) * plane + int64_t(ca) * plane,
                  d + int64_t(nn) * ca * plane);
      accumulate(*an, da);
    }
    if (bn->needs_grad) {
      Tensor db = Tensor::zeros(Kind::Real64, bn->value.shape());
      double* d = db.real_data();
      for (int nn = 0; nn < n; ++nn)
        std::copy(g + int64_t(nn) * (ca + cb) * plane + int64_t(ca) * plane,
                  g + int64_t(nn + 1) * (ca + cb) * plane, d + int64_t(nn) * cb * plane);
      accumulate(*bn, db);
    }
  }));
}

Value v_mul_gate(const Value& x, const Value& gate) {
  const Tensor& tx = x.tensor();
  const Tensor& tg = gate.tensor();
  if (tx.ndim() != 4 || tg.ndim() != 4 || tg.dim(1) != 1 || tx.dim(0) != tg.dim(0) ||
      tx.dim(2) != tg.dim(2) || tx.dim(3) != tg.dim(3))
    throw Error(ErrorCode::ShapeMismatch, "mul_gate expects gate [N,1,H,W]");
  const int n = tx.dim(0), c = tx.dim(1);
  const int64_t plane = int64_t(tx.dim(2)) * tx.dim(3);
  Tensor out = Tensor::zeros(Kind::Real64, tx.shape());
  double* po = out.real_data();
  const double* px = tx.real_data();
  const double* pg = tg.real_data();
  for (int nn = 0; nn < n; ++nn)
    for (int cc = 0; cc < c; ++cc)
      for (int64_t i = 0; i < plane; ++i)
        po[(int64_t(nn) * c + cc) * plane + i] =
            px[(int64_t(nn) * c + cc) * plane + i] * pg[nn * plane + i];
  auto xn = x.node(), gn = gate.node();
  return Value(make_node(std::move(out), {xn, gn}, [xn, gn, n, c, plane](AdNode& self) {
    const double* g = self.grad.real_data();
    const double* px = xn->value.real_data();
    const double* pg = gn->value.real_data();
    if (xn->needs_grad) {
      Tensor dx = Tensor::zeros(Kind::Real64, xn->value.shape());
      double* d = dx.real_data();
      for (int nn = 0; nn < n; ++nn)
        for (int cc = 0; cc < c; ++cc)
          for (int64_t i = 0; i < plane; ++i)
            d[(int64_t(nn) * c + cc) * plane + i] =
                g[(int64_t(nn) * c + cc) * plane + i] * pg[nn * plane + i];
      accumulate(*xn, dx);
    }
    if (gn->needs_grad) {
      Tensor dg = Tensor::zeros(Kind::Real64, gn->value.shape());
      double* d = dg.real_data();
      for (int nn = 0; nn < n; ++nn)
        for (int64_t i = 0; i < plane; ++i) {
          double acc = 0.0;
          for (int cc = 0; cc < c; ++cc)
            acc += g[(int64_t(nn) * c + cc) * plane + i] * px[(int64_t(nn) * c + cc) * plane + i];
          d[nn * plane + i] = acc;
        }
      accumulate(*gn, dg);
    }
  }));
}

Value v_sum(const Value& a) {
  auto an = a.node();
  const double* p = a.tensor().real_data();
  double acc = 0.0;
  for (int64_t i = 0; i < a.tensor().size(); ++i) acc += p[i];
  return Value(make_node(Tensor::scalar(acc), {an}, [an](AdNode& self) {
    if (!an->needs_grad) return;
    const double g = self.grad.real_data()[0];
    Tensor d = Tensor::full(Kind::Real64, an->value.shape(), g);
    accumulate(*an, d);
  }));
}

Value v_mean(const Value& a) {
  auto an = a.node();
  const int64_t n = a.tensor().size();
  const double* p = a.tensor().real_data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += p[i];
  return Value(make_node(Tensor::scalar(acc / static_cast<double>(n)), {an}, [an, n](AdNode& self) {
    if (!an->needs_grad) return;
    const double g = self.grad.real_data()[0] / static_cast<double>(n);
    Tensor d = Tensor::full(Kind::Real64, an->value.shape(), g);
    accumulate(*an, d);
  }));
}

Value v_mse(const Value& a, const Value& b) {
  check_same_shape(a.tensor(), b.tensor(), "mse");
  auto an = a.node(), bn = b.node();
  const int64_t n = a.tensor().size();
  const double* pa = a.tensor().real_data();
  const double* pb = b.tensor().real_data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  return Value(make_node(Tensor::scalar(acc / static_cast<double>(n)), {an, bn},
                         [an, bn, n](AdNode& self) {
    const double g = 2.0 * self.grad.real_data()[0] / static_cast<double>(n);
    const double* pa = an->value.real_data();
    const double* pb = bn->value.real_data();
    if (an->needs_grad) {
      Tensor d = Tensor::zeros(Kind::Real64, an->value.shape());
      double* pd = d.real_data();
      for (int64_t i = 0; i < n; ++i) pd[i] = g * (pa[i] - pb[i]);
      accumulate(*an, d);
    }
    if (bn->needs_grad) {
      Tensor d = Tensor::zeros(Kind::Real64, bn->value.shape());
      double* pd = d.real_data();
      for (int64_t i = 0; i < n; ++i) pd[i] = -g * (pa[i] - pb[i]);
      accumulate(*bn, d);
    }
  }));
}

void backward(const Value& loss) {
  if (!loss.defined() || loss.tensor().size() != 1)
    throw Error(ErrorCode::NonScalarLoss, "backward requires a scalar loss");
  // collect the reachable subgraph; creation ids give a topological order
  std::vector<std::shared_ptr<AdNode>> order;
  std::unordered_set<AdNode*> seen;
  std::vector<std::shared_ptr<AdNode>> stack{loss.node()};
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    order.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p);
  }
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a->id > b->id; });
  loss.node()->ensure_grad();
  loss.node()->grad.real_data()[0] = 1.0;
  for (const auto& n : order) {
    if (!n->backprop || !n->needs_grad) continue;
    n->ensure_grad();
    n->backprop(*n);
  }
}

double grad_check(const std::function<Value(const std::vector<Value>&)>& f,
                  const std::vector<Tensor>& params, double eps) {
  std::vector<Value> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(Value::leaf(p));
  Value loss = f(leaves);
  backward(loss);
  std::vector<Tensor> analytic;
  for (auto& l : leaves) {
    l.node()->ensure_grad();
    analytic.push_back(l.node()->grad);
  }

  auto eval = [&](const std::vector<Tensor>& ps) {
    std::vector<Value> vs;
    vs.reserve(ps.size());
    for (const auto& p : ps) vs.push_back(Value::constant(p));
    return f(vs).tensor().value_at(0);
  };

  double worst = 0.0;
  std::vector<Tensor> probe = params;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    probe[pi] = probe[pi].to_real();
    double* data = probe[pi].real_data();
    const double* ga = analytic[pi].real_data();
    for (int64_t i = 0; i < probe[pi].size(); ++i) {
      const double keep = data[i];
      data[i] = keep + eps;
      const double fp = eval(probe);
      data[i] = keep - eps;
      const double fm = eval(probe);
      data[i] = keep;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double denom = std::max(1e-8, std::abs(ga[i]) + std::abs(numeric));
      worst = std::max(worst, std::abs(ga[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace wmflow
