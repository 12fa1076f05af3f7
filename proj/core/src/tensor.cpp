#include "wmflow/tensor.hpp"

#include <cmath>
#include <sstream>

namespace wmflow {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(Kind kind, Shape shape) {
  for (int d : shape)
    if (d <= 0) throw Error(ErrorCode::ShapeMismatch, "nonpositive dimension in " + shape_str(shape));
  Tensor t;
  t.kind_ = kind;
  t.shape_ = std::move(shape);
  int64_t n = shape_numel(t.shape_);
  if (kind == Kind::Int64)
    t.idata_.assign(static_cast<size_t>(n), 0);
  else
    t.rdata_.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(Kind kind, Shape shape, double value) {
  Tensor t = zeros(kind, std::move(shape));
  if (kind == Kind::Int64) {
    int64_t v = static_cast<int64_t>(value);
    for (auto& x : t.idata_) x = v;
  } else {
    for (auto& x : t.rdata_) x = value;
  }
  return t;
}

Tensor Tensor::from_reals(Shape shape, std::span<const double> values) {
  Tensor t = zeros(Kind::Real64, std::move(shape));
  if (static_cast<int64_t>(values.size()) != t.size())
    throw Error(ErrorCode::ShapeMismatch, "value count does not match shape");
  std::copy(values.begin(), values.end(), t.rdata_.begin());
  return t;
}

Tensor Tensor::from_ints(Shape shape, std::span<const int64_t> values) {
  Tensor t = zeros(Kind::Int64, std::move(shape));
  if (static_cast<int64_t>(values.size()) != t.size())
    throw Error(ErrorCode::ShapeMismatch, "value count does not match shape");
  std::copy(values.begin(), values.end(), t.idata_.begin());
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t = zeros(Kind::Real64, {1});
  t.rdata_[0] = value;
  return t;
}

double* Tensor::real_data() {
  if (kind_ != Kind::Real64) throw Error(ErrorCode::ShapeMismatch, "real_data() on Int64 tensor");
  return rdata_.data();
}
const double* Tensor::real_data() const {
  if (kind_ != Kind::Real64) throw Error(ErrorCode::ShapeMismatch, "real_data() on Int64 tensor");
  return rdata_.data();
}
int64_t* Tensor::int_data() {
  if (kind_ != Kind::Int64) throw Error(ErrorCode::ShapeMismatch, "int_data() on Real64 tensor");
  return idata_.data();
}
const int64_t* Tensor::int_data() const {
  if (kind_ != Kind::Int64) throw Error(ErrorCode::ShapeMismatch, "int_data() on Real64 tensor");
  return idata_.data();
}

int64_t Tensor::int_at(int64_t i) const {
  if (kind_ == Kind::Int64) return idata_[static_cast<size_t>(i)];
  double v = rdata_[static_cast<size_t>(i)];
  if (!std::isfinite(v) || v != std::nearbyint(v))
    throw Error(ErrorCode::NumericOverflow, "non-integral value where integer expected");
  return static_cast<int64_t>(v);
}

Tensor Tensor::to_real() const {
  if (kind_ == Kind::Real64) return *this;
  Tensor t = zeros(Kind::Real64, shape_);
  for (size_t i = 0; i < idata_.size(); ++i) t.rdata_[i] = static_cast<double>(idata_[i]);
  return t;
}

Tensor Tensor::to_int_exact() const {
  if (kind_ == Kind::Int64) return *this;
  Tensor t = zeros(Kind::Int64, shape_);
  for (size_t i = 0; i < rdata_.size(); ++i) {
    double v = rdata_[i];
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "non-finite value in to_int_exact");
    if (v != std::nearbyint(v)) throw Error(ErrorCode::NumericOverflow, "non-integral value in to_int_exact");
    if (std::abs(v) > static_cast<double>(kIntEnvelope))
      throw Error(ErrorCode::NumericOverflow, "value outside the Int64-safe envelope");
    t.idata_[i] = static_cast<int64_t>(v);
  }
  return t;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != size())
    throw Error(ErrorCode::ShapeMismatch,
                "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::ShapeMismatch, std::string(where) + ": " + shape_str(a.shape()) +
                                              " vs " + shape_str(b.shape()));
}

}  // namespace wmflow
