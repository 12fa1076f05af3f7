#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "wmflow/error.hpp"

namespace wmflow {

enum class Kind { Int64, Real64 };

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor. Int64 tensors hold exact integers; Real64 tensors
// hold IEEE-754 doubles. All Real64 arithmetic in this library runs in double
// precision with a fixed summation order, so results are reproducible
// bit-for-bit for a fixed seed.
class Tensor {
 public:
  Tensor() : kind_(Kind::Real64) {}

  static Tensor zeros(Kind kind, Shape shape);
  static Tensor full(Kind kind, Shape shape, double value);
  static Tensor from_reals(Shape shape, std::span<const double> values);
  static Tensor from_ints(Shape shape, std::span<const int64_t> values);
  static Tensor scalar(double value);

  Kind kind() const { return kind_; }
  const Shape& shape() const { return shape_; }
  int64_t size() const { return kind_ == Kind::Int64 ? static_cast<int64_t>(idata_.size())
                                                     : static_cast<int64_t>(rdata_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  bool is_scalar() const { return size() == 1; }

  double* real_data();
  const double* real_data() const;
  int64_t* int_data();
  const int64_t* int_data() const;

  // value of element i regardless of kind
  double value_at(int64_t i) const {
    return kind_ == Kind::Int64 ? static_cast<double>(idata_[static_cast<size_t>(i)])
                                : rdata_[static_cast<size_t>(i)];
  }
  int64_t int_at(int64_t i) const;

  Tensor to_real() const;
  // fails with InexactDivision-style NumericOverflow semantics if a value is
  // not integral or exceeds the exactness envelope
  Tensor to_int_exact() const;

  Tensor reshaped(Shape shape) const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Kind kind_;
  Shape shape_;
  std::vector<double> rdata_;
  std::vector<int64_t> idata_;
};

// Magnitude bound on integer-domain values. Doubles represent integers
// exactly up to 2^53; the flow multiplies by at most 3 per layer, so capping
// at 2^50 keeps every intermediate exact.
inline constexpr int64_t kIntEnvelope = int64_t(1) << 50;

void check_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace wmflow
