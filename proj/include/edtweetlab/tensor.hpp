#ifndef EDTWEETLAB_TENSOR_HPP_
#define EDTWEETLAB_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "edtweetlab/util.hpp"

namespace edtweetlab {

// Dense row-major matrix of doubles. Everything in the network stack is rank
// 2; scalars are 1x1 and row vectors 1xN.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data_[0] = v;
    return t;
  }

  static Tensor row(std::vector<double> values) {
    Tensor t;
    t.rows_ = 1;
    t.cols_ = values.size();
    t.data_ = std::move(values);
    return t;
  }

  static Tensor from_rows(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols) throw InvalidArgument("tensor data does not match shape");
    Tensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.data_ = std::move(values);
    return t;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const {
    if (size() != 1) throw InvalidArgument("item() on a non-scalar tensor");
    return data_[0];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace ten {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(op) + ": shape mismatch");
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double av = a.at(i, k);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out.at(i, j) += av * b.at(k, j);
      }
    }
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

// a + broadcast of row vector b over every row of a
inline Tensor add_rowwise(const Tensor& a, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) {
    throw InvalidArgument("add_rowwise: bias must be 1 x cols(a)");
  }
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) += b.at(0, j);
  }
  return out;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

// multiply each row i of a by m[i] (m is a column vector rows(a) x 1)
inline Tensor scale_rows(const Tensor& a, const Tensor& m) {
  if (m.rows() != a.rows() || m.cols() != 1) {
    throw InvalidArgument("scale_rows: multiplier must be rows(a) x 1");
  }
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double f = m.at(i, 0);
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) *= f;
  }
  return out;
}

template <typename F>
inline Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
  return out;
}

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor sigmoid(const Tensor& a) { return map(a, sigmoid_scalar); }

inline Tensor tanh(const Tensor& a) {
  return map(a, [](double x) { return std::tanh(x); });
}

inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double gelu_grad_scalar(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline Tensor gelu(const Tensor& a) { return map(a, gelu_scalar); }

// Row-wise softmax with max subtraction. -inf entries get exactly zero
// weight; each row must keep at least one finite entry.
inline Tensor softmax_rows(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.cols(); ++j) mx = std::max(mx, a.at(i, j));
    if (!std::isfinite(mx)) throw InvalidArgument("softmax_rows: fully masked row");
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      double e = std::exp(a.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) /= sum;
  }
  return out;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("concat_cols: row counts differ");
  Tensor out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, a.cols() + j) = b.at(i, j);
  }
  return out;
}

inline Tensor slice_cols(const Tensor& a, std::size_t first, std::size_t count) {
  if (first + count > a.cols()) throw InvalidArgument("slice_cols: out of range");
  Tensor out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = a.at(i, first + j);
  }
  return out;
}

inline Tensor slice_rows(const Tensor& a, std::size_t first, std::size_t count) {
  if (first + count > a.rows()) throw InvalidArgument("slice_rows: out of range");
  Tensor out(count, a.cols());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(first + i, j);
  }
  return out;
}

inline double sum(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

inline Tensor col_sums(const Tensor& a) {
  Tensor out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(0, j) += a.at(i, j);
  }
  return out;
}

}  // namespace ten

}  // namespace edtweetlab

#endif  // EDTWEETLAB_TENSOR_HPP_
