#include "stargraph/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stargraph/error.hpp"
#include "stargraph/kernels.hpp"

namespace stargraph {
namespace {

std::string shape_str(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged tensor initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor2& Tensor2::operator+=(const Tensor2& other) {
  if (!same_shape(other)) {
    throw ShapeError("cannot add " + shape_str(other) + " to " + shape_str(*this));
  }
  kernels::axpy(1.0, other.values(), values());
  return *this;
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
  Tensor2 out = a;
  out += b;
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a) + " * (" + shape_str(b) + ")^T");
  }
  const auto& k = kernels::active();
  Tensor2 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i).data();
    double* oi = out.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      oi[j] = k.dot(ai, b.row(j).data(), a.cols());
    }
  }
  return out;
}

void matmul_nn_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols()) {
    throw ShapeError("matmul_nn_acc: " + shape_str(a) + " * " + shape_str(b) +
                     " into " + shape_str(out));
  }
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* oi = out.row(i).data();
    for (std::size_t m = 0; m < a.cols(); ++m) {
      const double s = a(i, m);
      if (s != 0.0) k.axpy(s, b.row(m).data(), oi, b.cols());
    }
  }
}

void matmul_tn_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw ShapeError("matmul_tn_acc: (" + shape_str(a) + ")^T * " + shape_str(b) +
                     " into " + shape_str(out));
  }
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* bi = b.row(i).data();
    for (std::size_t m = 0; m < a.cols(); ++m) {
      const double s = a(i, m);
      if (s != 0.0) k.axpy(s, bi, out.row(m).data(), b.cols());
    }
  }
}

}  // namespace stargraph
