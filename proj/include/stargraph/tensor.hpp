#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace stargraph {

/// Row-major matrix of doubles. Used for node features, activations,
/// weights and gradients alike; a bias is a 1 x F tensor.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);
  Tensor2(std::initializer_list<std::initializer_list<double>> rows);

  static Tensor2 zeros_like(const Tensor2& other) {
    return Tensor2(other.rows_, other.cols_);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void fill(double v);
  bool same_shape(const Tensor2& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;

  Tensor2& operator+=(const Tensor2& other);

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a (n x k) times b^T where b is (m x k): result n x m.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);

/// out (n x k) += a (n x m) * b (m x k).
void matmul_nn_acc(const Tensor2& a, const Tensor2& b, Tensor2& out);

/// out (m x k) += a^T (m x n) * b (n x k), a is n x m.
void matmul_tn_acc(const Tensor2& a, const Tensor2& b, Tensor2& out);

Tensor2 add(const Tensor2& a, const Tensor2& b);

}  // namespace stargraph
