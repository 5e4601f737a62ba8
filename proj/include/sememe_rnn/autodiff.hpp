// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode automatic differentiation over dense real
// tensors. Every tensor is backed by a row-major Eigen matrix; rank-1 tensors
// are stored as a single row so a batch of vectors is simply more rows.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sememe::ad {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

struct Node {
  Shape shape;
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  // Generation of the tape this node was recorded on; 0 when it is a leaf.
  std::uint64_t generation = 0;
};

}  // namespace detail

/// Shared handle to a tensor node. Copies alias the same storage and gradient.
class Tensor {
 public:
  Tensor() = default;

  /// Rank-2 tensor holding `value`.
  explicit Tensor(Matrix value, bool requires_grad = false);
  Tensor(Matrix value, Shape shape, bool requires_grad = false);

  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);
  static Tensor vector(const Eigen::Ref<const Eigen::VectorXd>& values,
                       bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }

  const Matrix& value() const { return node_->value; }
  /// Direct access for optimizers and initializers; bypasses the tape.
  Matrix& mutable_value() { return node_->value; }
  double item() const;
  double operator()(Index r, Index c) const { return node_->value(r, c); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  bool has_grad() const { return node_->grad.size() != 0; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }

  /// Fresh leaf with a copy of the value and no history.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend class Tape;
  friend Tensor make_result(Matrix value, Shape shape, std::initializer_list<const Tensor*> inputs);

  std::shared_ptr<detail::Node> node_;
};

std::string shape_string(const Shape& shape);

/// Ordered record of differentiable operations on the current thread.
class Tape {
 public:
  using Backward = std::function<void()>;

  /// The tape owned by the calling thread.
  static Tape& active();

  void record(Backward rule);

  /// Accumulates d(loss)/d(t) into every requires_grad tensor reachable from
  /// `loss`, then clears the tape.
  void backward(const Tensor& loss);

  void clear();
  std::size_t size() const { return entries_.size(); }
  std::uint64_t generation() const { return generation_; }
  bool recording() const { return enabled_; }

 private:
  friend class NoGradGuard;
  std::vector<Backward> entries_;
  std::uint64_t generation_ = 1;
  bool enabled_ = true;
};

/// Suspends recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline void backward(const Tensor& loss) { Tape::active().backward(loss); }

// Primitive operations. Each validates shapes and finiteness of its inputs and
// records a backward rule when any input requires a gradient.

/// a (n×k) times b (k×m). A rank-1 left operand yields a rank-1 result.
Tensor matmul(const Tensor& a, const Tensor& b);
/// Element-wise sum; `b` may be a single row broadcast over the rows of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor one_minus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor abs(const Tensor& a);
/// Concatenation along the last axis.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
/// Stacks tensors with equal column counts on top of each other.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, Index begin, Index count);
Tensor slice_rows(const Tensor& a, Index begin, Index count);
/// Column-wise mean over rows, producing a rank-1 tensor.
Tensor mean_rows(const Tensor& a);
/// Sum of all entries as a scalar.
Tensor sum(const Tensor& a);
/// Rows of `table` selected by `ids`, one output row per id.
Tensor gather_rows(const Tensor& table, std::span<const Index> ids);
/// Inverted dropout: identity unless `train`, else a Bernoulli(1-p) mask
/// scaled by 1/(1-p).
Tensor dropout(const Tensor& a, double p, bool train, std::mt19937_64& rng);
/// Mean negative log-likelihood of `targets` under row-wise softmax(logits).
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const Index> targets);

/// Row-wise softmax of a plain matrix (no gradient).
Matrix softmax_rows(const Matrix& logits);

/// Max over components of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
/// with central differences. `loss` is re-evaluated with `x` perturbed in place.
double grad_check(const std::function<Tensor()>& loss, Tensor x, double eps = 1e-5);
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-5);

}  // namespace sememe::ad
