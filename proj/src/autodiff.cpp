// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sememe::ad {

namespace {

Index shape_product(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

void require_finite(const char* op, const Tensor& t) {
  if (!t.value().allFinite()) {
    throw NonFiniteError(std::string(op) + ": non-finite input of shape " +
                         shape_string(t.shape()));
  }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                   " vs " + shape_string(b.shape()));
}

template <typename Expr>
void accumulate(detail::Node& node, const Expr& g) {
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

}  // namespace

Tensor make_result(Matrix value, Shape shape, std::initializer_list<const Tensor*> inputs) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->shape = std::move(shape);
  Tape& tape = Tape::active();
  if (tape.recording() && any_requires_grad(inputs)) {
    node->requires_grad = true;
    node->generation = tape.generation();
  }
  return Tensor(std::move(node));
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Matrix value, bool requires_grad)
    : Tensor(value, Shape{value.rows(), value.cols()}, requires_grad) {}

Tensor::Tensor(Matrix value, Shape shape, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape.empty() || shape.size() > 2 ||
      std::any_of(shape.begin(), shape.end(), [](Index d) { return d < 0; })) {
    throw ShapeError("tensor: unsupported shape " + shape_string(shape));
  }
  if (shape_product(shape) != value.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape) + " does not match " +
                     std::to_string(value.size()) + " values");
  }
  if (shape.size() == 1) value.resize(1, shape[0]);
  node_->value = std::move(value);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  Matrix m(1, static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) m(0, i++) = v;
  return Tensor(std::move(m), Shape{static_cast<Index>(values.size())}, requires_grad);
}

Tensor Tensor::vector(const Eigen::Ref<const Eigen::VectorXd>& values, bool requires_grad) {
  Matrix m = values.transpose();
  return Tensor(std::move(m), Shape{values.size()}, requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r ? static_cast<Index>(rows.begin()->size()) : 0;
  Matrix m(r, c);
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != c) throw ShapeError("tensor: ragged matrix literal");
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return Tensor(std::move(m), Shape{1}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Matrix m;
  if (shape.size() == 1) {
    m = Matrix::Zero(1, shape[0]);
  } else if (shape.size() == 2) {
    m = Matrix::Zero(shape[0], shape[1]);
  }
  return Tensor(std::move(m), std::move(shape), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item: tensor of shape " + shape_string(shape()) + " is not a scalar");
  }
  return node_->value(0, 0);
}

Tensor Tensor::detach() const { return Tensor(node_->value, node_->shape, false); }

// ---------------------------------------------------------------------------
// Tape

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(Backward rule) { entries_.push_back(std::move(rule)); }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw TapeError("backward: loss must be a scalar, got " +
                    (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  const auto& node = loss.node();
  if (!node->requires_grad || node->generation != generation_) {
    throw TapeError("backward: loss was not produced on the current tape "
                    "(backward already ran, or no differentiable forward pass)");
  }
  accumulate(*node, Matrix::Ones(1, 1));
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  clear();
}

void Tape::clear() {
  entries_.clear();
  ++generation_;
}

NoGradGuard::NoGradGuard() : previous_(Tape::active().enabled_) {
  Tape::active().enabled_ = false;
}

NoGradGuard::~NoGradGuard() { Tape::active().enabled_ = previous_; }

// ---------------------------------------------------------------------------
// Operations

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_finite("matmul", a);
  require_finite("matmul", b);
  // A rank-1 right operand acts as a column vector.
  const bool column = b.rank() == 1;
  const Index inner = column ? b.cols() : b.rows();
  if (a.cols() != inner) mismatch("matmul", a, b);

  Matrix value;
  Shape shape;
  if (column) {
    value = (a.value() * b.value().transpose()).transpose();
    shape = {a.rows()};
  } else {
    value = a.value() * b.value();
    shape = a.rank() == 1 ? Shape{b.cols()} : Shape{a.rows(), b.cols()};
  }
  Tensor out = make_result(std::move(value), std::move(shape), {&a, &b});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), bn = b.node(), on = out.node(), column] {
      if (on->grad.size() == 0) return;
      if (column) {
        // out (1×n) = (A x)^T
        accumulate(*an, on->grad.transpose() * bn->value);
        accumulate(*bn, on->grad * an->value);
      } else {
        accumulate(*an, on->grad * bn->value.transpose());
        accumulate(*bn, an->value.transpose() * on->grad);
      }
    });
  }
  return out;
}

namespace {

enum class Broadcast { None, Rows };

Broadcast elementwise_shape(const char* op, const Tensor& a, const Tensor& b, bool allow_rows) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::None;
  if (allow_rows && b.rows() == 1 && a.cols() == b.cols()) return Broadcast::Rows;
  mismatch(op, a, b);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_finite("add", a);
  require_finite("add", b);
  const Broadcast mode = elementwise_shape("add", a, b, true);
  Matrix value = a.value();
  if (mode == Broadcast::Rows) {
    value.rowwise() += b.value().row(0);
  } else {
    value += b.value();
  }
  Tensor out = make_result(std::move(value), a.shape(), {&a, &b});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), bn = b.node(), on = out.node(), mode] {
      if (on->grad.size() == 0) return;
      accumulate(*an, on->grad);
      if (mode == Broadcast::Rows) {
        accumulate(*bn, on->grad.colwise().sum());
      } else {
        accumulate(*bn, on->grad);
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_finite("sub", a);
  require_finite("sub", b);
  elementwise_shape("sub", a, b, false);
  Tensor out = make_result(a.value() - b.value(), a.shape(), {&a, &b});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), bn = b.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      accumulate(*an, on->grad);
      accumulate(*bn, -on->grad);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_finite("mul", a);
  require_finite("mul", b);
  elementwise_shape("mul", a, b, false);
  Tensor out = make_result(a.value().cwiseProduct(b.value()), a.shape(), {&a, &b});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), bn = b.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      accumulate(*an, on->grad.cwiseProduct(bn->value));
      accumulate(*bn, on->grad.cwiseProduct(an->value));
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  require_finite("scale", a);
  Tensor out = make_result(a.value() * factor, a.shape(), {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node(), factor] {
      if (on->grad.size() == 0) return;
      accumulate(*an, on->grad * factor);
    });
  }
  return out;
}

Tensor one_minus(const Tensor& a) {
  require_finite("one_minus", a);
  Tensor out = make_result((1.0 - a.value().array()).matrix(), a.shape(), {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      accumulate(*an, -on->grad);
    });
  }
  return out;
}

namespace {

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor sigmoid(const Tensor& a) {
  require_finite("sigmoid", a);
  Tensor out = make_result(a.value().unaryExpr(&stable_sigmoid), a.shape(), {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      const auto& y = on->value.array();
      accumulate(*an, (on->grad.array() * y * (1.0 - y)).matrix());
    });
  }
  return out;
}

Tensor tanh(const Tensor& a) {
  require_finite("tanh", a);
  Tensor out = make_result(a.value().array().tanh().matrix(), a.shape(), {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      const auto& y = on->value.array();
      accumulate(*an, (on->grad.array() * (1.0 - y.square())).matrix());
    });
  }
  return out;
}

Tensor abs(const Tensor& a) {
  require_finite("abs", a);
  Tensor out = make_result(a.value().cwiseAbs(), a.shape(), {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      // Subgradient 0 at the kink.
      accumulate(*an, (on->grad.array() * an->value.array().sign()).matrix());
    });
  }
  return out;
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  bool rank2 = false;
  for (const Tensor& p : parts) {
    require_finite("concat", p);
    if (p.rows() != rows) mismatch("concat", parts.front(), p);
    cols += p.cols();
    rank2 = rank2 || p.rank() == 2;
  }
  Matrix value(rows, cols);
  Index offset = 0;
  for (const Tensor& p : parts) {
    value.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  Shape shape = rank2 ? Shape{rows, cols} : Shape{cols};

  auto node = make_result(std::move(value), std::move(shape), {});
  bool needs = false;
  for (const Tensor& p : parts) needs = needs || p.requires_grad();
  Tape& tape = Tape::active();
  if (needs && tape.recording()) {
    node.node()->requires_grad = true;
    node.node()->generation = tape.generation();
    std::vector<std::shared_ptr<detail::Node>> inputs;
    inputs.reserve(parts.size());
    for (const Tensor& p : parts) inputs.push_back(p.node());
    tape.record([inputs = std::move(inputs), on = node.node()] {
      if (on->grad.size() == 0) return;
      Index off = 0;
      for (const auto& in : inputs) {
        const Index c = in->value.cols();
        accumulate(*in, on->grad.middleCols(off, c));
        off += c;
      }
    });
  }
  return node;
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Tensor& p : parts) {
    require_finite("concat_rows", p);
    if (p.cols() != cols) mismatch("concat_rows", parts.front(), p);
    rows += p.rows();
  }
  Matrix value(rows, cols);
  Index offset = 0;
  for (const Tensor& p : parts) {
    value.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  auto node = make_result(std::move(value), Shape{rows, cols}, {});
  bool needs = false;
  for (const Tensor& p : parts) needs = needs || p.requires_grad();
  Tape& tape = Tape::active();
  if (needs && tape.recording()) {
    node.node()->requires_grad = true;
    node.node()->generation = tape.generation();
    std::vector<std::shared_ptr<detail::Node>> inputs;
    inputs.reserve(parts.size());
    for (const Tensor& p : parts) inputs.push_back(p.node());
    tape.record([inputs = std::move(inputs), on = node.node()] {
      if (on->grad.size() == 0) return;
      Index off = 0;
      for (const auto& in : inputs) {
        const Index r = in->value.rows();
        accumulate(*in, on->grad.middleRows(off, r));
        off += r;
      }
    });
  }
  return node;
}

Tensor slice_cols(const Tensor& a, Index begin, Index count) {
  require_finite("slice_cols", a);
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_string(a.shape()));
  }
  Shape shape = a.rank() == 1 ? Shape{count} : Shape{a.rows(), count};
  Tensor out = make_result(a.value().middleCols(begin, count), std::move(shape), {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node(), begin, count] {
      if (on->grad.size() == 0 || !an->requires_grad) return;
      if (an->grad.size() == 0) an->grad = Matrix::Zero(an->value.rows(), an->value.cols());
      an->grad.middleCols(begin, count) += on->grad;
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& a, Index begin, Index count) {
  require_finite("slice_rows", a);
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_string(a.shape()));
  }
  Tensor out = make_result(a.value().middleRows(begin, count), Shape{count, a.cols()}, {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node(), begin, count] {
      if (on->grad.size() == 0 || !an->requires_grad) return;
      if (an->grad.size() == 0) an->grad = Matrix::Zero(an->value.rows(), an->value.cols());
      an->grad.middleRows(begin, count) += on->grad;
    });
  }
  return out;
}

Tensor mean_rows(const Tensor& a) {
  require_finite("mean_rows", a);
  if (a.rows() == 0) throw ShapeError("mean_rows: empty input");
  Tensor out = make_result(a.value().colwise().mean(), Shape{a.cols()}, {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      const Index n = an->value.rows();
      accumulate(*an, on->grad.replicate(n, 1) / static_cast<double>(n));
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  require_finite("sum", a);
  Matrix value(1, 1);
  value(0, 0) = a.value().sum();
  Tensor out = make_result(std::move(value), Shape{1}, {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node()] {
      if (on->grad.size() == 0) return;
      accumulate(*an, Matrix::Constant(an->value.rows(), an->value.cols(), on->grad(0, 0)));
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const Index> ids) {
  require_finite("gather_rows", table);
  const Index n = static_cast<Index>(ids.size());
  Matrix value(n, table.cols());
  for (Index i = 0; i < n; ++i) {
    const Index id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(id) + " outside table " +
                       shape_string(table.shape()));
    }
    value.row(i) = table.value().row(id);
  }
  Tensor out = make_result(std::move(value), Shape{n, table.cols()}, {&table});
  if (out.requires_grad()) {
    std::vector<Index> rows(ids.begin(), ids.end());
    Tape::active().record([tn = table.node(), on = out.node(), rows = std::move(rows)] {
      if (on->grad.size() == 0 || !tn->requires_grad) return;
      if (tn->grad.size() == 0) tn->grad = Matrix::Zero(tn->value.rows(), tn->value.cols());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        tn->grad.row(rows[i]) += on->grad.row(static_cast<Index>(i));
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& a, double p, bool train, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (!train || p == 0.0) return a;
  require_finite("dropout", a);
  std::bernoulli_distribution keep(1.0 - p);
  const double factor = 1.0 / (1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? factor : 0.0;
  Tensor out = make_result(a.value().cwiseProduct(mask), a.shape(), {&a});
  if (out.requires_grad()) {
    Tape::active().record([an = a.node(), on = out.node(), mask = std::move(mask)] {
      if (on->grad.size() == 0) return;
      accumulate(*an, on->grad.cwiseProduct(mask));
    });
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const Index> targets) {
  require_finite("softmax_cross_entropy", logits);
  const Index n = logits.rows();
  if (static_cast<Index>(targets.size()) != n || n == 0) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for logits " + shape_string(logits.shape()));
  }
  Matrix probs = softmax_rows(logits.value());
  double total = 0.0;
  for (Index r = 0; r < n; ++r) {
    const Index t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= logits.cols()) {
      throw ShapeError("softmax_cross_entropy: target " + std::to_string(t) +
                       " outside " + std::to_string(logits.cols()) + " classes");
    }
    const double m = logits.value().row(r).maxCoeff();
    const double lse = m + std::log((logits.value().row(r).array() - m).exp().sum());
    total += lse - logits.value()(r, t);
  }
  Matrix value(1, 1);
  value(0, 0) = total / static_cast<double>(n);
  Tensor out = make_result(std::move(value), Shape{1}, {&logits});
  if (out.requires_grad()) {
    std::vector<Index> rows(targets.begin(), targets.end());
    Tape::active().record(
        [ln = logits.node(), on = out.node(), probs = std::move(probs), rows = std::move(rows)] {
          if (on->grad.size() == 0) return;
          Matrix g = probs;
          for (std::size_t r = 0; r < rows.size(); ++r) g(static_cast<Index>(r), rows[r]) -= 1.0;
          g *= on->grad(0, 0) / static_cast<double>(rows.size());
          accumulate(*ln, g);
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient check

double grad_check(const std::function<Tensor()>& loss, Tensor x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  Tape& tape = Tape::active();
  tape.clear();
  const bool previous = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();

  Matrix analytic = Matrix::Zero(x.rows(), x.cols());
  {
    Tensor value = loss();
    if (value.requires_grad()) {
      tape.backward(value);
      if (x.has_grad()) analytic = x.grad();
    } else {
      tape.clear();
    }
  }
  x.zero_grad();

  NoGradGuard no_grad;
  Matrix& data = x.mutable_value();
  double worst = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const double saved = data.data()[i];
    data.data()[i] = saved + eps;
    const double plus = loss().item();
    data.data()[i] = saved - eps;
    const double minus = loss().item();
    data.data()[i] = saved;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = analytic.data()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  x.set_requires_grad(previous);
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
  return grad_check(std::function<Tensor()>([&f, x] { return f(x); }), x, eps);
}

}  // namespace sememe::ad
