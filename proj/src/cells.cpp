// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/cells.hpp"

#include <algorithm>
#include <stdexcept>

namespace sememe::cells {

namespace {

using ad::add;
using ad::concat;
using ad::matmul;
using ad::mul;
using ad::sigmoid;

constexpr std::string_view kInnerPrefix = "inner.";

Tensor affine(const Tensor& input, const CellWeights& w, std::string_view weight,
              std::string_view bias) {
  return add(matmul(input, w[weight]), w[bias]);
}

void expect_width(const char* step, const char* what, const Tensor& t, Index width) {
  if (!t.defined() || t.cols() != width) {
    throw ad::ShapeError(std::string(step) + ": " + what + " has width " +
                         (t.defined() ? std::to_string(t.cols()) : std::string("<none>")) +
                         ", expected " + std::to_string(width));
  }
}

void expect_variant(const char* step, const CellWeights& w, Base base, Method method) {
  if (w.variant() != CellVariant{base, method}) {
    throw std::invalid_argument(std::string(step) + ": weights are for " + w.variant().name());
  }
}

void expect_state(const char* step, const CellState& s, const CellWeights& w) {
  expect_width(step, "h", s.h, w.dims().hidden);
  if (w.variant().base == Base::Lstm) expect_width(step, "c", s.c, w.dims().hidden);
}

// Matches the sub-block of rows [begin, begin+count) of a weight matrix.
ad::Matrix rows_of(const Tensor& t, Index begin, Index count) {
  return t.value().middleRows(begin, count);
}

CellState lstm_core(const Tensor& x, const CellState& s, const CellWeights& w) {
  const Tensor xh = concat({x, s.h});
  const Tensor f = sigmoid(affine(xh, w, "W_f", "b_f"));
  const Tensor i = sigmoid(affine(xh, w, "W_i", "b_i"));
  const Tensor g = ad::tanh(affine(xh, w, "W_c", "b_c"));
  const Tensor c = add(mul(f, s.c), mul(i, g));
  const Tensor o = sigmoid(affine(xh, w, "W_o", "b_o"));
  return {mul(o, ad::tanh(c)), c};
}

CellState gru_core(const Tensor& x, const CellState& s, const CellWeights& w) {
  const Tensor xh = concat({x, s.h});
  const Tensor z = sigmoid(affine(xh, w, "W_z", "b_z"));
  const Tensor r = sigmoid(affine(xh, w, "W_r", "b_r"));
  const Tensor candidate = ad::tanh(affine(concat({x, mul(r, s.h)}), w, "W_h", "b_h"));
  return {add(mul(ad::one_minus(z), s.h), mul(z, candidate)), Tensor()};
}

}  // namespace

// ---------------------------------------------------------------------------
// CellVariant

std::string CellVariant::name() const {
  std::string out = base == Base::Lstm ? "lstm" : "gru";
  switch (method) {
    case Method::Vanilla: break;
    case Method::Concat: out += "+concat"; break;
    case Method::Gate: out += "+gate"; break;
    case Method::Cell: out += "+cell"; break;
  }
  return out;
}

CellVariant CellVariant::parse(std::string_view name) {
  for (const auto& v : kAllVariants) {
    if (v.name() == name) return v;
  }
  throw std::invalid_argument("unknown cell variant '" + std::string(name) +
                              "' (expected lstm|gru optionally followed by +concat, +gate or +cell)");
}

CellState CellState::zeros(Base base, Index batch, Index hidden) {
  CellState s;
  s.h = Tensor(ad::Matrix::Zero(batch, hidden));
  if (base == Base::Lstm) s.c = Tensor(ad::Matrix::Zero(batch, hidden));
  return s;
}

// ---------------------------------------------------------------------------
// CellWeights

void CellWeights::add(std::string name, Index rows, Index cols) {
  params_.emplace_back(std::move(name), Tensor(ad::Matrix::Zero(rows, cols), true));
}

void CellWeights::add_bias(std::string name, Index width) {
  params_.emplace_back(std::move(name), Tensor::zeros({width}, true));
}

CellWeights CellWeights::create(CellVariant variant, CellDims dims) {
  if (dims.input <= 0 || dims.hidden <= 0 || dims.sememe < 0) {
    throw ad::ShapeError("cell dims must be positive (input " + std::to_string(dims.input) +
                         ", hidden " + std::to_string(dims.hidden) + ")");
  }
  if (variant.method == Method::Vanilla) dims.sememe = 0;
  if ((variant.method == Method::Gate || variant.method == Method::Cell) && dims.sememe <= 0) {
    throw ad::ShapeError(variant.name() + " needs a positive sememe dimension");
  }
  if (variant == CellVariant{Base::Gru, Method::Gate} && dims.sememe != dims.hidden) {
    throw ad::ShapeError("gru+gate adds tanh(pi) to h, so the sememe dimension (" +
                         std::to_string(dims.sememe) + ") must equal the hidden size (" +
                         std::to_string(dims.hidden) + ")");
  }

  CellWeights w;
  w.variant_ = variant;
  w.dims_ = dims;
  const Index dx = dims.input, dh = dims.hidden, dp = dims.sememe;
  const Index xh = dx + dh;

  auto add_vanilla = [&w](Base base, Index in, Index hidden, const std::string& prefix) {
    const std::vector<std::string> gates =
        base == Base::Lstm ? std::vector<std::string>{"f", "i", "c", "o"}
                           : std::vector<std::string>{"z", "r", "h"};
    for (const auto& g : gates) w.add(prefix + "W_" + g, in + hidden, hidden);
    for (const auto& g : gates) w.add_bias(prefix + "b_" + g, hidden);
  };

  switch (variant.method) {
    case Method::Vanilla:
      add_vanilla(variant.base, dx, dh, "");
      break;
    case Method::Concat:
      add_vanilla(variant.base, dx + dp, dh, "");
      break;
    case Method::Gate:
      if (variant.base == Base::Lstm) {
        w.add("W_f", xh + dp, dh);
        w.add("W_i", xh + dp, dh);
        w.add("W_c", xh, dh);
        w.add("W_o", xh + dp, dh);
        w.add("W_os", xh + dp, dh);
        w.add("W_cpi", dp, dh);
        for (const char* b : {"b_f", "b_i", "b_c", "b_o", "b_os"}) w.add_bias(b, dh);
      } else {
        w.add("W_z", xh + dp, dh);
        w.add("W_r", xh + dp, dh);
        w.add("W_o", xh + dp, dh);
        w.add("W_h", xh, dh);
        for (const char* b : {"b_z", "b_r", "b_o", "b_h"}) w.add_bias(b, dh);
      }
      break;
    case Method::Cell:
      if (variant.base == Base::Lstm) {
        w.add("W_f", xh, dh);
        w.add("W_fs", dx + dh, dh);
        w.add("W_i", xh + dh, dh);
        w.add("W_c", xh + dh, dh);
        w.add("W_o", xh + dh, dh);
        for (const char* b : {"b_f", "b_fs", "b_i", "b_c", "b_o"}) w.add_bias(b, dh);
      } else {
        w.add("W_z", xh + dh, dh);
        w.add("W_r", xh + dh, dh);
        w.add("W_h", xh, dh);
        for (const char* b : {"b_z", "b_r", "b_h"}) w.add_bias(b, dh);
      }
      add_vanilla(variant.base, dp, dh, std::string(kInnerPrefix));
      break;
  }
  return w;
}

const Tensor& CellWeights::operator[](std::string_view name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw std::out_of_range(variant_.name() + " has no parameter '" + std::string(name) + "'");
}

Tensor& CellWeights::operator[](std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this)[name]);
}

bool CellWeights::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [name](const auto& p) { return p.first == name; });
}

std::vector<Tensor> CellWeights::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.second);
  return out;
}

CellWeights CellWeights::inner() const {
  if (variant_.method != Method::Cell) {
    throw std::logic_error(variant_.name() + " has no auxiliary sememe cell");
  }
  CellWeights w;
  w.variant_ = {variant_.base, Method::Vanilla};
  w.dims_ = {dims_.sememe, dims_.hidden, 0};
  for (const auto& [name, t] : params_) {
    if (name.starts_with(kInnerPrefix)) w.params_.emplace_back(name.substr(kInnerPrefix.size()), t);
  }
  return w;
}

CellWeights CellWeights::clone() const {
  CellWeights w = *this;
  for (auto& [name, t] : w.params_) {
    t = Tensor(t.value(), t.shape(), t.requires_grad());
  }
  return w;
}

CellWeights vanilla_counterpart(const CellWeights& w) {
  const auto& d = w.dims();
  const Index dx = d.input, dh = d.hidden, dp = d.sememe;
  if (w.variant().method == Method::Vanilla) return w.clone();
  CellWeights out = CellWeights::create({w.variant().base, Method::Vanilla}, {dx, dh, 0});
  for (auto [name, t] : out.named()) {  // handles alias out's tensors
    const Tensor& src = w[name];
    if (name.starts_with("b_")) {
      t.mutable_value() = src.value();
      continue;
    }
    if (w.variant().method == Method::Concat) {
      // Rows are ordered [x; pi; h]; skip the pi block.
      t.mutable_value().topRows(dx) = rows_of(src, 0, dx);
      t.mutable_value().bottomRows(dh) = rows_of(src, dx + dp, dh);
    } else {
      t.mutable_value() = rows_of(src, 0, dx + dh);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Steps

CellState lstm_step(const Tensor& x, const CellState& state, const CellWeights& w) {
  expect_variant("lstm_step", w, Base::Lstm, Method::Vanilla);
  expect_width("lstm_step", "x", x, w.dims().input);
  expect_state("lstm_step", state, w);
  return lstm_core(x, state, w);
}

CellState gru_step(const Tensor& x, const CellState& state, const CellWeights& w) {
  expect_variant("gru_step", w, Base::Gru, Method::Vanilla);
  expect_width("gru_step", "x", x, w.dims().input);
  expect_state("gru_step", state, w);
  return gru_core(x, state, w);
}

CellState concat_step(const Tensor& x, const Tensor& pi, const CellState& state,
                      const CellWeights& w) {
  if (w.variant().method != Method::Concat) {
    throw std::invalid_argument("concat_step: weights are for " + w.variant().name());
  }
  expect_width("concat_step", "x", x, w.dims().input);
  expect_state("concat_step", state, w);
  Tensor input = x;
  if (w.dims().sememe > 0) {
    expect_width("concat_step", "pi", pi, w.dims().sememe);
    input = concat({x, pi});
  }
  return w.variant().base == Base::Lstm ? lstm_core(input, state, w) : gru_core(input, state, w);
}

CellState lstm_gate_step(const Tensor& x, const Tensor& pi, const CellState& state,
                         const CellWeights& w) {
  expect_variant("lstm_gate_step", w, Base::Lstm, Method::Gate);
  expect_width("lstm_gate_step", "x", x, w.dims().input);
  expect_width("lstm_gate_step", "pi", pi, w.dims().sememe);
  expect_state("lstm_gate_step", state, w);

  const Tensor xhp = concat({x, state.h, pi});
  const Tensor f = sigmoid(affine(xhp, w, "W_f", "b_f"));
  const Tensor i = sigmoid(affine(xhp, w, "W_i", "b_i"));
  const Tensor g = ad::tanh(affine(concat({x, state.h}), w, "W_c", "b_c"));
  const Tensor c = add(mul(f, state.c), mul(i, g));
  const Tensor o = sigmoid(affine(xhp, w, "W_o", "b_o"));
  const Tensor os = sigmoid(affine(xhp, w, "W_os", "b_os"));
  const Tensor knowledge = ad::tanh(matmul(pi, w["W_cpi"]));
  return {add(mul(o, ad::tanh(c)), mul(os, knowledge)), c};
}

CellState gru_gate_step(const Tensor& x, const Tensor& pi, const CellState& state,
                        const CellWeights& w) {
  expect_variant("gru_gate_step", w, Base::Gru, Method::Gate);
  expect_width("gru_gate_step", "x", x, w.dims().input);
  expect_width("gru_gate_step", "pi", pi, w.dims().sememe);
  expect_state("gru_gate_step", state, w);

  const Tensor xhp = concat({x, state.h, pi});
  const Tensor z = sigmoid(affine(xhp, w, "W_z", "b_z"));
  const Tensor r = sigmoid(affine(xhp, w, "W_r", "b_r"));
  const Tensor os = sigmoid(affine(xhp, w, "W_o", "b_o"));
  const Tensor candidate = ad::tanh(affine(concat({x, mul(r, state.h)}), w, "W_h", "b_h"));
  const Tensor h = add(add(mul(ad::one_minus(z), state.h), mul(z, candidate)),
                       mul(os, ad::tanh(pi)));
  return {h, Tensor()};
}

CellState lstm_cell_step(const Tensor& x, const Tensor& pi, const CellState& state,
                         const CellWeights& w) {
  expect_variant("lstm_cell_step", w, Base::Lstm, Method::Cell);
  expect_width("lstm_cell_step", "x", x, w.dims().input);
  expect_width("lstm_cell_step", "pi", pi, w.dims().sememe);
  expect_state("lstm_cell_step", state, w);

  // The sememe cell starts from the zero state at every timestep.
  const CellState sememe =
      lstm_core(pi, CellState::zeros(Base::Lstm, pi.rows(), w.dims().hidden), w.inner());
  const Tensor f = sigmoid(affine(concat({x, state.h}), w, "W_f", "b_f"));
  const Tensor fs = sigmoid(affine(concat({x, sememe.h}), w, "W_fs", "b_fs"));
  const Tensor xhs = concat({x, state.h, sememe.h});
  const Tensor i = sigmoid(affine(xhs, w, "W_i", "b_i"));
  const Tensor g = ad::tanh(affine(xhs, w, "W_c", "b_c"));
  const Tensor o = sigmoid(affine(xhs, w, "W_o", "b_o"));
  const Tensor c = add(add(mul(f, state.c), mul(fs, sememe.c)), mul(i, g));
  return {mul(o, ad::tanh(c)), c};
}

CellState gru_cell_step(const Tensor& x, const Tensor& pi, const CellState& state,
                        const CellWeights& w) {
  expect_variant("gru_cell_step", w, Base::Gru, Method::Cell);
  expect_width("gru_cell_step", "x", x, w.dims().input);
  expect_width("gru_cell_step", "pi", pi, w.dims().sememe);
  expect_state("gru_cell_step", state, w);

  const Tensor hs =
      gru_core(pi, CellState::zeros(Base::Gru, pi.rows(), w.dims().hidden), w.inner()).h;
  const Tensor xhs = concat({x, state.h, hs});
  const Tensor z = sigmoid(affine(xhs, w, "W_z", "b_z"));
  const Tensor r = sigmoid(affine(xhs, w, "W_r", "b_r"));
  const Tensor candidate =
      ad::tanh(affine(concat({x, mul(r, add(state.h, hs))}), w, "W_h", "b_h"));
  return {add(mul(ad::one_minus(z), state.h), mul(z, candidate)), Tensor()};
}

CellState step(const Tensor& x, const Tensor& pi, const CellState& state, const CellWeights& w) {
  const auto v = w.variant();
  switch (v.method) {
    case Method::Vanilla:
      return v.base == Base::Lstm ? lstm_step(x, state, w) : gru_step(x, state, w);
    case Method::Concat:
      return concat_step(x, pi, state, w);
    case Method::Gate:
      return v.base == Base::Lstm ? lstm_gate_step(x, pi, state, w)
                                  : gru_gate_step(x, pi, state, w);
    case Method::Cell:
      return v.base == Base::Lstm ? lstm_cell_step(x, pi, state, w)
                                  : gru_cell_step(x, pi, state, w);
  }
  throw std::logic_error("unreachable cell variant");
}

// ---------------------------------------------------------------------------
// Sequences

SequenceBatch SequenceBatch::reversed() const {
  SequenceBatch out{{inputs.rbegin(), inputs.rend()}, {knowledge.rbegin(), knowledge.rend()}};
  return out;
}

SequenceOutput run_sequence(const SequenceBatch& seq, const CellWeights& w,
                            const CellState& initial) {
  const bool knowledge = w.variant().uses_knowledge() && w.dims().sememe > 0;
  if (knowledge && seq.knowledge.size() != seq.inputs.size()) {
    throw std::invalid_argument("run_sequence: " + w.variant().name() + " needs one knowledge "
                                "embedding per token (" + std::to_string(seq.knowledge.size()) +
                                " for " + std::to_string(seq.inputs.size()) + " tokens)");
  }
  SequenceOutput out;
  out.hidden.reserve(seq.length());
  CellState state = initial;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    state = step(seq.inputs[t], knowledge ? seq.knowledge[t] : Tensor(), state, w);
    out.hidden.push_back(state.h);
  }
  out.final_state = state;
  return out;
}

BidirectionalOutput run_bidirectional(const SequenceBatch& seq, const CellWeights& forward,
                                      const CellWeights& backward,
                                      const CellState& initial_forward,
                                      const CellState& initial_backward) {
  SequenceOutput fwd = run_sequence(seq, forward, initial_forward);
  SequenceOutput bwd = run_sequence(seq.reversed(), backward, initial_backward);
  std::reverse(bwd.hidden.begin(), bwd.hidden.end());

  BidirectionalOutput out;
  out.hidden.reserve(seq.length());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    out.hidden.push_back(ad::concat({fwd.hidden[t], bwd.hidden[t]}));
  }
  out.final_forward = fwd.final_state;
  out.final_backward = bwd.final_state;
  return out;
}

}  // namespace sememe::cells
