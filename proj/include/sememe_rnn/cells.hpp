// SPDX-License-Identifier: Apache-2.0
//
// LSTM and GRU cells, each in four flavors: vanilla, sememe embedding
// concatenated to the input (+concat), an extra sememe output gate (+gate),
// and an auxiliary sememe cell feeding the outer cell (+cell).
//
// Weight matrices are stored input-major (in_width x hidden) so a batch of row
// vectors maps through `x * W + b`. Gate inputs concatenate [x; h; extra] in
// that order.

#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sememe_rnn/autodiff.hpp"

namespace sememe::cells {

using ad::Index;
using ad::Tensor;

enum class Base { Lstm, Gru };
enum class Method { Vanilla, Concat, Gate, Cell };

struct CellVariant {
  Base base = Base::Lstm;
  Method method = Method::Vanilla;

  /// "lstm", "gru+concat", "lstm+cell", ...
  std::string name() const;
  static CellVariant parse(std::string_view name);
  bool uses_knowledge() const { return method != Method::Vanilla; }

  auto operator<=>(const CellVariant&) const = default;
};

inline constexpr std::array<CellVariant, 8> kAllVariants = {{
    {Base::Lstm, Method::Vanilla},
    {Base::Lstm, Method::Concat},
    {Base::Lstm, Method::Gate},
    {Base::Lstm, Method::Cell},
    {Base::Gru, Method::Vanilla},
    {Base::Gru, Method::Concat},
    {Base::Gru, Method::Gate},
    {Base::Gru, Method::Cell},
}};

struct CellDims {
  Index input = 0;
  Index hidden = 0;
  Index sememe = 0;  // ignored by vanilla cells
};

struct CellState {
  Tensor h;
  Tensor c;  // undefined for GRU cells

  static CellState zeros(Base base, Index batch, Index hidden);
};

/// Named parameter tensors for one cell. Copies share tensors; use clone()
/// for an independent set.
class CellWeights {
 public:
  CellWeights() = default;

  /// All parameters zero and marked trainable. Throws ad::ShapeError when the
  /// dimensions are inconsistent with the variant.
  static CellWeights create(CellVariant variant, CellDims dims);

  const CellVariant& variant() const { return variant_; }
  const CellDims& dims() const { return dims_; }

  const Tensor& operator[](std::string_view name) const;
  Tensor& operator[](std::string_view name);
  bool contains(std::string_view name) const;

  const std::vector<std::pair<std::string, Tensor>>& named() const { return params_; }
  std::vector<Tensor> parameters() const;

  /// The auxiliary sememe cell of a +cell variant as a vanilla cell whose
  /// tensors alias this one's `inner.*` parameters.
  CellWeights inner() const;

  CellWeights clone() const;

 private:
  void add(std::string name, Index rows, Index cols);
  void add_bias(std::string name, Index width);

  CellVariant variant_;
  CellDims dims_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

/// Vanilla cell built from copies of the sub-blocks of `w` that act on
/// [x; h]. With zero knowledge input (and zero auxiliary-cell biases for
/// +cell) it computes exactly what `w` computes.
CellWeights vanilla_counterpart(const CellWeights& w);

CellState lstm_step(const Tensor& x, const CellState& state, const CellWeights& w);
CellState gru_step(const Tensor& x, const CellState& state, const CellWeights& w);
/// Vanilla step of the base cell on [x; pi]. An undefined `pi` means no
/// knowledge columns.
CellState concat_step(const Tensor& x, const Tensor& pi, const CellState& state,
                      const CellWeights& w);
CellState lstm_gate_step(const Tensor& x, const Tensor& pi, const CellState& state,
                         const CellWeights& w);
CellState gru_gate_step(const Tensor& x, const Tensor& pi, const CellState& state,
                        const CellWeights& w);
CellState lstm_cell_step(const Tensor& x, const Tensor& pi, const CellState& state,
                         const CellWeights& w);
CellState gru_cell_step(const Tensor& x, const Tensor& pi, const CellState& state,
                        const CellWeights& w);

/// Dispatches on w.variant(); `pi` is ignored by vanilla cells.
CellState step(const Tensor& x, const Tensor& pi, const CellState& state, const CellWeights& w);

/// Per-timestep inputs (batch x d_x) and knowledge embeddings (batch x d_pi).
struct SequenceBatch {
  std::vector<Tensor> inputs;
  std::vector<Tensor> knowledge;  // empty for vanilla cells

  std::size_t length() const { return inputs.size(); }
  SequenceBatch reversed() const;
};

struct SequenceOutput {
  std::vector<Tensor> hidden;
  CellState final_state;
};

SequenceOutput run_sequence(const SequenceBatch& seq, const CellWeights& w,
                            const CellState& initial);

struct BidirectionalOutput {
  std::vector<Tensor> hidden;  // [forward_t; backward_t], width 2*d_h
  CellState final_forward;
  CellState final_backward;  // state after consuming the first token
};

BidirectionalOutput run_bidirectional(const SequenceBatch& seq, const CellWeights& forward,
                                      const CellWeights& backward,
                                      const CellState& initial_forward,
                                      const CellState& initial_backward);

}  // namespace sememe::cells
