// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/gradient_suite.hpp"

#include <random>

namespace sememe::cells {

namespace {

Tensor uniform(Index rows, Index cols, std::mt19937_64& rng, bool requires_grad = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ad::Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return Tensor(std::move(m), requires_grad);
}

}  // namespace

CellWeights random_weights(CellVariant variant, CellDims dims, std::uint64_t seed) {
  CellWeights w = CellWeights::create(variant, dims);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto [name, t] : w.named()) {
    ad::Matrix& m = t.mutable_value();
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  }
  return w;
}

std::vector<GradientCheckRow> gradient_suite(CellVariant variant,
                                             const GradientSuiteOptions& options) {
  const Index d = options.dim;
  const CellDims dims{d, d, d};
  CellWeights w = random_weights(variant, dims, options.seed);

  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  SequenceBatch seq;
  std::vector<Tensor> probes;
  for (int t = 0; t < options.steps; ++t) {
    seq.inputs.push_back(uniform(1, d, rng));
    if (variant.uses_knowledge()) seq.knowledge.push_back(uniform(1, d, rng, true));
    probes.push_back(uniform(1, d, rng));
  }
  CellState initial = CellState::zeros(variant.base, 1, d);
  initial.h = uniform(1, d, rng);
  if (initial.c.defined()) initial.c = uniform(1, d, rng);

  // Probe-weighted sum of every hidden state.
  auto loss = [&] {
    const auto out = run_sequence(seq, w, initial);
    Tensor total = ad::sum(ad::mul(out.hidden[0], probes[0]));
    for (std::size_t t = 1; t < out.hidden.size(); ++t) {
      total = ad::add(total, ad::sum(ad::mul(out.hidden[t], probes[t])));
    }
    return total;
  };

  std::vector<GradientCheckRow> rows;
  for (const auto& [name, t] : w.named()) {
    for (auto& p : w.parameters()) p.zero_grad();
    rows.push_back({variant, name, ad::grad_check(loss, t, options.eps)});
  }
  for (std::size_t t = 0; t < seq.knowledge.size(); ++t) {
    for (auto& p : w.parameters()) p.zero_grad();
    rows.push_back({variant, "pi[" + std::to_string(t) + "]",
                    ad::grad_check(loss, seq.knowledge[t], options.eps)});
  }
  return rows;
}

std::vector<GradientCheckRow> gradient_suite_all(const GradientSuiteOptions& options) {
  std::vector<GradientCheckRow> rows;
  for (const auto& v : kAllVariants) {
    auto part = gradient_suite(v, options);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

}  // namespace sememe::cells
