// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/models.hpp"

#include <cmath>
#include <stdexcept>

namespace sememe {

using ad::Index;
using ad::Matrix;
using ad::Tensor;

bool is_bias_name(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string last = dot == std::string::npos ? name : name.substr(dot + 1);
  return last == "b" || last.starts_with("b_");
}

Tensor EmbeddingLayer::knowledge_table() const {
  if (!sememes.defined()) return Tensor();
  return ad::matmul(averaging, sememes);
}

void EmbeddingLayer::append_named(std::vector<NamedTensor>& out) const {
  out.push_back({"embedding.words", words});
  if (sememes.defined()) {
    out.push_back({"embedding.sememes", sememes});
    out.push_back({"embedding.averaging", averaging});
  }
}

namespace {

EmbeddingLayer make_embedding(Index vocab, Index embed_dim, bool knowledge, Index sememe_dim,
                              Matrix averaging) {
  if (vocab <= 0 || embed_dim <= 0) {
    throw std::invalid_argument("embedding: vocabulary and dimension must be positive");
  }
  if (averaging.rows() != vocab) {
    throw ad::ShapeError("embedding: averaging matrix has " + std::to_string(averaging.rows()) +
                         " rows for a vocabulary of " + std::to_string(vocab));
  }
  EmbeddingLayer e;
  e.words = Tensor(Matrix::Zero(vocab, embed_dim), true);
  if (knowledge) {
    e.sememes = Tensor(Matrix::Zero(averaging.cols(), sememe_dim), true);
    e.averaging = Tensor(std::move(averaging), false);
  }
  return e;
}

struct EmbeddedStep {
  Tensor x;
  Tensor pi;
};

EmbeddedStep embed_step(const EmbeddingLayer& e, const Tensor& knowledge,
                        std::span<const Index> ids, double dropout, Mode mode,
                        std::mt19937_64& rng) {
  const bool train = mode == Mode::Train;
  EmbeddedStep s;
  s.x = ad::dropout(ad::gather_rows(e.words, ids), dropout, train, rng);
  // pi is left undropped: it is shared by every word with the same sememes.
  if (knowledge.defined()) s.pi = ad::gather_rows(knowledge, ids);
  return s;
}

void check_ids(std::span<const Index> ids, Index vocab) {
  for (Index id : ids) {
    if (id < 0 || id >= vocab) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(vocab));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// LanguageModel

LanguageModel::LanguageModel(LmConfig config, Matrix averaging) : config_(config) {
  const bool knowledge = config.variant.uses_knowledge() && config.sememe_dim > 0;
  if (!knowledge) config_.sememe_dim = 0;
  embedding = make_embedding(config.vocab_size, config.embed_dim, knowledge, config_.sememe_dim,
                             std::move(averaging));
  cell = cells::CellWeights::create(config.variant,
                                    {config.embed_dim, config.hidden_dim, config_.sememe_dim});
  output_weight = Tensor(Matrix::Zero(config.hidden_dim, config.vocab_size), true);
  output_bias = Tensor::zeros({config.vocab_size}, true);
}

cells::CellState LanguageModel::initial_state(Index batch) const {
  return cells::CellState::zeros(config_.variant.base, batch, config_.hidden_dim);
}

std::vector<NamedTensor> LanguageModel::named_parameters() const {
  std::vector<NamedTensor> out;
  embedding.append_named(out);
  for (const auto& [name, t] : cell.named()) out.push_back({"cell." + name, t});
  out.push_back({"output.W", output_weight});
  out.push_back({"output.b", output_bias});
  return out;
}

LanguageModel::WindowResult LanguageModel::forward(const std::vector<TokenIds>& steps,
                                                   const cells::CellState& state, Mode mode,
                                                   std::mt19937_64& rng) const {
  if (steps.empty()) throw std::invalid_argument("lm forward: empty window");
  const Tensor knowledge = embedding.knowledge_table();
  cells::SequenceBatch seq;
  for (const auto& ids : steps) {
    check_ids(ids, config_.vocab_size);
    auto s = embed_step(embedding, knowledge, ids, config_.dropout, mode, rng);
    seq.inputs.push_back(s.x);
    if (s.pi.defined()) seq.knowledge.push_back(s.pi);
  }
  auto run = cells::run_sequence(seq, cell, state);
  Tensor hidden = ad::concat_rows(run.hidden);
  hidden = ad::dropout(hidden, config_.dropout, mode == Mode::Train, rng);
  return {ad::add(ad::matmul(hidden, output_weight), output_bias), run.final_state};
}

Tensor LanguageModel::lm_forward(std::span<const Index> tokens) const {
  if (tokens.empty()) throw std::invalid_argument("lm_forward: empty token sequence");
  std::vector<TokenIds> steps;
  steps.reserve(tokens.size());
  for (Index t : tokens) steps.push_back({t});
  std::mt19937_64 unused(0);
  ad::NoGradGuard no_grad;
  return forward(steps, initial_state(1), Mode::Eval, unused).logits;
}

// ---------------------------------------------------------------------------
// Batching and perplexity

StreamBatches::StreamBatches(const TokenIds& corpus, Index batch_size) : batch(batch_size) {
  if (batch <= 0) throw std::invalid_argument("batch size must be positive");
  length = static_cast<Index>(corpus.size()) / batch;
  streams.resize(static_cast<std::size_t>(batch));
  for (Index b = 0; b < batch; ++b) {
    auto first = corpus.begin() + b * length;
    streams[static_cast<std::size_t>(b)].assign(first, first + length);
  }
}

StreamBatches::Window StreamBatches::window(Index begin, Index bptt) const {
  const Index steps = std::min(bptt, length - 1 - begin);
  Window w;
  w.inputs.resize(static_cast<std::size_t>(std::max<Index>(steps, 0)));
  w.targets.reserve(static_cast<std::size_t>(std::max<Index>(steps * batch, 0)));
  for (Index t = 0; t < steps; ++t) {
    auto& ids = w.inputs[static_cast<std::size_t>(t)];
    ids.resize(static_cast<std::size_t>(batch));
    for (Index b = 0; b < batch; ++b) {
      const auto& s = streams[static_cast<std::size_t>(b)];
      ids[static_cast<std::size_t>(b)] = s[static_cast<std::size_t>(begin + t)];
      w.targets.push_back(s[static_cast<std::size_t>(begin + t + 1)]);
    }
  }
  return w;
}

PerplexityResult evaluate_perplexity(const LanguageModel& model, const TokenIds& corpus,
                                     Batching batching) {
  if (corpus.size() < 2) throw std::invalid_argument("perplexity: corpus needs at least 2 tokens");
  const Index batch = std::min<Index>(batching.batch_size, static_cast<Index>(corpus.size()) / 2);
  StreamBatches data(corpus, std::max<Index>(batch, 1));
  ad::NoGradGuard no_grad;
  std::mt19937_64 unused(0);
  cells::CellState state = model.initial_state(data.batch);
  double total = 0.0;
  Index count = 0;
  for (Index begin = 0; begin + 1 < data.length; begin += batching.bptt_len) {
    auto w = data.window(begin, batching.bptt_len);
    auto out = model.forward(w.inputs, state, Mode::Eval, unused);
    state = out.state;
    const Tensor loss = ad::softmax_cross_entropy(out.logits, w.targets);
    total += loss.item() * static_cast<double>(w.targets.size());
    count += static_cast<Index>(w.targets.size());
  }
  PerplexityResult r;
  r.tokens = count;
  r.cross_entropy = total / static_cast<double>(count);
  r.perplexity = std::exp(r.cross_entropy);
  return r;
}

double perplexity(const LanguageModel& model, const TokenIds& corpus, Batching batching) {
  return evaluate_perplexity(model, corpus, batching).perplexity;
}

// ---------------------------------------------------------------------------
// Pair classifier

Tensor build_feature_vector(const Tensor& premise, const Tensor& hypothesis) {
  if (premise.rows() != hypothesis.rows() || premise.cols() != hypothesis.cols()) {
    throw ad::ShapeError("build_feature_vector: " + ad::shape_string(premise.shape()) + " vs " +
                         ad::shape_string(hypothesis.shape()));
  }
  return ad::concat({premise, hypothesis, ad::abs(ad::sub(premise, hypothesis)),
                     ad::mul(premise, hypothesis)});
}

PairClassifier::PairClassifier(PairConfig config, Matrix averaging) : config_(config) {
  const bool knowledge = config.variant.uses_knowledge() && config.sememe_dim > 0;
  if (!knowledge) config_.sememe_dim = 0;
  embedding = make_embedding(config.vocab_size, config.embed_dim, knowledge, config_.sememe_dim,
                             std::move(averaging));
  const cells::CellDims dims{config.embed_dim, config.hidden_dim, config_.sememe_dim};
  forward_cell = cells::CellWeights::create(config.variant, dims);
  if (config.bidirectional) backward_cell = cells::CellWeights::create(config.variant, dims);

  const Index width = encoder_width();
  const std::vector<std::pair<Index, Index>> layers = {
      {4 * width, width}, {width, width}, {width, width}, {width, kPairClasses}};
  for (auto [in, out] : layers) {
    mlp_weights.emplace_back(Matrix::Zero(in, out), true);
    mlp_biases.push_back(Tensor::zeros({out}, true));
  }
}

Index PairClassifier::encoder_width() const {
  return config_.bidirectional ? 2 * config_.hidden_dim : config_.hidden_dim;
}

std::vector<NamedTensor> PairClassifier::named_parameters() const {
  std::vector<NamedTensor> out;
  embedding.append_named(out);
  for (const auto& [name, t] : forward_cell.named()) out.push_back({"encoder.fwd." + name, t});
  if (config_.bidirectional) {
    for (const auto& [name, t] : backward_cell.named()) out.push_back({"encoder.bwd." + name, t});
  }
  for (std::size_t i = 0; i < mlp_weights.size(); ++i) {
    out.push_back({"mlp.W_" + std::to_string(i + 1), mlp_weights[i]});
    out.push_back({"mlp.b_" + std::to_string(i + 1), mlp_biases[i]});
  }
  return out;
}

Tensor PairClassifier::encode_impl(const TokenIds& tokens, Mode mode, std::mt19937_64& rng,
                                   const Tensor& knowledge) const {
  if (tokens.empty()) throw std::invalid_argument("encode_sentence: empty sentence");
  check_ids(tokens, config_.vocab_size);
  cells::SequenceBatch seq;
  for (Index id : tokens) {
    const Index ids[] = {id};
    auto s = embed_step(embedding, knowledge, ids, config_.dropout, mode, rng);
    seq.inputs.push_back(s.x);
    if (s.pi.defined()) seq.knowledge.push_back(s.pi);
  }
  const auto base = config_.variant.base;
  std::vector<Tensor> hidden;
  Tensor final_state;
  if (config_.bidirectional) {
    auto run = cells::run_bidirectional(seq, forward_cell, backward_cell,
                                        cells::CellState::zeros(base, 1, config_.hidden_dim),
                                        cells::CellState::zeros(base, 1, config_.hidden_dim));
    hidden = std::move(run.hidden);
    final_state = ad::concat({run.final_forward.h, run.final_backward.h});
  } else {
    auto run = cells::run_sequence(seq, forward_cell,
                                   cells::CellState::zeros(base, 1, config_.hidden_dim));
    hidden = std::move(run.hidden);
    final_state = run.final_state.h;
  }
  if (config_.pooling == Pooling::Final) return final_state;

  // Max pooling over time, routed through a gather so gradients follow the
  // arg-max entries.
  Tensor stacked = ad::concat_rows(hidden);
  const Index width = stacked.cols();
  std::vector<Tensor> columns;
  columns.reserve(static_cast<std::size_t>(width));
  for (Index c = 0; c < width; ++c) {
    Index best = 0;
    stacked.value().col(c).maxCoeff(&best);
    const Index row[] = {best};
    columns.push_back(ad::slice_cols(ad::gather_rows(stacked, row), c, 1));
  }
  return ad::concat(columns);
}

Tensor PairClassifier::encode_sentence(const TokenIds& tokens, Mode mode,
                                       std::mt19937_64& rng) const {
  return encode_impl(tokens, mode, rng, embedding.knowledge_table());
}

Tensor PairClassifier::logits(const TokenIds& premise, const TokenIds& hypothesis, Mode mode,
                              std::mt19937_64& rng) const {
  const Tensor knowledge = embedding.knowledge_table();
  Tensor v = build_feature_vector(encode_impl(premise, mode, rng, knowledge),
                                  encode_impl(hypothesis, mode, rng, knowledge));
  for (std::size_t i = 0; i + 1 < mlp_weights.size(); ++i) {
    v = ad::tanh(ad::add(ad::matmul(v, mlp_weights[i]), mlp_biases[i]));
  }
  return ad::add(ad::matmul(v, mlp_weights.back()), mlp_biases.back());
}

Eigen::Vector3d PairClassifier::classify_pair(const TokenIds& premise,
                                              const TokenIds& hypothesis) const {
  ad::NoGradGuard no_grad;
  std::mt19937_64 unused(0);
  const Matrix probs = ad::softmax_rows(logits(premise, hypothesis, Mode::Eval, unused).value());
  return probs.row(0).transpose();
}

}  // namespace sememe
