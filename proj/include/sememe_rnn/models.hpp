// SPDX-License-Identifier: Apache-2.0
//
// Task heads over the recurrent cells: a word-level language model and a
// sentence-pair classifier.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sememe_rnn/autodiff.hpp"
#include "sememe_rnn/cells.hpp"
#include "sememe_rnn/vocabulary.hpp"

namespace sememe {

enum class Mode { Train, Eval };

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

/// True when the last dotted component of `name` names a bias (`b`, `b_*`).
bool is_bias_name(const std::string& name);

/// Knowledge lookup shared by both heads: a word embedding table, a sememe
/// embedding table, and the constant word-to-sememe averaging matrix.
struct EmbeddingLayer {
  ad::Tensor words;      // |V| x d_x
  ad::Tensor sememes;    // |S| x d_pi; undefined when the cell ignores knowledge
  ad::Tensor averaging;  // |V| x |S| constant

  /// Per-vocabulary knowledge embeddings (averaging * sememes), computed once
  /// per forward pass so that gradients reach the sememe table.
  ad::Tensor knowledge_table() const;
  void append_named(std::vector<NamedTensor>& out) const;
};

struct LmConfig {
  cells::CellVariant variant;
  ad::Index vocab_size = 0;
  ad::Index embed_dim = 0;
  ad::Index sememe_dim = 0;
  ad::Index hidden_dim = 0;
  double dropout = 0.0;
};

class LanguageModel {
 public:
  /// Parameters start at zero; see init_params. `averaging` is |V| x |S|.
  LanguageModel(LmConfig config, ad::Matrix averaging);

  const LmConfig& config() const { return config_; }
  cells::CellState initial_state(ad::Index batch) const;
  std::vector<NamedTensor> named_parameters() const;

  struct WindowResult {
    ad::Tensor logits;  // (T*B) x |V|, time-major rows
    cells::CellState state;
  };

  /// `steps[t][b]` is the token fed at time t to stream b.
  WindowResult forward(const std::vector<TokenIds>& steps, const cells::CellState& state,
                       Mode mode, std::mt19937_64& rng) const;

  /// Eval-mode logits for a single sequence; row t scores token t+1.
  ad::Tensor lm_forward(std::span<const ad::Index> tokens) const;

  EmbeddingLayer embedding;
  cells::CellWeights cell;
  ad::Tensor output_weight;  // d_h x |V|
  ad::Tensor output_bias;    // |V|

 private:
  LmConfig config_;
};

/// Contiguous batching: the corpus is cut into `batch` equal streams
/// (remainder dropped) and walked in windows of at most `bptt` steps.
struct StreamBatches {
  StreamBatches(const TokenIds& corpus, ad::Index batch);

  ad::Index batch = 0;
  ad::Index length = 0;         // tokens per stream
  std::vector<TokenIds> streams;

  struct Window {
    std::vector<TokenIds> inputs;  // time-major
    TokenIds targets;              // time-major, flattened
  };
  /// Window starting at stream offset `begin`, of min(bptt, length-1-begin) steps.
  Window window(ad::Index begin, ad::Index bptt) const;
  ad::Index predicted_tokens() const { return batch * std::max<ad::Index>(length - 1, 0); }
};

struct Batching {
  ad::Index batch_size = 1;
  ad::Index bptt_len = 35;
};

struct PerplexityResult {
  double perplexity = 0.0;
  double cross_entropy = 0.0;  // mean nats per predicted token
  ad::Index tokens = 0;
};

/// exp of the mean next-token negative log-likelihood, carrying the hidden
/// state across windows of each stream.
PerplexityResult evaluate_perplexity(const LanguageModel& model, const TokenIds& corpus,
                                     Batching batching);
double perplexity(const LanguageModel& model, const TokenIds& corpus, Batching batching);

enum class Pooling { Final, Max };

struct PairConfig {
  cells::CellVariant variant;
  bool bidirectional = false;
  ad::Index vocab_size = 0;
  ad::Index embed_dim = 0;
  ad::Index sememe_dim = 0;
  ad::Index hidden_dim = 0;
  double dropout = 0.0;
  Pooling pooling = Pooling::Final;
};

inline constexpr ad::Index kPairClasses = 3;

/// [pre; hyp; |pre - hyp|; pre * hyp].
ad::Tensor build_feature_vector(const ad::Tensor& premise, const ad::Tensor& hypothesis);

class PairClassifier {
 public:
  PairClassifier(PairConfig config, ad::Matrix averaging);

  const PairConfig& config() const { return config_; }
  ad::Index encoder_width() const;
  std::vector<NamedTensor> named_parameters() const;

  ad::Tensor encode_sentence(const TokenIds& tokens, Mode mode, std::mt19937_64& rng) const;
  /// Unnormalized 3-way scores.
  ad::Tensor logits(const TokenIds& premise, const TokenIds& hypothesis, Mode mode,
                    std::mt19937_64& rng) const;
  /// Eval-mode class probabilities, indexed by PairLabel.
  Eigen::Vector3d classify_pair(const TokenIds& premise, const TokenIds& hypothesis) const;

  EmbeddingLayer embedding;
  cells::CellWeights forward_cell;
  cells::CellWeights backward_cell;  // only for bidirectional encoders
  // Three tanh layers, then the softmax layer.
  std::vector<ad::Tensor> mlp_weights;
  std::vector<ad::Tensor> mlp_biases;

 private:
  ad::Tensor encode_impl(const TokenIds& tokens, Mode mode, std::mt19937_64& rng,
                         const ad::Tensor& knowledge) const;

  PairConfig config_;
};

}  // namespace sememe
