// SPDX-License-Identifier: Apache-2.0
//
// Synthetic corpus whose next-token statistics depend only on latent word
// classes, with each class annotated by its own disjoint sememe set. Word
// identity reveals the class only after a model has learned it from data; the
// sememe annotation reveals it directly.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sememe_rnn/autodiff.hpp"
#include "sememe_rnn/lexicon.hpp"
#include "sememe_rnn/vocabulary.hpp"

namespace sememe::synth {

struct SynthSpec {
  int n_classes = 8;
  int words_per_class = 50;
  int n_sememes_per_class = 4;
  ad::Matrix transition;  // n_classes x n_classes, row-stochastic
  int sentence_length = 25;
  std::size_t train_tokens = 50000;
  std::size_t valid_tokens = 5000;
  std::size_t test_tokens = 5000;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on non-positive counts or a transition
  /// matrix whose rows do not sum to 1 within 1e-12.
  void validate() const;
};

/// Row-stochastic matrix where each class moves to `successors` distinct
/// classes with random (seeded) weights. Class r always reaches r+1 (mod n),
/// so every class is visited.
ad::Matrix peaked_transition(int n_classes, int successors, std::uint64_t seed);

/// Default acceptance-scale spec: 8 classes of 50 words, 50k training tokens.
SynthSpec default_spec(std::uint64_t seed);

struct SynthCorpus {
  TokenizedLines train;
  TokenizedLines valid;
  TokenizedLines test;
  SememeLexicon lexicon;
  std::vector<std::string> words;  // all word types, grouped by class
  std::vector<int> word_class;     // parallel to `words`
};

std::string word_name(int cls, int index);

/// Samples one class-level Markov chain per split (uniform start, uniform
/// word within class) and cuts it into lines of `sentence_length` tokens.
SynthCorpus generate(const SynthSpec& spec);

/// Stationary distribution of the class chain (power iteration).
Eigen::VectorXd stationary_distribution(const ad::Matrix& transition);

/// Entropy rate in nats per word token: class-chain entropy rate plus
/// log(words_per_class).
double token_entropy_rate(const SynthSpec& spec);

/// Lower bound on the perplexity any model can reach on the LM encoding of
/// the corpus, where each line also predicts a trailing `<eos>` (costing at
/// least zero nats).
double perplexity_lower_bound(const SynthSpec& spec);

/// Writes train.txt, valid.txt, test.txt and lexicon.tsv into `dir`.
void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus);

}  // namespace sememe::synth
