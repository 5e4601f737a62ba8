// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

namespace sememe::synth {

void SynthSpec::validate() const {
  if (n_classes <= 0 || words_per_class <= 0 || n_sememes_per_class <= 0 ||
      sentence_length <= 0 || train_tokens == 0 || valid_tokens == 0 || test_tokens == 0) {
    throw std::invalid_argument("synth spec: all counts must be positive");
  }
  if (transition.rows() != n_classes || transition.cols() != n_classes) {
    throw std::invalid_argument("synth spec: transition matrix must be n_classes x n_classes");
  }
  for (ad::Index r = 0; r < transition.rows(); ++r) {
    if ((transition.row(r).array() < 0.0).any() ||
        std::abs(transition.row(r).sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("synth spec: transition row " + std::to_string(r) +
                                  " is not a probability distribution");
    }
  }
}

ad::Matrix peaked_transition(int n_classes, int successors, std::uint64_t seed) {
  if (successors <= 0 || successors > n_classes) {
    throw std::invalid_argument("peaked_transition: successors must be in [1, n_classes]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  ad::Matrix t = ad::Matrix::Zero(n_classes, n_classes);
  std::vector<int> classes;
  for (int r = 0; r < n_classes; ++r) {
    // The cyclic successor keeps the chain irreducible; the rest are random.
    const int cyclic = (r + 1) % n_classes;
    classes.clear();
    for (int c = 0; c < n_classes; ++c) {
      if (c != cyclic) classes.push_back(c);
    }
    std::shuffle(classes.begin(), classes.end(), rng);
    t(r, cyclic) = weight(rng);
    for (int k = 0; k + 1 < successors; ++k) t(r, classes[static_cast<std::size_t>(k)]) = weight(rng);
    t.row(r) /= t.row(r).sum();
  }
  return t;
}

SynthSpec default_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.transition = peaked_transition(spec.n_classes, 2, seed ^ 0x5eedULL);
  spec.seed = seed;
  return spec;
}

std::string word_name(int cls, int index) {
  return "c" + std::to_string(cls) + "w" + std::to_string(index);
}

namespace {

TokenizedLines sample_split(const SynthSpec& spec, std::size_t tokens, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> start(0, spec.n_classes - 1);
  std::uniform_int_distribution<int> word(0, spec.words_per_class - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TokenizedLines lines;
  std::vector<std::string> line;
  int cls = start(rng);
  for (std::size_t i = 0; i < tokens; ++i) {
    line.push_back(word_name(cls, word(rng)));
    if (static_cast<int>(line.size()) == spec.sentence_length) {
      lines.push_back(std::move(line));
      line.clear();
    }
    // Next class by inverse CDF over the current row.
    double u = unit(rng);
    int next = spec.n_classes - 1;
    for (int c = 0; c < spec.n_classes; ++c) {
      u -= spec.transition(cls, c);
      if (u < 0.0) {
        next = c;
        break;
      }
    }
    cls = next;
  }
  if (!line.empty()) lines.push_back(std::move(line));
  return lines;
}

}  // namespace

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus corpus;
  for (int c = 0; c < spec.n_classes; ++c) {
    for (int s = 0; s < spec.n_sememes_per_class; ++s) {
      corpus.lexicon.sememes.push_back("c" + std::to_string(c) + "s" + std::to_string(s));
    }
    std::set<int> ids;
    for (int s = 0; s < spec.n_sememes_per_class; ++s) ids.insert(c * spec.n_sememes_per_class + s);
    for (int w = 0; w < spec.words_per_class; ++w) {
      corpus.words.push_back(word_name(c, w));
      corpus.word_class.push_back(c);
      corpus.lexicon.annotations[corpus.words.back()] = ids;
    }
  }
  std::mt19937_64 rng(spec.seed);
  corpus.train = sample_split(spec, spec.train_tokens, rng);
  corpus.valid = sample_split(spec, spec.valid_tokens, rng);
  corpus.test = sample_split(spec, spec.test_tokens, rng);
  return corpus;
}

Eigen::VectorXd stationary_distribution(const ad::Matrix& transition) {
  const ad::Index n = transition.rows();
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (int iter = 0; iter < 100000; ++iter) {
    // Lazy chain (I + T)/2 has the same stationary law and cannot oscillate.
    Eigen::RowVectorXd next = 0.5 * (mu + mu * transition);
    const double change = (next - mu).cwiseAbs().sum();
    mu = next;
    if (change < 1e-15) break;
  }
  return mu.transpose() / mu.sum();
}

double token_entropy_rate(const SynthSpec& spec) {
  const Eigen::VectorXd mu = stationary_distribution(spec.transition);
  double rate = 0.0;
  for (ad::Index r = 0; r < spec.transition.rows(); ++r) {
    for (ad::Index c = 0; c < spec.transition.cols(); ++c) {
      const double p = spec.transition(r, c);
      if (p > 0.0) rate -= mu(r) * p * std::log(p);
    }
  }
  return rate + std::log(static_cast<double>(spec.words_per_class));
}

double perplexity_lower_bound(const SynthSpec& spec) {
  const double l = static_cast<double>(spec.sentence_length);
  return std::exp(token_entropy_rate(spec) * l / (l + 1.0));
}

void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus) {
  std::filesystem::create_directories(dir);
  auto write_lines = [&dir](const char* name, const TokenizedLines& lines) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    for (const auto& line : lines) {
      for (std::size_t i = 0; i < line.size(); ++i) out << (i ? " " : "") << line[i];
      out << '\n';
    }
  };
  write_lines("train.txt", corpus.train);
  write_lines("valid.txt", corpus.valid);
  write_lines("test.txt", corpus.test);
  save_lexicon(dir / "lexicon.tsv", corpus.lexicon);
}

}  // namespace sememe::synth
