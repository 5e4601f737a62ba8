// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/vocabulary.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sememe_rnn/lexicon.hpp"

namespace sememe {

Vocabulary::Vocabulary() {
  add(std::string(kUnk));
  add(std::string(kEos));
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  if (words.size() < 2 || words[0] != kUnk || words[1] != kEos) {
    throw std::invalid_argument("vocabulary: word list must start with <unk>, <eos>");
  }
  for (const auto& w : words) add(w);
}

Vocabulary Vocabulary::build(const TokenizedLines& lines) {
  Vocabulary vocab;
  for (const auto& line : lines) {
    for (const auto& token : line) vocab.add(token);
  }
  return vocab;
}

ad::Index Vocabulary::add(const std::string& word) {
  auto [it, inserted] = ids_.try_emplace(word, size());
  if (inserted) words_.push_back(word);
  return it->second;
}

ad::Index Vocabulary::id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? unk_id() : it->second;
}

bool Vocabulary::contains(const std::string& word) const { return ids_.count(word) != 0; }

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& w : words_) {
    for (unsigned char c : w) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

TokenizedLines tokenize_lines(std::istream& in) {
  TokenizedLines lines;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    std::string token;
    while (fields >> token) tokens.push_back(token);
    if (!tokens.empty()) lines.push_back(std::move(tokens));
  }
  return lines;
}

TokenizedLines read_tokenized_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return tokenize_lines(in);
}

TokenIds encode_corpus(const TokenizedLines& lines, const Vocabulary& vocab, bool append_eos) {
  TokenIds ids;
  for (const auto& line : lines) {
    for (const auto& token : line) ids.push_back(vocab.id(token));
    if (append_eos) ids.push_back(vocab.eos_id());
  }
  return ids;
}

PairLabel parse_pair_label(std::string_view name) {
  for (std::size_t i = 0; i < kPairLabelNames.size(); ++i) {
    if (kPairLabelNames[i] == name) return static_cast<PairLabel>(i);
  }
  throw std::invalid_argument("unknown pair label '" + std::string(name) + "'");
}

std::string_view pair_label_name(PairLabel label) {
  return kPairLabelNames[static_cast<std::size_t>(label)];
}

std::vector<PairExample> parse_pairs(std::istream& in, const std::string& source) {
  std::vector<PairExample> pairs;
  std::string line;
  std::size_t lineno = 0;
  auto split_words = [](const std::string& text) {
    std::istringstream fields(text);
    std::vector<std::string> words;
    std::string w;
    while (fields >> w) words.push_back(w);
    return words;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError(source, lineno, "expected three TAB-separated fields");
    PairExample ex;
    try {
      ex.label = parse_pair_label(line.substr(0, t1));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, lineno, e.what());
    }
    ex.premise = split_words(line.substr(t1 + 1, t2 - t1 - 1));
    ex.hypothesis = split_words(line.substr(t2 + 1));
    if (ex.premise.empty() || ex.hypothesis.empty()) {
      throw ParseError(source, lineno, "empty premise or hypothesis");
    }
    pairs.push_back(std::move(ex));
  }
  return pairs;
}

std::vector<PairExample> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_pairs(in, path.string());
}

}  // namespace sememe
