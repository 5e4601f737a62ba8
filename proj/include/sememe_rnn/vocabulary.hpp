// SPDX-License-Identifier: Apache-2.0
//
// Word vocabularies and the plain-text corpus formats: whitespace-tokenized
// lines for language modeling and `label<TAB>premise<TAB>hypothesis` pairs.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sememe_rnn/autodiff.hpp"

namespace sememe {

using TokenIds = std::vector<ad::Index>;
using TokenizedLines = std::vector<std::vector<std::string>>;

class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kEos = "<eos>";

  /// Contains only the reserved `<unk>` (id 0) and `<eos>` (id 1).
  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& words);

  /// Every token of `lines` in first-appearance order after the reserved ids.
  static Vocabulary build(const TokenizedLines& lines);

  ad::Index add(const std::string& word);
  /// Id of `word`, or the `<unk>` id.
  ad::Index id(const std::string& word) const;
  bool contains(const std::string& word) const;
  const std::string& word(ad::Index id) const { return words_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& words() const { return words_; }
  ad::Index size() const { return static_cast<ad::Index>(words_.size()); }
  ad::Index unk_id() const { return 0; }
  ad::Index eos_id() const { return 1; }

  /// FNV-1a over the ordered word list.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, ad::Index> ids_;
};

TokenizedLines tokenize_lines(std::istream& in);
TokenizedLines read_tokenized_lines(const std::filesystem::path& path);

/// Concatenated ids of all lines, each followed by `<eos>` when `append_eos`.
TokenIds encode_corpus(const TokenizedLines& lines, const Vocabulary& vocab,
                       bool append_eos = true);

enum class PairLabel { Entailment = 0, Contradiction = 1, Neutral = 2 };
inline constexpr std::array<std::string_view, 3> kPairLabelNames = {"entailment", "contradiction",
                                                                    "neutral"};

PairLabel parse_pair_label(std::string_view name);
std::string_view pair_label_name(PairLabel label);

struct PairExample {
  PairLabel label;
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
};

std::vector<PairExample> parse_pairs(std::istream& in, const std::string& source = "<stream>");
std::vector<PairExample> read_pairs(const std::filesystem::path& path);

}  // namespace sememe
