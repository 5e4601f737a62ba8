// SPDX-License-Identifier: Apache-2.0
//
// Sememe annotations, embedding tables, and the per-word sememe knowledge
// embedding (the mean of a word's sememe embeddings, zero when unannotated).

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "sememe_rnn/autodiff.hpp"

namespace sememe {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct SememeLexicon {
  std::vector<std::string> sememes;
  std::map<std::string, std::set<int>> annotations;

  std::size_t annotated_words() const { return annotations.size(); }
  const std::set<int>* find(const std::string& word) const;
  /// Id of `sememe`, appending it to the vocabulary when new.
  int intern(const std::string& sememe);
  /// Throws std::logic_error if an id is out of range or a set is empty.
  void validate() const;
};

/// `word<TAB>s1,s2,...` per line; `#` lines and blank lines are skipped.
SememeLexicon parse_lexicon(std::istream& in, const std::string& source = "<stream>");
SememeLexicon load_lexicon(const std::filesystem::path& path);
void write_lexicon(std::ostream& out, const SememeLexicon& lex);
void save_lexicon(const std::filesystem::path& path, const SememeLexicon& lex);

struct EmbeddingTable {
  std::unordered_map<std::string, ad::Index> index;
  std::vector<std::string> words;
  ad::Matrix matrix;
  bool trainable = true;
  std::size_t duplicates = 0;

  ad::Index dim() const { return matrix.cols(); }
  const ad::Index* find(const std::string& word) const;
};

/// One word per line followed by `dim` reals. Later duplicates overwrite
/// earlier rows and are counted in `duplicates`. The table is frozen.
EmbeddingTable parse_word_embeddings(std::istream& in, ad::Index dim,
                                     const std::string& source = "<stream>");
EmbeddingTable load_word_embeddings(const std::filesystem::path& path, ad::Index dim);

/// Mean of the sememe rows of `word` in `sememe_table` (rows indexed by
/// sememe id), or zeros when the word is unannotated.
Eigen::VectorXd knowledge_embedding(const std::string& word, const SememeLexicon& lex,
                                    const ad::Matrix& sememe_table);

/// Row w holds 1/|S_w| at the sememe ids of `words[w]`, so that
/// (averaging * sememe_table).row(w) is the knowledge embedding of words[w].
ad::Matrix sememe_averaging_matrix(const std::vector<std::string>& words,
                                   const SememeLexicon& lex);

/// Keeps round(keep_fraction * annotated) uniformly chosen words.
SememeLexicon mask_coverage(const SememeLexicon& lex, double keep_fraction, std::uint64_t seed);

/// Replaces every annotation set with an equally sized random subset of a
/// fresh label vocabulary the same size as the sememe vocabulary.
SememeLexicon substitute_meaningless(const SememeLexicon& lex, std::uint64_t seed);

}  // namespace sememe
