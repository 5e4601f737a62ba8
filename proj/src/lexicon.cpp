// SPDX-License-Identifier: Apache-2.0

#include "sememe_rnn/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace sememe {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

const std::set<int>* SememeLexicon::find(const std::string& word) const {
  auto it = annotations.find(word);
  return it == annotations.end() ? nullptr : &it->second;
}

int SememeLexicon::intern(const std::string& sememe) {
  auto it = std::find(sememes.begin(), sememes.end(), sememe);
  if (it != sememes.end()) return static_cast<int>(it - sememes.begin());
  sememes.push_back(sememe);
  return static_cast<int>(sememes.size() - 1);
}

void SememeLexicon::validate() const {
  for (const auto& [word, ids] : annotations) {
    if (ids.empty()) throw std::logic_error("lexicon: empty annotation for '" + word + "'");
    if (*ids.begin() < 0 || *ids.rbegin() >= static_cast<int>(sememes.size())) {
      throw std::logic_error("lexicon: sememe id out of range for '" + word + "'");
    }
  }
}

SememeLexicon parse_lexicon(std::istream& in, const std::string& source) {
  SememeLexicon lex;
  std::unordered_map<std::string, int> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, lineno, "missing TAB separator");
    const std::string word = trim(line.substr(0, tab));
    if (word.empty()) throw ParseError(source, lineno, "empty word");

    std::set<int> set;
    std::stringstream fields(line.substr(tab + 1));
    std::string item;
    while (std::getline(fields, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      auto [it, inserted] = ids.try_emplace(item, static_cast<int>(lex.sememes.size()));
      if (inserted) lex.sememes.push_back(item);
      set.insert(it->second);
    }
    if (set.empty()) throw ParseError(source, lineno, "empty sememe list for '" + word + "'");
    lex.annotations[word].merge(set);
  }
  return lex;
}

SememeLexicon load_lexicon(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_lexicon(in, path.string());
}

void write_lexicon(std::ostream& out, const SememeLexicon& lex) {
  for (const auto& [word, ids] : lex.annotations) {
    out << word << '\t';
    bool first = true;
    for (int id : ids) {
      if (!first) out << ',';
      out << lex.sememes[static_cast<std::size_t>(id)];
      first = false;
    }
    out << '\n';
  }
}

void save_lexicon(const std::filesystem::path& path, const SememeLexicon& lex) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_lexicon(out, lex);
}

const ad::Index* EmbeddingTable::find(const std::string& word) const {
  auto it = index.find(word);
  return it == index.end() ? nullptr : &it->second;
}

EmbeddingTable parse_word_embeddings(std::istream& in, ad::Index dim, const std::string& source) {
  if (dim <= 0) throw std::invalid_argument("word embeddings: dimension must be positive");
  EmbeddingTable table;
  table.trainable = false;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> values;
    std::string token;
    while (fields >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError(source, lineno, "bad number '" + token + "'");
      }
    }
    if (static_cast<ad::Index>(values.size()) != dim) {
      throw ParseError(source, lineno,
                       "expected " + std::to_string(dim) + " values, found " +
                           std::to_string(values.size()));
    }
    auto [it, inserted] = table.index.try_emplace(word, static_cast<ad::Index>(rows.size()));
    if (inserted) {
      table.words.push_back(word);
      rows.push_back(std::move(values));
    } else {
      ++table.duplicates;
      rows[static_cast<std::size_t>(it->second)] = std::move(values);
    }
  }
  if (table.duplicates > 0) {
    std::cerr << "warning: " << source << ": " << table.duplicates
              << " duplicate word(s); last occurrence kept\n";
  }
  table.matrix.resize(static_cast<ad::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (ad::Index c = 0; c < dim; ++c) {
      table.matrix(static_cast<ad::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
  }
  return table;
}

EmbeddingTable load_word_embeddings(const std::filesystem::path& path, ad::Index dim) {
  auto in = open_input(path);
  return parse_word_embeddings(in, dim, path.string());
}

Eigen::VectorXd knowledge_embedding(const std::string& word, const SememeLexicon& lex,
                                    const ad::Matrix& sememe_table) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(sememe_table.cols());
  const auto* ids = lex.find(word);
  if (ids == nullptr) return out;
  for (int id : *ids) out += sememe_table.row(id).transpose();
  return out / static_cast<double>(ids->size());
}

ad::Matrix sememe_averaging_matrix(const std::vector<std::string>& words,
                                   const SememeLexicon& lex) {
  ad::Matrix avg = ad::Matrix::Zero(static_cast<ad::Index>(words.size()),
                                    static_cast<ad::Index>(lex.sememes.size()));
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto* ids = lex.find(words[w]);
    if (ids == nullptr) continue;
    const double weight = 1.0 / static_cast<double>(ids->size());
    for (int id : *ids) avg(static_cast<ad::Index>(w), id) = weight;
  }
  return avg;
}

SememeLexicon mask_coverage(const SememeLexicon& lex, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("mask_coverage: keep fraction must be in [0, 1]");
  }
  std::vector<const std::string*> words;
  words.reserve(lex.annotations.size());
  for (const auto& entry : lex.annotations) words.push_back(&entry.first);

  const auto keep = static_cast<std::size_t>(
      std::llround(keep_fraction * static_cast<double>(words.size())));
  std::mt19937_64 rng(seed);
  std::shuffle(words.begin(), words.end(), rng);

  SememeLexicon out;
  out.sememes = lex.sememes;
  for (std::size_t i = 0; i < keep; ++i) out.annotations[*words[i]] = lex.annotations.at(*words[i]);
  return out;
}

SememeLexicon substitute_meaningless(const SememeLexicon& lex, std::uint64_t seed) {
  SememeLexicon out;
  const std::size_t labels = lex.sememes.size();
  out.sememes.reserve(labels);
  for (std::size_t i = 0; i < labels; ++i) out.sememes.push_back("label" + std::to_string(i));

  std::vector<int> pool(labels);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  for (const auto& [word, ids] : lex.annotations) {
    if (ids.size() > labels) {
      throw std::logic_error("substitute_meaningless: '" + word + "' has " +
                             std::to_string(ids.size()) + " sememes but only " +
                             std::to_string(labels) + " labels exist");
    }
    // Partial Fisher-Yates: the first |ids| entries become a uniform subset.
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, labels - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    out.annotations[word] = std::set<int>(pool.begin(), pool.begin() + static_cast<long>(ids.size()));
  }
  return out;
}

}  // namespace sememe
