#pragma once

// Pre-trained word embedding: vocabulary plus a frozen vector table. Row 0 is
// the all-zeros PAD row; the last row is a dedicated OOV vector set to the
// element-wise mean of all loaded vectors. The table is never updated by
// training; clients and server share one read-only copy.

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fedphish/errors.hpp"
#include "fedphish/rng.hpp"
#include "fedphish/text.hpp"

namespace fedphish {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

constexpr int kPadIndex = 0;
constexpr int kMaxSequenceLength = 200;
constexpr int kMinSequenceLength = 10;

struct EmbeddingTable {
  std::unordered_map<std::string, std::int32_t> vocab;  // word -> row, >= 1
  std::vector<std::string> words;  // words[i] is the word at row i+1
  Matrix vectors;                  // (vocab + 2) x dim; row 0 PAD, last OOV
  int dim = 0;

  std::int32_t oov_index() const {
    return static_cast<std::int32_t>(vectors.rows() - 1);
  }
  std::int32_t lookup(const std::string& word) const {
    auto it = vocab.find(word);
    return it == vocab.end() ? oov_index() : it->second;
  }
};

struct EncodedSample {
  std::vector<std::int32_t> indices;  // exact length L_max
  int true_length = 0;                // count of non-PAD positions
  int label = 0;
  std::string source_id;
};

// Reads the published GloVe text format: "word v1 .. vd", one entry per line.
// Duplicate words keep their first occurrence. Throws DimensionMismatch when
// a line has the wrong number of values and ParseFailure (with line number)
// on malformed floats.
inline EmbeddingTable load_embedding(std::istream& in, int dim) {
  if (dim <= 0) throw DimensionMismatch("embedding dimension must be positive");
  std::vector<std::string> words;
  std::vector<double> values;
  std::unordered_set<std::string> seen;
  std::string line;
  long line_no = 0;
  std::vector<double> row(static_cast<std::size_t>(dim));
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0)
      throw ParseFailure("expected 'word v1 .. vd'", line_no);
    std::string word = line.substr(0, sp);
    const char* p = line.data() + sp;
    const char* end = line.data() + line.size();
    int count = 0;
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{})
        throw ParseFailure("malformed float", line_no);
      if (count >= dim)
        throw DimensionMismatch("line " + std::to_string(line_no) + " has more than " +
                                std::to_string(dim) + " values");
      row[static_cast<std::size_t>(count++)] = v;
      p = res.ptr;
    }
    if (count != dim)
      throw DimensionMismatch("line " + std::to_string(line_no) + " has " +
                              std::to_string(count) + " values, expected " +
                              std::to_string(dim));
    if (!seen.insert(word).second) continue;  // first occurrence wins
    words.push_back(word);
    values.insert(values.end(), row.begin(), row.end());
  }
  EmbeddingTable table;
  table.dim = dim;
  table.words = std::move(words);
  const auto n = static_cast<Eigen::Index>(table.words.size());
  table.vectors = Matrix::Zero(n + 2, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j)
      table.vectors(i + 1, j) =
          values[static_cast<std::size_t>(i) * dim + static_cast<std::size_t>(j)];
  if (n > 0)
    table.vectors.row(n + 1) =
        table.vectors.middleRows(1, n).colwise().mean();  // OOV row
  table.vocab.reserve(table.words.size());
  for (Eigen::Index i = 0; i < n; ++i)
    table.vocab.emplace(table.words[static_cast<std::size_t>(i)],
                        static_cast<std::int32_t>(i + 1));
  return table;
}

inline EmbeddingTable load_embedding(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw DataUnreadable(path);
  return load_embedding(in, dim);
}

// Token indices, truncated to max_len, post-padded with PAD to exactly
// max_len. Texts shorter than min_len are rejected (returns nullopt).
inline std::optional<EncodedSample> encode(const ProcessedText& text,
                                           const EmbeddingTable& table,
                                           int max_len = kMaxSequenceLength,
                                           int min_len = kMinSequenceLength) {
  if (static_cast<int>(text.tokens.size()) < min_len) return std::nullopt;
  EncodedSample sample;
  sample.true_length =
      std::min<int>(max_len, static_cast<int>(text.tokens.size()));
  sample.indices.assign(static_cast<std::size_t>(max_len), kPadIndex);
  for (int t = 0; t < sample.true_length; ++t)
    sample.indices[static_cast<std::size_t>(t)] =
        table.lookup(text.tokens[static_cast<std::size_t>(t)]);
  sample.label = text.label;
  sample.source_id = text.source_id;
  return sample;
}

// Dense feature matrix, one embedding row per time step. PAD rows are zero.
inline Matrix embed(const EncodedSample& sample, const EmbeddingTable& table) {
  Matrix features(static_cast<Eigen::Index>(sample.indices.size()), table.dim);
  for (std::size_t t = 0; t < sample.indices.size(); ++t) {
    std::int32_t idx = sample.indices[t];
    if (idx < 0 || idx >= table.vectors.rows())
      throw IndexOutOfRange("sample index " + std::to_string(idx) +
                            " outside table with " +
                            std::to_string(table.vectors.rows()) + " rows");
    features.row(static_cast<Eigen::Index>(t)) = table.vectors.row(idx);
  }
  return features;
}

// Writes embeddings for a sample into a preallocated buffer (hot path).
inline void embed_into(const EncodedSample& sample, const EmbeddingTable& table,
                       Matrix& out) {
  out.resize(static_cast<Eigen::Index>(sample.indices.size()), table.dim);
  for (std::size_t t = 0; t < sample.indices.size(); ++t)
    out.row(static_cast<Eigen::Index>(t)) = table.vectors.row(sample.indices[t]);
}

// Drop samples whose (indices, label) pair exactly matches an earlier
// sample. Stable order.
inline std::vector<EncodedSample> dedupe(std::vector<EncodedSample> samples) {
  std::set<std::pair<std::vector<std::int32_t>, int>> seen;
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (EncodedSample& s : samples)
    if (seen.emplace(s.indices, s.label).second) out.push_back(std::move(s));
  return out;
}

// Checksum over dimensions, vocabulary, and vector bytes; lets tests confirm
// that the copy a client sees is bit-identical to the server's.
inline std::uint64_t embedding_checksum(const EmbeddingTable& table) {
  std::uint64_t h = fnv1a(&table.dim, sizeof(table.dim));
  for (const std::string& w : table.words) h = fnv1a(w.data(), w.size(), h);
  h = fnv1a(table.vectors.data(),
            static_cast<std::size_t>(table.vectors.size()) * sizeof(double), h);
  return h;
}

}  // namespace fedphish
