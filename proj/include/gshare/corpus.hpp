#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gshare/matrix.hpp"

namespace gshare {

/// Input error that carries the offending 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

using WordId = std::uint32_t;
using TokenList = std::vector<std::string>;

enum class VocabOrder { first_occurrence, sorted };

/// Dense word <-> id mapping. Ids [0, size()) are corpus words; two reserved
/// ids follow them: unk_id() == size() and pad_id() == size() + 1. Embedding
/// matrices therefore carry rows() == size() + 2 rows.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  std::size_t rows() const { return words_.size() + 2; }
  WordId unk_id() const { return static_cast<WordId>(words_.size()); }
  WordId pad_id() const { return static_cast<WordId>(words_.size() + 1); }

  std::optional<WordId> find(std::string_view word) const;
  WordId lookup(std::string_view word) const;  // unk_id() when absent
  const std::string& word(WordId id) const;
  const std::vector<std::string>& words() const { return words_; }

  /// Stable fingerprint of the ordered word list.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

Vocabulary build_vocabulary(const std::vector<TokenList>& docs,
                            VocabOrder order = VocabOrder::first_occurrence);

/// One unparsed dataset line: label and whitespace-split tokens.
struct RawDocument {
  int label = 0;
  TokenList tokens;
};

struct Dataset {
  std::string name;
  std::vector<std::vector<WordId>> documents;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return documents.size(); }
};

/// Parses "label<TAB>token token ..." lines. Labels are non-negative integers.
RawDocument parse_dataset_line(std::string_view line, std::string_view source,
                               std::size_t line_no);
std::vector<RawDocument> read_raw_dataset(const std::filesystem::path& path);
std::vector<RawDocument> parse_raw_dataset(std::string_view text,
                                           std::string_view source = "<memory>");

Dataset encode(const std::vector<RawDocument>& raw, const Vocabulary& vocab,
               std::string name = {});
Dataset encode_lines(std::string_view text, const Vocabulary& vocab,
                     std::string name = {});
TokenList decode(const std::vector<WordId>& doc, const Vocabulary& vocab);

std::vector<TokenList> token_lists(const std::vector<RawDocument>& raw);

enum class EmbeddingFormat { text, binary };
EmbeddingFormat parse_embedding_format(std::string_view s);

struct OovPolicy {
  enum class Kind { uniform, zero } kind = Kind::uniform;
  double scale = 0.25;
  std::uint64_t seed = 1;
};

struct PretrainedStats {
  std::size_t file_words = 0;
  std::size_t matched = 0;
  std::size_t oov = 0;
};

/// Reads a pretrained embedding file into a vocab.rows() x d matrix. Words the
/// file lacks (and the UNK row) are drawn from the OOV policy; the PAD row is
/// zero.
Matrix load_pretrained(const std::filesystem::path& path, EmbeddingFormat format,
                       const Vocabulary& vocab, const OovPolicy& oov = {},
                       PretrainedStats* stats = nullptr);

/// Writes the word rows (first vocab.size() rows) of `matrix`.
void write_pretrained(const Matrix& matrix, const Vocabulary& vocab,
                      const std::filesystem::path& path, EmbeddingFormat format);

/// Draws one OOV row from `rng`-equivalent stream keyed by the word id.
void fill_oov_row(std::span<double> row, const OovPolicy& oov, WordId id);

}  // namespace gshare
