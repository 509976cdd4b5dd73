#include "gshare/corpus.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "gshare/random.hpp"
#include "text_util.hpp"

namespace gshare {

static_assert(std::endian::native == std::endian::little,
              "binary embedding and checkpoint IO assume a little-endian host");

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary word '" + words_[i] + "'");
    }
  }
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordId Vocabulary::lookup(std::string_view word) const {
  return find(word).value_or(unk_id());
}

const std::string& Vocabulary::word(WordId id) const {
  static const std::string kUnk = "<unk>";
  static const std::string kPad = "<pad>";
  if (id < words_.size()) return words_[id];
  if (id == unk_id()) return kUnk;
  if (id == pad_id()) return kPad;
  throw std::out_of_range("word id " + std::to_string(id) + " out of range");
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = fnv1a64("gshare-vocab");
  for (const auto& w : words_) {
    h = fnv1a64(w, h);
    h = fnv1a64(std::string_view("\0", 1), h);
  }
  return h;
}

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, VocabOrder order) {
  if (docs.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  for (const auto& doc : docs) {
    for (const auto& tok : doc) {
      if (seen.insert(tok).second) words.push_back(tok);
    }
  }
  if (words.empty()) throw std::invalid_argument("build_vocabulary: corpus has no tokens");
  if (order == VocabOrder::sorted) std::sort(words.begin(), words.end());
  return Vocabulary(std::move(words));
}

RawDocument parse_dataset_line(std::string_view line, std::string_view source,
                               std::size_t line_no) {
  const std::string src(source);
  const auto tab = line.find('\t');
  if (tab == std::string_view::npos) throw ParseError(src, line_no, "missing TAB after label");
  RawDocument doc;
  const auto label = detail::trim(line.substr(0, tab));
  auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), doc.label);
  if (ec != std::errc() || ptr != label.data() + label.size() || doc.label < 0) {
    throw ParseError(src, line_no, "label must be a non-negative integer, got '" +
                                       std::string(label) + "'");
  }
  doc.tokens = detail::split_ws(line.substr(tab + 1));
  if (doc.tokens.empty()) throw ParseError(src, line_no, "document has no tokens");
  return doc;
}

std::vector<RawDocument> parse_raw_dataset(std::string_view text, std::string_view source) {
  std::vector<RawDocument> docs;
  std::size_t line_no = 0;
  detail::for_each_line(text, [&](std::string_view line) {
    ++line_no;
    if (detail::trim(line).empty()) return;
    docs.push_back(parse_dataset_line(line, source, line_no));
  });
  return docs;
}

std::vector<RawDocument> read_raw_dataset(const std::filesystem::path& path) {
  return parse_raw_dataset(detail::read_file(path), path.string());
}

Dataset encode(const std::vector<RawDocument>& raw, const Vocabulary& vocab,
               std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  ds.documents.reserve(raw.size());
  ds.labels.reserve(raw.size());
  for (std::size_t n = 0; n < raw.size(); ++n) {
    if (raw[n].tokens.empty()) {
      throw ParseError(ds.name.empty() ? "<dataset>" : ds.name, n + 1, "document has no tokens");
    }
    std::vector<WordId> ids;
    ids.reserve(raw[n].tokens.size());
    for (const auto& tok : raw[n].tokens) ids.push_back(vocab.lookup(tok));
    ds.documents.push_back(std::move(ids));
    ds.labels.push_back(raw[n].label);
    ds.num_classes = std::max(ds.num_classes, raw[n].label + 1);
  }
  return ds;
}

Dataset encode_lines(std::string_view text, const Vocabulary& vocab, std::string name) {
  auto raw = parse_raw_dataset(text, name.empty() ? "<memory>" : name);
  return encode(raw, vocab, std::move(name));
}

TokenList decode(const std::vector<WordId>& doc, const Vocabulary& vocab) {
  TokenList out;
  out.reserve(doc.size());
  for (auto id : doc) out.push_back(vocab.word(id));
  return out;
}

std::vector<TokenList> token_lists(const std::vector<RawDocument>& raw) {
  std::vector<TokenList> out;
  out.reserve(raw.size());
  for (const auto& d : raw) out.push_back(d.tokens);
  return out;
}

EmbeddingFormat parse_embedding_format(std::string_view s) {
  if (s == "text") return EmbeddingFormat::text;
  if (s == "binary") return EmbeddingFormat::binary;
  throw std::invalid_argument("unknown embedding format '" + std::string(s) + "'");
}

void fill_oov_row(std::span<double> row, const OovPolicy& oov, WordId id) {
  if (oov.kind == OovPolicy::Kind::zero) {
    std::fill(row.begin(), row.end(), 0.0);
    return;
  }
  Rng rng(derive_seed(oov.seed, "oov", id));
  for (auto& v : row) v = rng.uniform(-oov.scale, oov.scale);
}

namespace {

struct Header {
  std::size_t count = 0;
  std::size_t dim = 0;
};

Header parse_header(std::string_view line, const std::string& src) {
  const auto parts = detail::split_ws(line);
  Header h;
  if (parts.size() != 2 || !detail::parse_size(parts[0], h.count) ||
      !detail::parse_size(parts[1], h.dim)) {
    throw ParseError(src, 1, "expected header 'V d'");
  }
  if (h.dim == 0) throw ParseError(src, 1, "embedding dimension must be positive");
  return h;
}

void store_row(Matrix& m, std::vector<char>& filled, const Vocabulary& vocab,
               const std::string& word, std::span<const float> values,
               PretrainedStats& stats) {
  ++stats.file_words;
  auto id = vocab.find(word);
  if (!id || filled[*id]) return;
  filled[*id] = 1;
  ++stats.matched;
  auto row = m.row(*id);
  for (std::size_t j = 0; j < values.size(); ++j) row[j] = values[j];
}

}  // namespace

Matrix load_pretrained(const std::filesystem::path& path, EmbeddingFormat format,
                       const Vocabulary& vocab, const OovPolicy& oov,
                       PretrainedStats* stats_out) {
  const std::string src = path.string();
  const std::string content = detail::read_file(path);
  const auto nl = content.find('\n');
  if (nl == std::string::npos) throw ParseError(src, 1, "missing header line");
  const Header header = parse_header(std::string_view(content).substr(0, nl), src);

  Matrix m(vocab.rows(), header.dim);
  std::vector<char> filled(vocab.rows(), 0);
  PretrainedStats stats;
  std::vector<float> buf(header.dim);

  if (format == EmbeddingFormat::text) {
    std::size_t line_no = 1;
    std::size_t entries = 0;
    detail::for_each_line(std::string_view(content).substr(nl + 1), [&](std::string_view line) {
      ++line_no;
      if (detail::trim(line).empty()) return;
      const auto parts = detail::split_ws(line);
      if (parts.size() != header.dim + 1) {
        throw ParseError(src, line_no,
                         "expected " + std::to_string(header.dim) + " values, got " +
                             std::to_string(parts.size() - 1));
      }
      for (std::size_t j = 0; j < header.dim; ++j) {
        if (!detail::parse_float(parts[j + 1], buf[j]) || !std::isfinite(buf[j])) {
          throw ParseError(src, line_no, "bad value '" + parts[j + 1] + "'");
        }
      }
      ++entries;
      store_row(m, filled, vocab, parts[0], buf, stats);
    });
    if (entries != header.count) {
      throw ParseError(src, line_no,
                       "header declares " + std::to_string(header.count) + " words, found " +
                           std::to_string(entries));
    }
  } else {
    std::size_t pos = nl + 1;
    const std::size_t bytes = header.dim * sizeof(float);
    for (std::size_t n = 0; n < header.count; ++n) {
      while (pos < content.size() && (content[pos] == '\n' || content[pos] == '\r')) ++pos;
      const auto sp = content.find(' ', pos);
      if (sp == std::string::npos || sp == pos) {
        throw ParseError(src, n + 2, "truncated binary payload at entry " + std::to_string(n));
      }
      std::string word = content.substr(pos, sp - pos);
      pos = sp + 1;
      if (content.size() - pos < bytes) {
        throw ParseError(src, n + 2, "truncated vector for '" + word + "'");
      }
      std::memcpy(buf.data(), content.data() + pos, bytes);
      pos += bytes;
      for (float v : buf) {
        if (!std::isfinite(v)) throw ParseError(src, n + 2, "non-finite value for '" + word + "'");
      }
      store_row(m, filled, vocab, word, buf, stats);
    }
    while (pos < content.size() && std::isspace(static_cast<unsigned char>(content[pos]))) ++pos;
    if (pos != content.size()) {
      throw ParseError(src, header.count + 2, "trailing bytes after declared entries");
    }
  }

  for (WordId id = 0; id < vocab.rows(); ++id) {
    if (id == vocab.pad_id()) continue;
    if (!filled[id]) {
      fill_oov_row(m.row(id), oov, id);
      if (id < vocab.size()) ++stats.oov;
    }
  }
  if (stats_out) *stats_out = stats;
  return m;
}

void write_pretrained(const Matrix& matrix, const Vocabulary& vocab,
                      const std::filesystem::path& path, EmbeddingFormat format) {
  if (vocab.size() == 0) throw std::invalid_argument("write_pretrained: empty vocabulary");
  if (matrix.rows() != vocab.size() && matrix.rows() != vocab.rows()) {
    throw std::invalid_argument("write_pretrained: matrix has " +
                                std::to_string(matrix.rows()) + " rows for " +
                                std::to_string(vocab.size()) + " words");
  }
  if (matrix.cols() == 0) throw std::invalid_argument("write_pretrained: zero dimension");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << vocab.size() << ' ' << matrix.cols() << '\n';
  std::vector<float> buf(matrix.cols());
  for (WordId i = 0; i < vocab.size(); ++i) {
    out << vocab.word(i);
    const auto row = matrix.row(i);
    if (format == EmbeddingFormat::text) {
      for (double v : row) out << ' ' << detail::format_float(static_cast<float>(v));
    } else {
      out << ' ';
      for (std::size_t j = 0; j < row.size(); ++j) buf[j] = static_cast<float>(row[j]);
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace gshare
