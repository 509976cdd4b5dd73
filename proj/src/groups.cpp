#include "gshare/groups.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "text_util.hpp"

namespace gshare {

GroupTable GroupTable::from_members(std::size_t num_words, std::vector<std::string> keys,
                                    std::vector<std::vector<WordId>> members,
                                    std::size_t* dropped) {
  if (keys.size() != members.size()) {
    throw std::invalid_argument("GroupTable: keys and member lists differ in length");
  }
  GroupTable t;
  t.membership_.resize(num_words);
  std::size_t n_dropped = 0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    auto& m = members[k];
    std::sort(m.begin(), m.end());
    m.erase(std::unique(m.begin(), m.end()), m.end());
    if (m.empty()) {
      ++n_dropped;
      continue;
    }
    for (auto w : m) {
      if (w >= num_words) {
        throw std::out_of_range("GroupTable: member id " + std::to_string(w) +
                                " >= " + std::to_string(num_words));
      }
    }
    const auto gid = static_cast<GroupId>(t.keys_.size());
    for (auto w : m) t.membership_[w].push_back(gid);
    t.keys_.push_back(std::move(keys[k]));
    t.members_.push_back(std::move(m));
  }
  if (dropped) *dropped = n_dropped;
  return t;
}

std::size_t GroupTable::covered_words() const {
  return static_cast<std::size_t>(std::count_if(
      membership_.begin(), membership_.end(), [](const auto& g) { return !g.empty(); }));
}

std::map<std::size_t, std::size_t> GroupTable::membership_histogram() const {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& g : membership_) {
    if (!g.empty()) ++hist[g.size()];
  }
  return hist;
}

namespace {

/// Accumulates (key, word) pairs in key first-appearance order.
class GroupBuilder {
 public:
  GroupBuilder(const Vocabulary& vocab, GroupBuildStats& stats) : vocab_(vocab), stats_(stats) {}

  std::size_t open(const std::string& key) {
    auto [it, inserted] = index_.emplace(key, keys_.size());
    if (inserted) {
      keys_.push_back(key);
      members_.emplace_back();
    }
    return it->second;
  }

  void add(std::size_t group, std::string_view term) {
    ++stats_.pairs;
    auto id = vocab_.find(term);
    if (!id) {
      ++stats_.oov_skipped;
      return;
    }
    members_[group].push_back(*id);
  }

  /// New anonymous group (used where each source line is its own group).
  std::size_t open_unique(std::string key) {
    keys_.push_back(std::move(key));
    members_.emplace_back();
    return keys_.size() - 1;
  }

  GroupTable finish() {
    std::size_t dropped = 0;
    auto t = GroupTable::from_members(vocab_.rows(), std::move(keys_), std::move(members_),
                                      &dropped);
    stats_.empty_groups_dropped = dropped;
    return t;
  }

 private:
  const Vocabulary& vocab_;
  GroupBuildStats& stats_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> keys_;
  std::vector<std::vector<WordId>> members_;
};

bool is_skippable(std::string_view line) {
  const auto t = detail::trim(line);
  return t.empty();
}

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

GroupTable parse_groups_tsv(std::string_view text, const Vocabulary& vocab,
                            GroupBuildStats* stats_out, std::string_view source) {
  GroupBuildStats stats;
  GroupBuilder b(vocab, stats);
  const std::string src(source);
  std::size_t line_no = 0;
  detail::for_each_line(text, [&](std::string_view line) {
    ++line_no;
    if (is_skippable(line)) return;
    ++stats.lines;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2 || detail::trim(fields[0]).empty() ||
        detail::trim(fields[1]).empty()) {
      throw ParseError(src, line_no, "expected 'group_key<TAB>word'");
    }
    const auto g = b.open(std::string(detail::trim(fields[0])));
    b.add(g, detail::trim(fields[1]));
  });
  auto t = b.finish();
  if (stats_out) *stats_out = stats;
  return t;
}

GroupTable parse_groups_brown(std::string_view text, const Vocabulary& vocab,
                              GroupBuildStats* stats_out, std::string_view source) {
  GroupBuildStats stats;
  GroupBuilder b(vocab, stats);
  const std::string src(source);
  std::size_t line_no = 0;
  detail::for_each_line(text, [&](std::string_view line) {
    ++line_no;
    if (is_skippable(line)) return;
    ++stats.lines;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3) throw ParseError(src, line_no, "expected 'bitstring<TAB>word<TAB>count'");
    const auto bits = detail::trim(fields[0]);
    if (bits.empty() || bits.find_first_not_of("01") != std::string_view::npos) {
      throw ParseError(src, line_no, "cluster path must be a bitstring, got '" +
                                         std::string(bits) + "'");
    }
    const auto word = detail::trim(fields[1]);
    if (word.empty()) throw ParseError(src, line_no, "empty word");
    if (!all_digits(detail::trim(fields[2]))) {
      throw ParseError(src, line_no, "count must be a non-negative integer");
    }
    b.add(b.open(std::string(bits)), word);
  });
  auto t = b.finish();
  if (stats_out) *stats_out = stats;
  return t;
}

std::string tree_number_prefix(std::string_view tree_number, std::size_t depth) {
  if (depth == 0) throw std::invalid_argument("prefix depth must be >= 1");
  const auto parts = detail::split(tree_number, '.');
  const auto head = parts.front();
  std::size_t letters = 0;
  while (letters < head.size() && std::isalpha(static_cast<unsigned char>(head[letters]))) {
    ++letters;
  }
  if (letters == 0 || !all_digits(head.substr(letters))) {
    throw std::invalid_argument("malformed tree number '" + std::string(tree_number) + "'");
  }
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (!all_digits(parts[p])) {
      throw std::invalid_argument("malformed tree number '" + std::string(tree_number) + "'");
    }
  }
  const auto keep = std::min(depth, parts.size());
  std::string key(parts[0]);
  for (std::size_t p = 1; p < keep; ++p) {
    key += '.';
    key += parts[p];
  }
  return key;
}

GroupTable parse_groups_mesh(std::string_view text, const Vocabulary& vocab,
                             std::size_t prefix_depth, GroupBuildStats* stats_out,
                             std::string_view source) {
  GroupBuildStats stats;
  GroupBuilder b(vocab, stats);
  const std::string src(source);
  std::size_t line_no = 0;
  detail::for_each_line(text, [&](std::string_view line) {
    ++line_no;
    if (is_skippable(line)) return;
    ++stats.lines;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2) throw ParseError(src, line_no, "expected 'term<TAB>treenum(;treenum)*'");
    const auto term = detail::trim(fields[0]);
    if (term.empty()) throw ParseError(src, line_no, "empty term");
    // Dataset tokens are whitespace-free, so multi-word terms are matched
    // with '_' in place of spaces.
    std::string token(term);
    std::replace(token.begin(), token.end(), ' ', '_');
    for (auto tn : detail::split(fields[1], ';')) {
      tn = detail::trim(tn);
      std::string key;
      try {
        key = tree_number_prefix(tn, prefix_depth);
      } catch (const std::invalid_argument& e) {
        throw ParseError(src, line_no, e.what());
      }
      b.add(b.open(key), token);
    }
  });
  auto t = b.finish();
  if (stats_out) *stats_out = stats;
  return t;
}

GroupTable parse_groups_sentiment_lexicon(std::string_view text, const Vocabulary& vocab,
                                          GroupBuildStats* stats_out, std::string_view source) {
  GroupBuildStats stats;
  GroupBuilder b(vocab, stats);
  const std::string src(source);
  std::size_t line_no = 0;
  detail::for_each_line(text, [&](std::string_view line) {
    ++line_no;
    if (is_skippable(line) || detail::trim(line).front() == '#') return;
    ++stats.lines;
    const auto fields = detail::split(line, '\t');
    if (fields.size() < 5) {
      throw ParseError(src, line_no,
                       "expected 'POS<TAB>id<TAB>posScore<TAB>negScore<TAB>terms<TAB>gloss'");
    }
    double pos = 0.0, neg = 0.0;
    if (!detail::parse_double(fields[2], pos) || !detail::parse_double(fields[3], neg) ||
        !std::isfinite(pos) || !std::isfinite(neg)) {
      throw ParseError(src, line_no, "non-numeric sentiment score");
    }
    if (!(pos > 0.0 || neg > 0.0)) {
      ++stats.objective_skipped;
      return;
    }
    const auto g = b.open_unique(std::string(detail::trim(fields[0])) + ":" +
                                 std::string(detail::trim(fields[1])));
    for (const auto& entry : detail::split_ws(fields[4])) {
      std::string_view term = entry;
      if (const auto hash = term.rfind('#'); hash != std::string_view::npos && hash > 0) {
        term = term.substr(0, hash);
      }
      if (term.find('_') != std::string_view::npos) {
        ++stats.multiword_skipped;
        continue;
      }
      b.add(g, term);
    }
  });
  auto t = b.finish();
  if (stats_out) *stats_out = stats;
  return t;
}

GroupTable groups_from_tsv(const std::filesystem::path& path, const Vocabulary& vocab,
                           GroupBuildStats* stats) {
  return parse_groups_tsv(detail::read_file(path), vocab, stats, path.string());
}

GroupTable groups_from_brown(const std::filesystem::path& path, const Vocabulary& vocab,
                             GroupBuildStats* stats) {
  return parse_groups_brown(detail::read_file(path), vocab, stats, path.string());
}

GroupTable groups_from_mesh(const std::filesystem::path& path, const Vocabulary& vocab,
                            std::size_t prefix_depth, GroupBuildStats* stats) {
  return parse_groups_mesh(detail::read_file(path), vocab, prefix_depth, stats, path.string());
}

GroupTable groups_from_sentiment_lexicon(const std::filesystem::path& path,
                                         const Vocabulary& vocab, GroupBuildStats* stats) {
  return parse_groups_sentiment_lexicon(detail::read_file(path), vocab, stats, path.string());
}

ResourceKind parse_resource_kind(std::string_view s) {
  if (s == "tsv") return ResourceKind::tsv;
  if (s == "brown") return ResourceKind::brown;
  if (s == "mesh") return ResourceKind::mesh;
  if (s == "sentilex") return ResourceKind::sentilex;
  throw std::invalid_argument("unknown resource kind '" + std::string(s) +
                              "' (expected tsv|brown|mesh|sentilex)");
}

std::string_view to_string(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::tsv: return "tsv";
    case ResourceKind::brown: return "brown";
    case ResourceKind::mesh: return "mesh";
    case ResourceKind::sentilex: return "sentilex";
  }
  return "?";
}

GroupTable load_groups(ResourceKind kind, const std::filesystem::path& path,
                       const Vocabulary& vocab, std::size_t prefix_depth,
                       GroupBuildStats* stats) {
  switch (kind) {
    case ResourceKind::tsv: return groups_from_tsv(path, vocab, stats);
    case ResourceKind::brown: return groups_from_brown(path, vocab, stats);
    case ResourceKind::mesh: return groups_from_mesh(path, vocab, prefix_depth, stats);
    case ResourceKind::sentilex: return groups_from_sentiment_lexicon(path, vocab, stats);
  }
  throw std::logic_error("unreachable");
}

std::string to_canonical_tsv(const GroupTable& table, const Vocabulary& vocab) {
  std::string out;
  for (GroupId g = 0; g < table.num_groups(); ++g) {
    for (auto w : table.members(g)) {
      out += table.key(g);
      out += '\t';
      out += vocab.word(w);
      out += '\n';
    }
  }
  return out;
}

GroupEmbeddings init_group_embeddings(const GroupTable& table, const Matrix& pretrained) {
  if (table.num_words() != pretrained.rows()) {
    throw std::invalid_argument("init_group_embeddings: table covers " +
                                std::to_string(table.num_words()) + " rows, pretrained has " +
                                std::to_string(pretrained.rows()));
  }
  GroupEmbeddings ge;
  ge.values = Matrix(table.num_groups(), pretrained.cols());
  ge.member_counts.resize(table.num_groups());
  for (GroupId g = 0; g < table.num_groups(); ++g) {
    const auto& members = table.members(g);
    if (members.empty()) {
      throw std::invalid_argument("init_group_embeddings: group '" + table.key(g) + "' is empty");
    }
    auto row = ge.values.row(g);
    for (auto w : members) {
      if (w >= pretrained.rows()) {
        throw std::out_of_range("init_group_embeddings: member id beyond pretrained rows");
      }
      const auto src = pretrained.row(w);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += src[j];
    }
    const double n = static_cast<double>(members.size());
    for (auto& v : row) v /= n;
    ge.member_counts[g] = members.size();
  }
  return ge;
}

}  // namespace gshare
