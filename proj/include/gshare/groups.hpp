#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gshare/corpus.hpp"
#include "gshare/matrix.hpp"

namespace gshare {

using GroupId = std::uint32_t;

/// Counters reported while compiling a resource against a vocabulary.
struct GroupBuildStats {
  std::size_t lines = 0;
  std::size_t pairs = 0;             // (group, term) pairs seen in the resource
  std::size_t oov_skipped = 0;       // pairs whose term is not in the vocabulary
  std::size_t multiword_skipped = 0; // lexicon terms containing '_'
  std::size_t objective_skipped = 0; // lexicon synsets with pos = neg = 0
  std::size_t empty_groups_dropped = 0;
};

/// Word -> groups mapping G(i) together with the inverse member lists.
///
/// Group ids are dense in [0, N) and follow the first appearance of each key in
/// the source. Member lists hold ascending word ids; G(i) lists ascending group
/// ids. Both sides are sized against Vocabulary::rows(), so the reserved UNK
/// and PAD ids are valid and always ungrouped.
class GroupTable {
 public:
  GroupTable() = default;

  /// Builds a table from keyed member lists (duplicates allowed; empty lists
  /// are dropped and ids re-densified).
  static GroupTable from_members(std::size_t num_words, std::vector<std::string> keys,
                                 std::vector<std::vector<WordId>> members,
                                 std::size_t* dropped = nullptr);

  std::size_t num_groups() const { return keys_.size(); }
  std::size_t num_words() const { return membership_.size(); }

  const std::string& key(GroupId g) const { return keys_.at(g); }
  const std::vector<std::string>& keys() const { return keys_; }
  const std::vector<WordId>& members(GroupId g) const { return members_.at(g); }
  const std::vector<GroupId>& groups_of(WordId w) const { return membership_.at(w); }
  std::size_t group_count(WordId w) const { return membership_.at(w).size(); }

  /// Words with at least one group.
  std::size_t covered_words() const;
  /// Map from K(i) to number of words with that many groups (K >= 1).
  std::map<std::size_t, std::size_t> membership_histogram() const;

  friend bool operator==(const GroupTable&, const GroupTable&) = default;

 private:
  std::vector<std::string> keys_;
  std::vector<std::vector<WordId>> members_;
  std::vector<std::vector<GroupId>> membership_;
};

GroupTable groups_from_tsv(const std::filesystem::path& path, const Vocabulary& vocab,
                           GroupBuildStats* stats = nullptr);
GroupTable groups_from_brown(const std::filesystem::path& path, const Vocabulary& vocab,
                             GroupBuildStats* stats = nullptr);
GroupTable groups_from_mesh(const std::filesystem::path& path, const Vocabulary& vocab,
                            std::size_t prefix_depth = 3, GroupBuildStats* stats = nullptr);
GroupTable groups_from_sentiment_lexicon(const std::filesystem::path& path,
                                         const Vocabulary& vocab,
                                         GroupBuildStats* stats = nullptr);

// In-memory variants; `source` names the input in error messages.
GroupTable parse_groups_tsv(std::string_view text, const Vocabulary& vocab,
                            GroupBuildStats* stats = nullptr,
                            std::string_view source = "<tsv>");
GroupTable parse_groups_brown(std::string_view text, const Vocabulary& vocab,
                              GroupBuildStats* stats = nullptr,
                              std::string_view source = "<brown>");
GroupTable parse_groups_mesh(std::string_view text, const Vocabulary& vocab,
                             std::size_t prefix_depth = 3, GroupBuildStats* stats = nullptr,
                             std::string_view source = "<mesh>");
GroupTable parse_groups_sentiment_lexicon(std::string_view text, const Vocabulary& vocab,
                                          GroupBuildStats* stats = nullptr,
                                          std::string_view source = "<sentilex>");

enum class ResourceKind { tsv, brown, mesh, sentilex };
ResourceKind parse_resource_kind(std::string_view s);
std::string_view to_string(ResourceKind kind);

GroupTable load_groups(ResourceKind kind, const std::filesystem::path& path,
                       const Vocabulary& vocab, std::size_t prefix_depth = 3,
                       GroupBuildStats* stats = nullptr);

/// Canonical interchange form: "key<TAB>word" per member, groups in id order.
std::string to_canonical_tsv(const GroupTable& table, const Vocabulary& vocab);

/// Group key of a tree number truncated to `depth` dot components. Throws on a
/// malformed tree number.
std::string tree_number_prefix(std::string_view tree_number, std::size_t depth);

/// Trainable group vectors g (N x d) and per-group member counts.
struct GroupEmbeddings {
  Matrix values;
  std::vector<std::size_t> member_counts;
};

/// Row k is the arithmetic mean of the pretrained rows of members(k), summed
/// in ascending member id order.
GroupEmbeddings init_group_embeddings(const GroupTable& table, const Matrix& pretrained);

}  // namespace gshare
