#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gshare/corpus.hpp"
#include "gshare/groups.hpp"
#include "gshare/matrix.hpp"
#include "gshare/random.hpp"

namespace gshare {

struct HashSpec {
  std::uint64_t seed = 0;
  bool signing_enabled = true;
  std::uint32_t mixer_version = kMixerVersion;

  friend bool operator==(const HashSpec&, const HashSpec&) = default;
};

/// Index in [0, K) of the group that coordinate (word, dim) draws from. The
/// group itself is G(word)[hash_dim(...)]. Throws when K == 0.
std::size_t hash_dim(WordId word, std::size_t dim, std::size_t num_groups,
                     const HashSpec& spec);

/// Signing hash b(word, dim) in {+1, -1}; always +1 with signing disabled.
int sign(WordId word, std::size_t dim, const HashSpec& spec);

/// Precomputed coordinate -> (group, sign) assignment for every (i, j). Rows
/// of ungrouped words are private and hold kPrivate.
class SharingLayout {
 public:
  static constexpr std::int32_t kPrivate = -1;

  /// Assignment through hash_dim and sign.
  static SharingLayout hashed(const GroupTable& table, std::size_t dim, const HashSpec& spec);

  /// Assignment through caller-supplied functions. `pick` returns a group id
  /// that must belong to G(word).
  using GroupPicker = std::function<GroupId(WordId word, std::size_t dim)>;
  using SignPicker = std::function<int(WordId word, std::size_t dim)>;
  static SharingLayout custom(const GroupTable& table, std::size_t dim, const GroupPicker& pick,
                              const SignPicker& signer);

  /// Rebuilds a layout from stored arrays (checkpoint load).
  static SharingLayout from_arrays(std::size_t rows, std::size_t dim, std::size_t num_groups,
                                   std::vector<std::int32_t> groups, std::vector<std::int8_t> signs);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_groups() const { return num_groups_; }

  bool is_private(WordId word) const { return private_[word] != 0; }
  std::int32_t group(WordId word, std::size_t j) const { return groups_[word * dim_ + j]; }
  int sign(WordId word, std::size_t j) const { return signs_[word * dim_ + j]; }

  const std::vector<std::int32_t>& group_array() const { return groups_; }
  const std::vector<std::int8_t>& sign_array() const { return signs_; }

  friend bool operator==(const SharingLayout&, const SharingLayout&) = default;

 private:
  void finalize_private();

  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::size_t num_groups_ = 0;
  std::vector<std::int32_t> groups_;
  std::vector<std::int8_t> signs_;
  std::vector<char> private_;
};

/// The materialized shared matrix E^s. Non-private entries are a signed copy
/// of one group coordinate; private rows are ordinary parameters.
class SharedEmbedding {
 public:
  SharedEmbedding() = default;
  SharedEmbedding(SharingLayout layout, Matrix values)
      : layout_(std::move(layout)), values_(std::move(values)) {}

  const SharingLayout& layout() const { return layout_; }
  const Matrix& values() const { return values_; }
  /// Mutable access for private-row updates.
  Matrix& values() { return values_; }

  friend bool operator==(const SharedEmbedding&, const SharedEmbedding&) = default;

 private:
  SharingLayout layout_;
  Matrix values_;
};

/// Builds E^s: shared rows from the groups, private rows copied from
/// `pretrained`.
SharedEmbedding init_shared(SharingLayout layout, const Matrix& group_values,
                            const Matrix& pretrained);
SharedEmbedding init_shared(const GroupTable& table, const GroupEmbeddings& groups,
                            const Matrix& pretrained, const HashSpec& spec);

/// Recomputes every non-private entry from the group values. Idempotent.
void sync_forward(SharedEmbedding& shared, const Matrix& group_values);

/// Sums signed E^s gradients into an N x d group gradient. Private rows are
/// ignored.
Matrix aggregate_gradients(const Matrix& grad_shared, const SharingLayout& layout);

}  // namespace gshare
