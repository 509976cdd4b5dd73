#include "gshare/hashshare.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "gshare/random.hpp"

namespace gshare {

namespace {

// b draws from its own stream so that it is independent of the bucket hash.
constexpr std::uint64_t kSignSalt = 0xA5A5F00DC0FFEE11ULL;

void check_mixer(const HashSpec& spec) {
  if (spec.mixer_version != kMixerVersion) {
    throw std::invalid_argument("unsupported hash mixer version " +
                                std::to_string(spec.mixer_version));
  }
}

}  // namespace

std::size_t hash_dim(WordId word, std::size_t dim, std::size_t num_groups,
                     const HashSpec& spec) {
  if (num_groups == 0) throw std::invalid_argument("hash_dim: word has no groups");
  check_mixer(spec);
  return static_cast<std::size_t>(mix3(spec.seed, word, dim) % num_groups);
}

int sign(WordId word, std::size_t dim, const HashSpec& spec) {
  if (!spec.signing_enabled) return 1;
  check_mixer(spec);
  return (mix3(spec.seed ^ kSignSalt, word, dim) >> 63) ? -1 : 1;
}

SharingLayout SharingLayout::hashed(const GroupTable& table, std::size_t dim,
                                    const HashSpec& spec) {
  return custom(
      table, dim,
      [&](WordId w, std::size_t j) {
        const auto& gs = table.groups_of(w);
        return gs[hash_dim(w, j, gs.size(), spec)];
      },
      [&](WordId w, std::size_t j) { return gshare::sign(w, j, spec); });
}

SharingLayout SharingLayout::custom(const GroupTable& table, std::size_t dim,
                                    const GroupPicker& pick, const SignPicker& signer) {
  if (dim == 0) throw std::invalid_argument("SharingLayout: zero dimension");
  SharingLayout l;
  l.rows_ = table.num_words();
  l.dim_ = dim;
  l.num_groups_ = table.num_groups();
  l.groups_.assign(l.rows_ * dim, kPrivate);
  l.signs_.assign(l.rows_ * dim, 1);
  for (WordId w = 0; w < l.rows_; ++w) {
    const auto& gs = table.groups_of(w);
    if (gs.empty()) continue;
    for (std::size_t j = 0; j < dim; ++j) {
      const GroupId g = pick(w, j);
      if (std::find(gs.begin(), gs.end(), g) == gs.end()) {
        throw std::invalid_argument("SharingLayout: word " + std::to_string(w) +
                                    " assigned to group " + std::to_string(g) +
                                    " it does not belong to");
      }
      const int s = signer(w, j);
      if (s != 1 && s != -1) throw std::invalid_argument("SharingLayout: sign must be +1 or -1");
      l.groups_[w * dim + j] = static_cast<std::int32_t>(g);
      l.signs_[w * dim + j] = static_cast<std::int8_t>(s);
    }
  }
  l.finalize_private();
  return l;
}

SharingLayout SharingLayout::from_arrays(std::size_t rows, std::size_t dim,
                                         std::size_t num_groups,
                                         std::vector<std::int32_t> groups,
                                         std::vector<std::int8_t> signs) {
  if (dim == 0 || groups.size() != rows * dim || signs.size() != rows * dim) {
    throw std::invalid_argument("SharingLayout: array size mismatch");
  }
  SharingLayout l;
  l.rows_ = rows;
  l.dim_ = dim;
  l.num_groups_ = num_groups;
  l.groups_ = std::move(groups);
  l.signs_ = std::move(signs);
  for (std::size_t r = 0; r < rows; ++r) {
    const bool priv = l.groups_[r * dim] == kPrivate;
    for (std::size_t j = 0; j < dim; ++j) {
      const auto g = l.groups_[r * dim + j];
      if ((g == kPrivate) != priv || (g != kPrivate && (g < 0 || std::size_t(g) >= num_groups))) {
        throw std::invalid_argument("SharingLayout: inconsistent group entry");
      }
      const auto s = l.signs_[r * dim + j];
      if (s != 1 && s != -1) throw std::invalid_argument("SharingLayout: bad sign entry");
    }
  }
  l.finalize_private();
  return l;
}

void SharingLayout::finalize_private() {
  private_.assign(rows_, 0);
  for (std::size_t r = 0; r < rows_; ++r) {
    private_[r] = groups_[r * dim_] == kPrivate ? 1 : 0;
  }
}

SharedEmbedding init_shared(SharingLayout layout, const Matrix& group_values,
                            const Matrix& pretrained) {
  require_shape(pretrained, layout.rows(), layout.dim(), "init_shared: pretrained");
  require_shape(group_values, layout.num_groups(), layout.dim(), "init_shared: group values");
  Matrix values(layout.rows(), layout.dim());
  for (WordId w = 0; w < layout.rows(); ++w) {
    if (layout.is_private(w)) {
      const auto src = pretrained.row(w);
      std::copy(src.begin(), src.end(), values.row(w).begin());
    }
  }
  SharedEmbedding shared(std::move(layout), std::move(values));
  sync_forward(shared, group_values);
  return shared;
}

SharedEmbedding init_shared(const GroupTable& table, const GroupEmbeddings& groups,
                            const Matrix& pretrained, const HashSpec& spec) {
  if (table.num_words() != pretrained.rows()) {
    throw std::invalid_argument("init_shared: group table sized for " +
                                std::to_string(table.num_words()) + " rows, pretrained has " +
                                std::to_string(pretrained.rows()));
  }
  return init_shared(SharingLayout::hashed(table, pretrained.cols(), spec), groups.values,
                     pretrained);
}

void sync_forward(SharedEmbedding& shared, const Matrix& group_values) {
  const auto& layout = shared.layout();
  require_shape(group_values, layout.num_groups(), layout.dim(), "sync_forward: group values");
  auto& values = shared.values();
  const std::size_t d = layout.dim();
  for (WordId w = 0; w < layout.rows(); ++w) {
    if (layout.is_private(w)) continue;
    auto row = values.row(w);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = group_values(static_cast<std::size_t>(layout.group(w, j)), j) * layout.sign(w, j);
    }
  }
}

Matrix aggregate_gradients(const Matrix& grad_shared, const SharingLayout& layout) {
  require_shape(grad_shared, layout.rows(), layout.dim(), "aggregate_gradients");
  Matrix grad(layout.num_groups(), layout.dim());
  const std::size_t d = layout.dim();
  for (WordId w = 0; w < layout.rows(); ++w) {
    if (layout.is_private(w)) continue;
    const auto row = grad_shared.row(w);
    for (std::size_t j = 0; j < d; ++j) {
      grad(static_cast<std::size_t>(layout.group(w, j)), j) += row[j] * layout.sign(w, j);
    }
  }
  return grad;
}

}  // namespace gshare
