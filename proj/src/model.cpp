#include "gshare/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gshare/random.hpp"

namespace gshare {

Channel2Mode parse_channel2_mode(std::string_view s) {
  if (s == "none" || s == "p_only") return Channel2Mode::none;
  if (s == "random") return Channel2Mode::random;
  if (s == "no_share" || s == "group_init_no_share") return Channel2Mode::group_init_no_share;
  if (s == "share" || s == "group_init_share") return Channel2Mode::group_init_share;
  throw std::invalid_argument("unknown channel2 mode '" + std::string(s) +
                              "' (expected none|random|group_init_no_share|group_init_share)");
}

std::string_view to_string(Channel2Mode mode) {
  switch (mode) {
    case Channel2Mode::none: return "none";
    case Channel2Mode::random: return "random";
    case Channel2Mode::group_init_no_share: return "group_init_no_share";
    case Channel2Mode::group_init_share: return "group_init_share";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (filter_heights.empty()) throw std::invalid_argument("model: filter_heights is empty");
  std::set<std::size_t> seen;
  for (auto h : filter_heights) {
    if (h == 0) throw std::invalid_argument("model: filter heights must be >= 1");
    if (!seen.insert(h).second) throw std::invalid_argument("model: filter heights must be distinct");
  }
  if (filters_per_height == 0) throw std::invalid_argument("model: filters_per_height must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("model: num_classes must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("model: dropout_rate must be in [0, 1)");
  }
  if (!(adadelta.rho > 0.0 && adadelta.rho < 1.0) || !(adadelta.epsilon > 0.0)) {
    throw std::invalid_argument("model: adadelta rho must be in (0, 1) and epsilon > 0");
  }
  if (!(random_init_scale >= 0.0)) throw std::invalid_argument("model: random_init_scale < 0");
}

std::size_t ModelConfig::max_height() const {
  return *std::max_element(filter_heights.begin(), filter_heights.end());
}

void Gradients::scale(double s) {
  for (auto& v : pretrained.values()) v *= s;
  for (auto& v : channel2.values()) v *= s;
  for (auto& ch : banks) {
    for (auto& b : ch) {
      for (auto& v : b.weights.values()) v *= s;
      for (auto& v : b.bias) v *= s;
    }
  }
  for (auto& v : softmax_w.values()) v *= s;
  for (auto& v : softmax_b) v *= s;
}

Model::Model(ModelConfig config, Matrix pretrained, std::optional<GroupTable> groups,
             std::optional<SharingLayout> layout)
    : config_(std::move(config)), groups_(std::move(groups)) {
  config_.validate();
  if (pretrained.rows() < 2 || pretrained.cols() == 0) {
    throw std::invalid_argument("model: pretrained matrix needs a PAD row and d > 0");
  }
  for (double v : pretrained.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument("model: pretrained matrix is not finite");
  }
  if (config_.uses_groups()) {
    if (!groups_) throw std::invalid_argument("model: channel2 mode requires a group table");
    if (groups_->num_words() != pretrained.rows()) {
      throw std::invalid_argument("model: group table sized for " +
                                  std::to_string(groups_->num_words()) + " rows, embeddings have " +
                                  std::to_string(pretrained.rows()));
    }
  }
  hash_ = HashSpec{derive_seed(config_.seed, "hash"), config_.signing_enabled, kMixerVersion};
  params_.pretrained = std::move(pretrained);
  auto pad = params_.pretrained.row(pad_id());
  std::fill(pad.begin(), pad.end(), 0.0);
  init_parameters(std::move(layout));
  init_optimizer();
}

Model::Model(ModelConfig config, ModelParams params, OptimizerState opt, std::uint64_t step,
             std::optional<GroupTable> groups, HashSpec hash)
    : config_(std::move(config)),
      params_(std::move(params)),
      opt_(std::move(opt)),
      groups_(std::move(groups)),
      hash_(hash),
      step_(step) {
  config_.validate();
  check_state();
}

void Model::check_state() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("model state inconsistent: " + what);
  };
  const std::size_t n_rows = rows();
  const std::size_t d = dim();
  if (n_rows < 2 || d == 0) fail("embedding matrix shape");
  if (opt_.pretrained.size() != params_.pretrained.size()) fail("E^p optimizer state");
  switch (config_.channel2) {
    case Channel2Mode::none:
      break;
    case Channel2Mode::random:
    case Channel2Mode::group_init_no_share:
      if (!params_.channel2.same_shape(params_.pretrained)) fail("channel-2 matrix shape");
      if (opt_.channel2.size() != params_.channel2.size()) fail("channel-2 optimizer state");
      break;
    case Channel2Mode::group_init_share: {
      const auto& l = params_.shared.layout();
      if (!groups_ || l.rows() != n_rows || l.dim() != d || l.num_groups() != groups_->num_groups())
        fail("sharing layout");
      if (!params_.shared.values().same_shape(params_.pretrained)) fail("E^s shape");
      if (params_.group_values.rows() != l.num_groups() || params_.group_values.cols() != d)
        fail("group matrix shape");
      if (opt_.group_values.size() != params_.group_values.size() ||
          opt_.channel2.size() != params_.shared.values().size())
        fail("share-mode optimizer state");
      break;
    }
  }
  if (config_.uses_groups() && (!groups_ || groups_->num_words() != n_rows)) fail("group table");
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t expected = c < config_.num_channels() ? config_.filter_heights.size() : 0;
    if (params_.banks[c].size() != expected || opt_.banks[c].size() != expected) fail("filter banks");
    for (std::size_t hi = 0; hi < expected; ++hi) {
      const auto& b = params_.banks[c][hi];
      if (b.height != config_.filter_heights[hi] || b.dim != d ||
          b.num_filters() != config_.filters_per_height)
        fail("filter bank shape");
    }
  }
  if (params_.softmax_w.rows() != config_.feature_size() ||
      params_.softmax_w.cols() != static_cast<std::size_t>(config_.num_classes) ||
      params_.softmax_b.size() != static_cast<std::size_t>(config_.num_classes))
    fail("softmax shape");
  if (opt_.softmax_w.size() != params_.softmax_w.size() ||
      opt_.softmax_b.size() != params_.softmax_b.size())
    fail("softmax optimizer state");
}

void Model::init_parameters(std::optional<SharingLayout> layout) {
  const std::size_t d = dim();
  const std::size_t n_rows = rows();
  const auto& pre = params_.pretrained;

  switch (config_.channel2) {
    case Channel2Mode::none:
      break;
    case Channel2Mode::random: {
      params_.channel2 = Matrix(n_rows, d);
      const OovPolicy policy{OovPolicy::Kind::uniform, config_.random_init_scale,
                             derive_seed(config_.seed, "channel2-random")};
      for (WordId w = 0; w + 1 < n_rows; ++w) fill_oov_row(params_.channel2.row(w), policy, w);
      break;
    }
    case Channel2Mode::group_init_no_share:
    case Channel2Mode::group_init_share: {
      auto ge = init_group_embeddings(*groups_, pre);
      SharingLayout l = layout ? std::move(*layout) : SharingLayout::hashed(*groups_, d, hash_);
      if (l.rows() != n_rows || l.dim() != d || l.num_groups() != groups_->num_groups()) {
        throw std::invalid_argument("model: sharing layout does not match the model shape");
      }
      auto shared = init_shared(std::move(l), ge.values, pre);
      if (config_.channel2 == Channel2Mode::group_init_share) {
        params_.shared = std::move(shared);
        params_.group_values = std::move(ge.values);
      } else {
        params_.channel2 = shared.values();
      }
      break;
    }
  }

  for (std::size_t c = 0; c < config_.num_channels(); ++c) {
    auto& banks = params_.banks[c];
    for (std::size_t hi = 0; hi < config_.filter_heights.size(); ++hi) {
      ConvFilterBank bank(config_.filter_heights[hi], d, config_.filters_per_height);
      Rng rng(derive_seed(config_.seed, c == 0 ? "conv-channel1" : "conv-channel2", hi));
      bank.randomize(rng);
      banks.push_back(std::move(bank));
    }
  }

  const std::size_t f = config_.feature_size();
  const auto n_classes = static_cast<std::size_t>(config_.num_classes);
  params_.softmax_w = Matrix(f, n_classes);
  params_.softmax_b.assign(n_classes, 0.0);
  Rng rng(derive_seed(config_.seed, "softmax"));
  const double bound = std::sqrt(6.0 / static_cast<double>(f + n_classes));
  for (auto& v : params_.softmax_w.values()) v = rng.uniform(-bound, bound);
}

void Model::init_optimizer() {
  opt_.pretrained = AdadeltaState(params_.pretrained.size());
  opt_.channel2 = AdadeltaState(channel2_matrix().size());
  opt_.group_values = AdadeltaState(params_.group_values.size());
  for (std::size_t c = 0; c < 2; ++c) {
    opt_.banks[c].clear();
    for (const auto& b : params_.banks[c]) {
      opt_.banks[c].push_back({AdadeltaState(b.weights.size()), AdadeltaState(b.bias.size())});
    }
  }
  opt_.softmax_w = AdadeltaState(params_.softmax_w.size());
  opt_.softmax_b = AdadeltaState(params_.softmax_b.size());
}

const Matrix& Model::channel2_matrix() const {
  return config_.channel2 == Channel2Mode::group_init_share ? params_.shared.values()
                                                            : params_.channel2;
}

Gradients Model::zero_gradients() const {
  Gradients g;
  g.pretrained = Matrix(rows(), dim());
  g.channel2 = Matrix(channel2_matrix().rows(), channel2_matrix().cols());
  for (std::size_t c = 0; c < 2; ++c) {
    for (const auto& b : params_.banks[c]) {
      g.banks[c].emplace_back(b.height, b.dim, b.num_filters());
    }
  }
  g.softmax_w = Matrix(params_.softmax_w.rows(), params_.softmax_w.cols());
  g.softmax_b.assign(params_.softmax_b.size(), 0.0);
  return g;
}

std::uint64_t Model::dropout_seed(std::uint64_t step, std::size_t item) const {
  return mix3(derive_seed(config_.seed, "dropout"), step, item);
}

ForwardResult Model::forward(std::span<const WordId> tokens, Mode mode,
                             std::uint64_t dropout_seed) const {
  if (tokens.empty()) throw std::invalid_argument("forward: empty document");
  ForwardResult r;
  r.real_length = tokens.size();
  const std::size_t padded = std::max(tokens.size(), config_.max_height());
  r.tokens.assign(tokens.begin(), tokens.end());
  r.tokens.resize(padded, pad_id());
  for (auto id : r.tokens) {
    if (id >= rows()) throw std::out_of_range("forward: token id " + std::to_string(id) + " >= V");
  }

  const std::size_t d = dim();
  const std::size_t per_channel = config_.filter_heights.size() * config_.filters_per_height;
  r.features.assign(config_.feature_size(), 0.0);

  for (std::size_t c = 0; c < config_.num_channels(); ++c) {
    const Matrix& table = c == 0 ? params_.pretrained : channel2_matrix();
    auto& cache = r.channels[c];
    cache.input = Matrix(padded, d);
    for (std::size_t t = 0; t < padded; ++t) {
      const auto src = table.row(r.tokens[t]);
      std::copy(src.begin(), src.end(), cache.input.row(t).begin());
    }
    for (std::size_t hi = 0; hi < params_.banks[c].size(); ++hi) {
      const auto& bank = params_.banks[c][hi];
      // Windows that start inside the real tokens; all-padding windows are masked.
      const std::size_t windows = std::min(padded - bank.height + 1, r.real_length);
      Matrix maps = conv_forward(cache.input, bank, Activation::relu, windows);
      std::vector<std::size_t> arg(bank.num_filters());
      for (std::size_t f = 0; f < bank.num_filters(); ++f) {
        const auto p = maxpool1(maps.row(f));
        arg[f] = p.index;
        r.features[c * per_channel + hi * config_.filters_per_height + f] = p.value;
      }
      cache.maps.push_back(std::move(maps));
      cache.argmax.push_back(std::move(arg));
    }
  }

  r.dropout_mask = dropout(r.features, config_.dropout_rate, mode, dropout_seed);

  const auto n_classes = static_cast<std::size_t>(config_.num_classes);
  std::vector<double> logits(params_.softmax_b);
  for (std::size_t i = 0; i < r.features.size(); ++i) {
    const double x = r.features[i];
    if (x == 0.0) continue;
    const auto w = params_.softmax_w.row(i);
    for (std::size_t k = 0; k < n_classes; ++k) logits[k] += x * w[k];
  }
  r.probs = softmax(logits);
  r.logits = std::move(logits);
  return r;
}

double Model::backward(const ForwardResult& fwd, int label, Gradients& grads) const {
  if (label < 0 || label >= config_.num_classes) {
    throw std::invalid_argument("backward: label " + std::to_string(label) + " out of range");
  }
  const double loss = softmax_xent(fwd.logits, label).loss;
  const auto dlogits = xent_backward(fwd.probs, label);
  const auto n_classes = dlogits.size();

  std::vector<double> dfeat(fwd.features.size(), 0.0);
  for (std::size_t i = 0; i < fwd.features.size(); ++i) {
    const auto w = params_.softmax_w.row(i);
    auto gw = grads.softmax_w.row(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      gw[k] += fwd.features[i] * dlogits[k];
      acc += w[k] * dlogits[k];
    }
    dfeat[i] = acc * fwd.dropout_mask[i];
  }
  for (std::size_t k = 0; k < n_classes; ++k) grads.softmax_b[k] += dlogits[k];

  const std::size_t per_channel = config_.filter_heights.size() * config_.filters_per_height;
  for (std::size_t c = 0; c < config_.num_channels(); ++c) {
    const auto& cache = fwd.channels[c];
    Matrix grad_input(cache.input.rows(), cache.input.cols());
    for (std::size_t hi = 0; hi < params_.banks[c].size(); ++hi) {
      const auto& bank = params_.banks[c][hi];
      const auto& maps = cache.maps[hi];
      Matrix grad_maps(maps.rows(), maps.cols());
      for (std::size_t f = 0; f < bank.num_filters(); ++f) {
        grad_maps(f, cache.argmax[hi][f]) =
            dfeat[c * per_channel + hi * config_.filters_per_height + f];
      }
      conv_backward(cache.input, bank, maps, grad_maps, Activation::relu, grads.banks[c][hi],
                    grad_input);
    }
    Matrix& target = c == 0 ? grads.pretrained : grads.channel2;
    for (std::size_t t = 0; t < fwd.tokens.size(); ++t) {
      auto dst = target.row(fwd.tokens[t]);
      const auto src = grad_input.row(t);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  return loss;
}

double Model::compute_gradients(std::span<const Example> batch, Gradients& grads) const {
  if (batch.empty()) throw std::invalid_argument("compute_gradients: empty batch");
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto fwd = forward(batch[b].tokens, Mode::train, dropout_seed(step_, b));
    loss += backward(fwd, batch[b].label, grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  grads.scale(inv);
  return loss * inv;
}

void Model::apply_gradients(Gradients grads) {
  const auto& ad = config_.adadelta;
  const std::size_t d = dim();
  auto zero_pad = [&](Matrix& m) {
    if (m.rows() == 0) return;
    auto r = m.row(pad_id());
    std::fill(r.begin(), r.end(), 0.0);
  };
  zero_pad(grads.pretrained);
  zero_pad(grads.channel2);

  adadelta_update(params_.pretrained.values(), grads.pretrained.values(), opt_.pretrained, ad);

  switch (config_.channel2) {
    case Channel2Mode::none:
      break;
    case Channel2Mode::random:
    case Channel2Mode::group_init_no_share:
      adadelta_update(params_.channel2.values(), grads.channel2.values(), opt_.channel2, ad);
      break;
    case Channel2Mode::group_init_share: {
      const auto& layout = params_.shared.layout();
      const Matrix grad_g = aggregate_gradients(grads.channel2, layout);
      adadelta_update(params_.group_values.values(), grad_g.values(), opt_.group_values, ad);
      auto& values = params_.shared.values();
      for (WordId w = 0; w < rows(); ++w) {
        if (!layout.is_private(w)) continue;
        adadelta_update(values.row(w), grads.channel2.row(w), opt_.channel2, ad, w * d);
      }
      break;
    }
  }

  for (std::size_t c = 0; c < config_.num_channels(); ++c) {
    for (std::size_t hi = 0; hi < params_.banks[c].size(); ++hi) {
      auto& bank = params_.banks[c][hi];
      auto& st = opt_.banks[c][hi];
      adadelta_update(bank.weights.values(), grads.banks[c][hi].weights.values(), st.weights, ad);
      adadelta_update(bank.bias, grads.banks[c][hi].bias, st.bias, ad);
    }
  }
  adadelta_update(params_.softmax_w.values(), grads.softmax_w.values(), opt_.softmax_w, ad);
  adadelta_update(params_.softmax_b, grads.softmax_b, opt_.softmax_b, ad);
  ++step_;
}

void Model::sync() {
  if (config_.channel2 == Channel2Mode::group_init_share) {
    sync_forward(params_.shared, params_.group_values);
  }
}

double Model::train_step(std::span<const Example> batch) {
  sync();
  Gradients grads = zero_gradients();
  const double loss = compute_gradients(batch, grads);
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "train_step: non-finite loss " << loss << " at step " << step_ << " (batch of "
        << batch.size() << ")";
    throw std::runtime_error(msg.str());
  }
  apply_gradients(std::move(grads));
  // Keep E^s consistent with g between steps so inference reads current values.
  sync();
  return loss;
}

std::vector<double> Model::predict_proba(std::span<const WordId> tokens) const {
  return forward(tokens, Mode::eval).probs;
}

Predictions Model::predict(const std::vector<std::vector<WordId>>& docs) const {
  Predictions out;
  out.labels.reserve(docs.size());
  out.positive_scores.reserve(docs.size());
  for (const auto& doc : docs) {
    const auto probs = predict_proba(doc);
    out.labels.push_back(static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                                          probs.begin()));
    out.positive_scores.push_back(probs[1]);
  }
  return out;
}

}  // namespace gshare
