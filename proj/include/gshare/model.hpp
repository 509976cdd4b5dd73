#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gshare/corpus.hpp"
#include "gshare/groups.hpp"
#include "gshare/hashshare.hpp"
#include "gshare/matrix.hpp"
#include "gshare/nnet.hpp"

namespace gshare {

/// How the second channel is built and trained.
///   none                 single-channel model over E^p (alias p_only)
///   random               E^s drawn uniformly, trained as a plain matrix
///   group_init_no_share  E^s initialized from group means, trained as a plain matrix
///   group_init_share     E^s tied to group vectors through the sharing layout
enum class Channel2Mode { none, random, group_init_no_share, group_init_share };

Channel2Mode parse_channel2_mode(std::string_view s);
std::string_view to_string(Channel2Mode mode);

struct ModelConfig {
  std::vector<std::size_t> filter_heights{3, 4, 5};
  std::size_t filters_per_height = 100;
  int num_classes = 2;
  double dropout_rate = 0.5;
  Channel2Mode channel2 = Channel2Mode::group_init_share;
  bool signing_enabled = true;
  std::uint64_t seed = 1;
  AdadeltaConfig adadelta;
  double random_init_scale = 0.25;

  void validate() const;
  std::size_t num_channels() const { return channel2 == Channel2Mode::none ? 1 : 2; }
  std::size_t max_height() const;
  /// Length of the concatenated pooled feature vector.
  std::size_t feature_size() const {
    return num_channels() * filter_heights.size() * filters_per_height;
  }
  bool uses_groups() const {
    return channel2 == Channel2Mode::group_init_no_share ||
           channel2 == Channel2Mode::group_init_share;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Trainable state. Channel 0 reads `pretrained`; channel 1 reads
/// `channel2` (plain modes) or `shared.values()` (share mode), in which case
/// `group_values` holds the underlying parameters g.
struct ModelParams {
  Matrix pretrained;
  Matrix channel2;
  SharedEmbedding shared;
  Matrix group_values;
  std::array<std::vector<ConvFilterBank>, 2> banks;
  Matrix softmax_w;  // feature_size x num_classes
  std::vector<double> softmax_b;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradients shaped like ModelParams. `channel2` holds the gradient with
/// respect to the matrix channel 1 reads (E^s in share mode).
struct Gradients {
  Matrix pretrained;
  Matrix channel2;
  std::array<std::vector<ConvFilterBank>, 2> banks;
  Matrix softmax_w;
  std::vector<double> softmax_b;

  void scale(double s);
};

struct BankState {
  AdadeltaState weights;
  AdadeltaState bias;

  friend bool operator==(const BankState&, const BankState&) = default;
};

struct OptimizerState {
  AdadeltaState pretrained;
  AdadeltaState channel2;  // plain matrix, or E^s private rows in share mode
  AdadeltaState group_values;
  std::array<std::vector<BankState>, 2> banks;
  AdadeltaState softmax_w;
  AdadeltaState softmax_b;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct Example {
  std::span<const WordId> tokens;
  int label = 0;
};

struct ChannelCache {
  Matrix input;                                  // padded length x d
  std::vector<Matrix> maps;                      // per height
  std::vector<std::vector<std::size_t>> argmax;  // per height, per filter
};

struct ForwardResult {
  std::vector<WordId> tokens;  // padded
  std::size_t real_length = 0;
  std::array<ChannelCache, 2> channels;
  std::vector<double> features;  // after dropout
  std::vector<double> dropout_mask;
  std::vector<double> logits;
  std::vector<double> probs;
};

struct Predictions {
  std::vector<int> labels;
  std::vector<double> positive_scores;  // probability of class 1
};

/// The two-channel CNN. The PAD id is the last embedding row; its vectors are
/// zero and never updated.
class Model {
 public:
  /// `groups` is required for the group_init_* modes. `layout`, when given,
  /// replaces the hashed sharing layout (share and no-share modes).
  Model(ModelConfig config, Matrix pretrained, std::optional<GroupTable> groups = std::nullopt,
        std::optional<SharingLayout> layout = std::nullopt);

  /// Assembles a model from stored state (checkpoint load).
  Model(ModelConfig config, ModelParams params, OptimizerState opt, std::uint64_t step,
        std::optional<GroupTable> groups, HashSpec hash);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const OptimizerState& optimizer() const { return opt_; }
  const std::optional<GroupTable>& groups() const { return groups_; }
  const HashSpec& hash_spec() const { return hash_; }
  std::uint64_t step() const { return step_; }
  std::size_t dim() const { return params_.pretrained.cols(); }
  std::size_t rows() const { return params_.pretrained.rows(); }
  WordId pad_id() const { return static_cast<WordId>(rows() - 1); }

  /// Matrix read by channel 1 (empty for single-channel models).
  const Matrix& channel2_matrix() const;

  ForwardResult forward(std::span<const WordId> tokens, Mode mode,
                        std::uint64_t dropout_seed = 0) const;
  std::vector<double> predict_proba(std::span<const WordId> tokens) const;
  Predictions predict(const std::vector<std::vector<WordId>>& docs) const;

  /// Recomputes every tied E^s entry from g; no-op outside share mode.
  void sync();

  /// Loss of one example and its gradient accumulated into `grads`.
  double backward(const ForwardResult& fwd, int label, Gradients& grads) const;

  /// Mean batch loss and mean gradients at the current parameters. Dropout
  /// masks are keyed by (seed, step, position in batch).
  double compute_gradients(std::span<const Example> batch, Gradients& grads) const;

  /// Adadelta on every parameter and advances the step counter. Share mode
  /// routes channel-1 gradients through aggregate_gradients into g.
  void apply_gradients(Gradients grads);

  /// sync, forward/backward over the batch, update. Returns mean loss.
  double train_step(std::span<const Example> batch);

  Gradients zero_gradients() const;
  std::uint64_t dropout_seed(std::uint64_t step, std::size_t item) const;

 private:
  void init_parameters(std::optional<SharingLayout> layout);
  void init_optimizer();
  void check_state() const;

  ModelConfig config_;
  ModelParams params_;
  OptimizerState opt_;
  std::optional<GroupTable> groups_;
  HashSpec hash_;
  std::uint64_t step_ = 0;
};

/// Checkpoint file: magic, format version, then tagged sections.
void save_checkpoint(const Model& model, const Vocabulary& vocab,
                     const std::filesystem::path& path);

struct Checkpoint {
  Model model;
  Vocabulary vocab;
  std::vector<std::string> sections;  // tags present in the file, in order
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gshare
