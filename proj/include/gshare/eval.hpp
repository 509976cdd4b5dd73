#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gshare/corpus.hpp"
#include "gshare/groups.hpp"
#include "gshare/matrix.hpp"
#include "gshare/model.hpp"

namespace gshare {

using Fold = std::vector<std::size_t>;

/// Partitions [0, labels.size()) into k folds. Stratified folds deal every
/// class round-robin so each fold holds floor or ceil of its class share.
std::vector<Fold> kfold_split(std::span<const int> labels, std::size_t k, std::uint64_t seed,
                              bool stratified);

/// Keeps every item of the smallest class and samples the others without
/// replacement down to that count. Result is in ascending index order.
std::vector<std::size_t> downsample(std::span<const std::size_t> items,
                                    std::span<const int> labels, std::uint64_t seed);

double accuracy(std::span<const int> predicted, std::span<const int> gold);

/// Mann-Whitney AUC with average ranks for ties. `gold` is binary, 1 positive.
double auc(std::span<const double> scores, std::span<const int> gold);

enum class Metric { accuracy, auc };
Metric parse_metric(std::string_view s);
std::string_view to_string(Metric m);

struct TrainingConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 50;
  bool downsample = false;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

struct ExperimentConfig {
  ModelConfig model;
  TrainingConfig training;
  std::size_t folds = 10;
  std::size_t replications = 5;
  std::uint64_t seed = 1;
  Metric metric = Metric::accuracy;
  bool stratified = true;
  std::size_t jobs = 1;

  void validate() const;
};

/// In-memory inputs shared read-only by every fold.
struct ExperimentData {
  Dataset dataset;
  Matrix pretrained;
  std::optional<GroupTable> groups;
};

/// Per-epoch mean training loss, for logging.
using EpochLogger = std::function<void(std::size_t epoch, double mean_loss)>;

/// Trains a fresh model on `train` items for the configured epochs. Each epoch
/// reshuffles (and, when enabled, re-downsamples) from seeds derived from
/// `model_cfg.seed` and the epoch index.
Model train_model(const ExperimentData& data, std::span<const std::size_t> train,
                  const ModelConfig& model_cfg, const TrainingConfig& training,
                  const EpochLogger& log = {});

double evaluate_model(const Model& model, const Dataset& dataset,
                      std::span<const std::size_t> test, Metric metric);

struct FoldRecord {
  std::size_t replication = 0;  // 1-based
  std::size_t fold = 0;         // 1-based
  std::uint64_t model_seed = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double value = 0.0;
};

struct ReplicationRecord {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  double value = 0.0;  // mean over folds
};

struct ExperimentReport {
  std::string config_echo;
  Metric metric = Metric::accuracy;
  std::vector<FoldRecord> folds;
  std::vector<ReplicationRecord> replications;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;

  /// One record per fold, one per replication, then the aggregate block.
  std::string to_text() const;
  /// key=value summary.
  std::string summary() const;
};

/// Seeds used by replication r (1-based).
std::uint64_t replication_seed(std::uint64_t master, std::size_t r);
std::uint64_t fold_split_seed(std::uint64_t replication_seed);
std::uint64_t fold_model_seed(std::uint64_t replication_seed, std::size_t fold);

ExperimentReport run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                std::string config_echo = {});

}  // namespace gshare
