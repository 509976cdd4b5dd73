#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gshare/corpus.hpp"
#include "gshare/eval.hpp"
#include "gshare/groups.hpp"
#include "gshare/model.hpp"

namespace gshare {

/// Input locations. Relative paths are resolved against the config file's
/// directory when loaded from disk.
struct DataConfig {
  std::string dataset;
  std::string embeddings;  // empty: every row drawn from the OOV policy
  EmbeddingFormat embeddings_format = EmbeddingFormat::text;
  std::size_t embedding_dim = 0;  // required when `embeddings` is empty
  double oov_scale = 0.25;
  VocabOrder vocab_order = VocabOrder::first_occurrence;
  std::string groups;
  ResourceKind groups_kind = ResourceKind::tsv;
  std::size_t prefix_depth = 3;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

/// Everything a run needs, mirrored one-to-one by the INI-style config file:
///
///   [data]   dataset embeddings embeddings_format embedding_dim oov_scale
///            vocab_order groups groups_kind prefix_depth
///   [model]  channel2 filter_heights filters_per_height num_classes dropout
///            signing adadelta_rho adadelta_epsilon random_init_scale
///   [train]  epochs batch_size downsample
///   [eval]   folds replications metric stratified
///   [run]    seed jobs
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainingConfig training;
  std::size_t folds = 10;
  std::size_t replications = 5;
  Metric metric = Metric::accuracy;
  bool stratified = true;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  ExperimentConfig experiment() const;
  void validate() const;

  friend bool operator==(const RunConfig& a, const RunConfig& b);
};

/// Parses config text. Unknown sections or keys are errors; missing keys keep
/// their defaults.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical echo with every key explicit. parse_run_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& config);

/// Loaded dataset, vocabulary, embeddings and groups for a config.
struct LoadedData {
  Vocabulary vocab;
  ExperimentData data;
  PretrainedStats embedding_stats;
  GroupBuildStats group_stats;
};

LoadedData load_run_data(const RunConfig& config);

}  // namespace gshare
