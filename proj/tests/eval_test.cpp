#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gshare/eval.hpp"
#include "testing/oracles.hpp"
#include "testing/synthetic.hpp"

namespace gshare {
namespace {

std::vector<int> labels_with(std::size_t pos, std::size_t neg) {
  std::vector<int> y(pos, 1);
  y.insert(y.end(), neg, 0);
  return y;
}

void expect_partition(const std::vector<Fold>& folds, std::size_t n) {
  std::vector<int> hits(n, 0);
  for (const auto& f : folds) {
    EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
    for (auto i : f) {
      ASSERT_LT(i, n);
      ++hits[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(hits[i], 1) << i;
}

TEST(KFold, EvenSplit) {
  const std::vector<int> y(10, 0);
  const auto folds = kfold_split(y, 5, 1, false);
  ASSERT_EQ(folds.size(), 5u);
  for (const auto& f : folds) EXPECT_EQ(f.size(), 2u);
  expect_partition(folds, 10);
}

TEST(KFold, StratifiedRatio) {
  const auto y = labels_with(8, 2);
  const auto folds = kfold_split(y, 2, 3, true);
  for (const auto& f : folds) {
    EXPECT_EQ(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return y[i] == 0; }), 1);
  }
}

TEST(KFold, PartitionAndBalanceForRandomSizes) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(9);
    const std::size_t n = k + rng.below(300);
    std::vector<int> y(n);
    for (auto& v : y) v = rng.bernoulli(0.3) ? 1 : 0;
    expect_partition(kfold_split(y, k, trial, false), n);
    const std::size_t pos = std::count(y.begin(), y.end(), 1);
    if (pos < k || n - pos < k) {
      EXPECT_THROW(kfold_split(y, k, trial, true), std::invalid_argument);
      continue;
    }
    const auto folds = kfold_split(y, k, trial, true);
    expect_partition(folds, n);
    std::vector<std::size_t> pos_counts, sizes;
    for (const auto& f : folds) {
      pos_counts.push_back(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return y[i]; }));
      sizes.push_back(f.size());
    }
    const auto [pmin, pmax] = std::minmax_element(pos_counts.begin(), pos_counts.end());
    EXPECT_LE(*pmax - *pmin, 1u);
    const auto [smin, smax] = std::minmax_element(sizes.begin(), sizes.end());
    EXPECT_LE(*smax - *smin, 1u);
  }
}

TEST(KFold, DeterministicAndSeedSensitive) {
  const auto y = labels_with(30, 30);
  EXPECT_EQ(kfold_split(y, 5, 9, true), kfold_split(y, 5, 9, true));
  EXPECT_NE(kfold_split(y, 5, 9, true), kfold_split(y, 5, 10, true));
}

TEST(KFold, Errors) {
  const auto y = labels_with(1, 9);
  EXPECT_THROW(kfold_split(y, 2, 1, true), std::invalid_argument);
  EXPECT_THROW(kfold_split(y, 1, 1, false), std::invalid_argument);
  EXPECT_THROW(kfold_split(y, 11, 1, false), std::invalid_argument);
}

TEST(Downsample, CountRule) {
  const auto y = labels_with(10, 100);
  std::vector<std::size_t> items(y.size());
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
  const auto kept = downsample(items, y, 5);
  ASSERT_EQ(kept.size(), 20u);
  EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end()));
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(kept[i], i);  // all positives kept
}

TEST(Downsample, BalancedIsIdentity) {
  const auto y = labels_with(7, 7);
  std::vector<std::size_t> items(14);
  for (std::size_t i = 0; i < 14; ++i) items[i] = i;
  EXPECT_EQ(downsample(items, y, 1), items);
}

TEST(Downsample, PerEpochSchedule) {
  const auto y = labels_with(20, 200);
  std::vector<std::size_t> items(y.size());
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
  const auto e0 = downsample(items, y, derive_seed(1, "downsample", 0));
  const auto e1 = downsample(items, y, derive_seed(1, "downsample", 1));
  EXPECT_EQ(e0.size(), e1.size());
  EXPECT_NE(e0, e1);
  EXPECT_EQ(e0, downsample(items, y, derive_seed(1, "downsample", 0)));
}

TEST(Downsample, SingleClassIsError) {
  const auto y = labels_with(0, 5);
  const std::vector<std::size_t> items{0, 1, 2};
  EXPECT_THROW(downsample(items, y, 1), std::invalid_argument);
}

TEST(Metrics, AccuracyBasics) {
  const std::vector<int> gold{1, 0, 1, 1};
  EXPECT_EQ(accuracy(gold, gold), 1.0);
  EXPECT_EQ(accuracy(std::vector<int>{0, 1, 0, 0}, gold), 0.0);
  EXPECT_EQ(accuracy(std::vector<int>{1, 0, 1, 0}, gold), 0.75);
  EXPECT_THROW(accuracy(std::vector<int>{1}, gold), std::invalid_argument);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
}

TEST(Metrics, AucBasics) {
  const std::vector<int> gold{0, 0, 1, 1};
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, gold), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, gold), 0.0);
  EXPECT_EQ(auc(std::vector<double>(4, 0.3), gold), 0.5);
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), std::invalid_argument);
  EXPECT_THROW(auc(std::vector<double>{0.1}, gold), std::invalid_argument);
}

TEST(Metrics, MatchBruteForceOracles) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(499);
    std::vector<int> gold(n), pred(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = static_cast<int>(rng.below(2));
      pred[i] = static_cast<int>(rng.below(2));
      scores[i] = static_cast<double>(rng.below(40)) / 40.0;  // many ties
    }
    gold[0] = 0;
    gold[1] = 1;
    EXPECT_EQ(accuracy(pred, gold), testing::count_accuracy(pred, gold));
    EXPECT_EQ(auc(scores, gold), testing::pair_count_auc(scores, gold));
  }
}

TEST(Metrics, AucMonotoneInvariance) {
  Rng rng(78);
  std::vector<int> gold(200);
  std::vector<double> s(200), t(200);
  for (std::size_t i = 0; i < 200; ++i) {
    gold[i] = static_cast<int>(rng.below(2));
    s[i] = rng.uniform(-3.0, 3.0);
    t[i] = std::exp(2.0 * s[i]) + 5.0;
  }
  EXPECT_EQ(auc(s, gold), auc(t, gold));
}

TEST(Metrics, ParseAndPrint) {
  EXPECT_EQ(parse_metric("auc"), Metric::auc);
  EXPECT_EQ(parse_metric(to_string(Metric::accuracy)), Metric::accuracy);
  EXPECT_THROW(parse_metric("f1"), std::invalid_argument);
}

/// Tiny experiment fixture: synonym corpus small enough to train in
/// milliseconds.
ExperimentData tiny_data(std::uint64_t seed) {
  testing::SynonymCorpusConfig c;
  c.num_docs = 60;
  c.num_sets = 4;
  c.words_per_set = 4;
  c.num_fillers = 20;
  c.min_length = 3;
  c.max_length = 6;
  c.dim = 4;
  c.seed = seed;
  return testing::make_synonym_corpus(c).data;
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.model.filter_heights = {1, 2};
  cfg.model.filters_per_height = 3;
  cfg.training.epochs = 2;
  cfg.training.batch_size = 10;
  cfg.folds = 3;
  cfg.replications = 2;
  cfg.seed = 5;
  return cfg;
}

TEST(Experiment, ScriptedTwoFoldRun) {
  const auto data = tiny_data(1);
  ExperimentConfig cfg = tiny_config();
  cfg.replications = 1;
  cfg.folds = 2;
  const auto report = run_experiment(cfg, data);
  ASSERT_EQ(report.folds.size(), 2u);

  const std::uint64_t rep = replication_seed(cfg.seed, 1);
  const auto folds = kfold_split(data.dataset.labels, 2, fold_split_seed(rep), true);
  double sum = 0.0;
  for (std::size_t f = 0; f < 2; ++f) {
    ModelConfig mc = cfg.model;
    mc.seed = fold_model_seed(rep, f + 1);
    const auto& train = folds[1 - f];
    const Model m = train_model(data, train, mc, cfg.training);
    const double v = evaluate_model(m, data.dataset, folds[f], cfg.metric);
    EXPECT_EQ(report.folds[f].value, v);
    EXPECT_EQ(report.folds[f].model_seed, mc.seed);
    EXPECT_EQ(report.folds[f].test_size, folds[f].size());
    sum += v;
  }
  EXPECT_EQ(report.replications[0].value, sum / 2.0);
  EXPECT_EQ(report.mean, sum / 2.0);
}

TEST(Experiment, DeterministicAndAggregatesConsistent) {
  const auto data = tiny_data(2);
  ExperimentConfig cfg = tiny_config();
  cfg.replications = 3;
  const auto a = run_experiment(cfg, data, "echo");
  cfg.jobs = 3;
  const auto b = run_experiment(cfg, data, "echo");
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(a.summary(), b.summary());
  ASSERT_EQ(a.replications.size(), 3u);
  ASSERT_EQ(a.folds.size(), 9u);
  double sum = 0.0, lo = 1e9, hi = -1e9;
  for (const auto& r : a.replications) {
    sum += r.value;
    lo = std::min(lo, r.value);
    hi = std::max(hi, r.value);
  }
  EXPECT_DOUBLE_EQ(a.mean, sum / 3.0);
  EXPECT_EQ(a.min, lo);
  EXPECT_EQ(a.max, hi);
  EXPECT_LE(a.min, a.mean);
  EXPECT_LE(a.mean, a.max);
  EXPECT_NE(a.to_text().find("# echo"), std::string::npos);
}

TEST(Experiment, NoLeakageBetweenTrainAndTest) {
  const auto data = tiny_data(3);
  for (std::size_t r = 1; r <= 3; ++r) {
    const auto folds = kfold_split(data.dataset.labels, 4, fold_split_seed(replication_seed(9, r)),
                                   true);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::set<std::size_t> test(folds[f].begin(), folds[f].end());
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g == f) continue;
        for (auto i : folds[g]) EXPECT_FALSE(test.count(i));
      }
    }
  }
}

TEST(Experiment, ReplicationsUseDifferentSplits) {
  const auto data = tiny_data(4);
  const auto a = kfold_split(data.dataset.labels, 3, fold_split_seed(replication_seed(1, 1)), true);
  const auto b = kfold_split(data.dataset.labels, 3, fold_split_seed(replication_seed(1, 2)), true);
  EXPECT_NE(a, b);
}

TEST(Experiment, AucMetricAndDownsampling) {
  const auto data = tiny_data(5);
  ExperimentConfig cfg = tiny_config();
  cfg.metric = Metric::auc;
  cfg.training.downsample = true;
  const auto report = run_experiment(cfg, data);
  for (const auto& f : report.folds) {
    EXPECT_GE(f.value, 0.0);
    EXPECT_LE(f.value, 1.0);
  }
  EXPECT_NE(report.to_text().find("metric=auc"), std::string::npos);
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig cfg = tiny_config();
  cfg.folds = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.replications = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.training.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Experiment, FoldFailureCarriesContext) {
  auto data = tiny_data(6);
  ExperimentConfig cfg = tiny_config();
  data.dataset.documents[0] = {99999};  // token id beyond the embedding rows
  try {
    run_experiment(cfg, data);
    FAIL();
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("replication 1 fold"), std::string::npos) << msg;
  }
}

TEST(Experiment, ReportTextLayout) {
  const auto data = tiny_data(7);
  const auto report = run_experiment(tiny_config(), data);
  const std::string text = report.to_text();
  std::size_t fold_lines = 0, rep_lines = 0, agg_lines = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("fold\t", 0) == 0) ++fold_lines;
    if (line.rfind("replication\t", 0) == 0) ++rep_lines;
    if (line.rfind("aggregate\t", 0) == 0) ++agg_lines;
  }
  EXPECT_EQ(fold_lines, 6u);
  EXPECT_EQ(rep_lines, 2u);
  EXPECT_EQ(agg_lines, 1u);
  EXPECT_NE(report.summary().find("mean="), std::string::npos);
}

}  // namespace
}  // namespace gshare
