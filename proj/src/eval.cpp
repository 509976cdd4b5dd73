#include "gshare/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gshare/random.hpp"

namespace gshare {

std::vector<Fold> kfold_split(std::span<const int> labels, std::size_t k, std::uint64_t seed,
                              bool stratified) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (labels.size() < k) {
    throw std::invalid_argument("kfold_split: " + std::to_string(labels.size()) +
                                " items cannot fill " + std::to_string(k) + " folds");
  }
  Rng rng(seed);
  std::vector<Fold> folds(k);
  if (!stratified) {
    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span(idx));
    for (std::size_t i = 0; i < idx.size(); ++i) folds[i % k].push_back(idx[i]);
  } else {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::size_t offset = 0;
    for (auto& [label, members] : by_class) {
      if (members.size() < k) {
        throw std::invalid_argument("kfold_split: class " + std::to_string(label) + " has " +
                                    std::to_string(members.size()) +
                                    " items, fewer than k = " + std::to_string(k));
      }
      rng.shuffle(std::span(members));
      for (std::size_t m = 0; m < members.size(); ++m) folds[(offset + m) % k].push_back(members[m]);
      offset = (offset + members.size()) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<std::size_t> downsample(std::span<const std::size_t> items,
                                    std::span<const int> labels, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (auto i : items) {
    if (i >= labels.size()) throw std::out_of_range("downsample: item index out of range");
    by_class[labels[i]].push_back(i);
  }
  if (by_class.size() < 2) throw std::invalid_argument("downsample: split has a single class");
  std::size_t target = items.size();
  for (const auto& [label, members] : by_class) target = std::min(target, members.size());
  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(target * by_class.size());
  for (auto& [label, members] : by_class) {
    if (members.size() > target) {
      // Partial Fisher-Yates: the first `target` slots become a uniform sample.
      for (std::size_t i = 0; i < target; ++i) {
        std::swap(members[i], members[i + rng.below(members.size() - i)]);
      }
      members.resize(target);
    }
    out.insert(out.end(), members.begin(), members.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (gold.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double auc(std::span<const double> scores, std::span<const int> gold) {
  if (scores.size() != gold.size()) throw std::invalid_argument("auc: length mismatch");
  std::size_t pos = 0;
  for (int g : gold) {
    if (g != 0 && g != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
    pos += g == 1 ? 1 : 0;
  }
  const std::size_t neg = gold.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Ranks are 1-based; rank sums of tied runs stay exact in units of 0.5.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (gold[order[t]] == 1) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double n = static_cast<double>(neg);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * n);
}

Metric parse_metric(std::string_view s) {
  if (s == "accuracy") return Metric::accuracy;
  if (s == "auc") return Metric::auc;
  throw std::invalid_argument("unknown metric '" + std::string(s) + "' (expected accuracy|auc)");
}

std::string_view to_string(Metric m) { return m == Metric::accuracy ? "accuracy" : "auc"; }

void ExperimentConfig::validate() const {
  model.validate();
  if (folds < 2) throw std::invalid_argument("experiment: folds must be >= 2");
  if (replications < 1) throw std::invalid_argument("experiment: replications must be >= 1");
  if (training.epochs < 1) throw std::invalid_argument("experiment: epochs must be >= 1");
  if (training.batch_size < 1) throw std::invalid_argument("experiment: batch_size must be >= 1");
  if (jobs < 1) throw std::invalid_argument("experiment: jobs must be >= 1");
}

Model train_model(const ExperimentData& data, std::span<const std::size_t> train,
                  const ModelConfig& model_cfg, const TrainingConfig& training,
                  const EpochLogger& log) {
  if (train.empty()) throw std::invalid_argument("train_model: empty training split");
  for (int label : data.dataset.labels) {
    if (label >= model_cfg.num_classes) {
      throw std::invalid_argument("train_model: label " + std::to_string(label) +
                                  " exceeds num_classes " + std::to_string(model_cfg.num_classes));
    }
  }
  Model model(model_cfg, data.pretrained,
              model_cfg.uses_groups() ? data.groups : std::optional<GroupTable>{});
  std::vector<Example> batch;
  batch.reserve(training.batch_size);
  for (std::size_t epoch = 0; epoch < training.epochs; ++epoch) {
    std::vector<std::size_t> items =
        training.downsample
            ? downsample(train, data.dataset.labels, derive_seed(model_cfg.seed, "downsample", epoch))
            : std::vector<std::size_t>(train.begin(), train.end());
    Rng rng(derive_seed(model_cfg.seed, "epoch-order", epoch));
    rng.shuffle(std::span(items));
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < items.size(); start += training.batch_size) {
      batch.clear();
      const std::size_t end = std::min(items.size(), start + training.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back({data.dataset.documents[items[i]], data.dataset.labels[items[i]]});
      }
      loss_sum += model.train_step(batch);
      ++steps;
    }
    if (log) log(epoch + 1, loss_sum / static_cast<double>(steps));
  }
  return model;
}

double evaluate_model(const Model& model, const Dataset& dataset,
                      std::span<const std::size_t> test, Metric metric) {
  std::vector<std::vector<WordId>> docs;
  std::vector<int> gold;
  docs.reserve(test.size());
  for (auto i : test) {
    docs.push_back(dataset.documents[i]);
    gold.push_back(dataset.labels[i]);
  }
  const auto pred = model.predict(docs);
  return metric == Metric::accuracy ? accuracy(pred.labels, gold)
                                    : auc(pred.positive_scores, gold);
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t r) {
  return derive_seed(master, "replication", r);
}

std::uint64_t fold_split_seed(std::uint64_t rep_seed) { return derive_seed(rep_seed, "folds"); }

std::uint64_t fold_model_seed(std::uint64_t rep_seed, std::size_t fold) {
  return derive_seed(rep_seed, "model", fold);
}

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

}  // namespace

std::string ExperimentReport::to_text() const {
  std::ostringstream out;
  out << "# experiment report\n";
  std::istringstream echo(config_echo);
  for (std::string line; std::getline(echo, line);) out << "# " << line << '\n';
  const auto m = to_string(metric);
  for (const auto& f : folds) {
    out << "fold\treplication=" << f.replication << "\tfold=" << f.fold
        << "\tseed=" << f.model_seed << "\ttrain=" << f.train_size << "\ttest=" << f.test_size
        << '\t' << m << '=' << fixed(f.value) << '\n';
  }
  for (const auto& r : replications) {
    out << "replication\treplication=" << r.replication << "\tseed=" << r.seed << '\t' << m
        << '=' << fixed(r.value) << '\n';
  }
  out << "aggregate\tmetric=" << m << "\tmean=" << fixed(mean) << "\tmin=" << fixed(min)
      << "\tmax=" << fixed(max) << '\n';
  return out.str();
}

std::string ExperimentReport::summary() const {
  std::ostringstream out;
  out << "metric=" << to_string(metric) << '\n'
      << "replications=" << replications.size() << '\n'
      << "fold_records=" << folds.size() << '\n'
      << "mean=" << fixed(mean) << '\n'
      << "min=" << fixed(min) << '\n'
      << "max=" << fixed(max) << '\n';
  for (const auto& r : replications) {
    out << "replication." << r.replication << '=' << fixed(r.value) << '\n';
  }
  return out.str();
}

ExperimentReport run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                std::string config_echo) {
  config.validate();
  const auto& labels = data.dataset.labels;
  if (data.dataset.size() == 0) throw std::invalid_argument("run_experiment: empty dataset");

  struct Task {
    std::size_t rep;
    std::size_t fold;
    std::uint64_t model_seed;
    std::vector<std::size_t> train;
    const Fold* test;
  };
  std::vector<std::vector<Fold>> splits(config.replications);
  std::vector<std::uint64_t> rep_seeds(config.replications);
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < config.replications; ++r) {
    rep_seeds[r] = replication_seed(config.seed, r + 1);
    splits[r] = kfold_split(labels, config.folds, fold_split_seed(rep_seeds[r]), config.stratified);
  }
  for (std::size_t r = 0; r < config.replications; ++r) {
    for (std::size_t f = 0; f < config.folds; ++f) {
      Task t{r, f, fold_model_seed(rep_seeds[r], f + 1), {}, &splits[r][f]};
      for (std::size_t g = 0; g < config.folds; ++g) {
        if (g != f) t.train.insert(t.train.end(), splits[r][g].begin(), splits[r][g].end());
      }
      std::sort(t.train.begin(), t.train.end());
      tasks.push_back(std::move(t));
    }
  }

  std::vector<FoldRecord> records(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto& t = tasks[i];
      try {
        ModelConfig mc = config.model;
        mc.seed = t.model_seed;
        const Model model = train_model(data, t.train, mc, config.training);
        records[i] = {t.rep + 1,        t.fold + 1,      t.model_seed,
                      t.train.size(),   t.test->size(),
                      evaluate_model(model, data.dataset, *t.test, config.metric)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(config.jobs, tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("replication " + std::to_string(tasks[i].rep + 1) + " fold " +
                               std::to_string(tasks[i].fold + 1) + ": " + e.what());
    }
  }

  ExperimentReport report;
  report.config_echo = std::move(config_echo);
  report.metric = config.metric;
  report.folds = std::move(records);
  for (std::size_t r = 0; r < config.replications; ++r) {
    double sum = 0.0;
    for (std::size_t f = 0; f < config.folds; ++f) sum += report.folds[r * config.folds + f].value;
    report.replications.push_back({r + 1, rep_seeds[r], sum / static_cast<double>(config.folds)});
  }
  double sum = 0.0;
  report.min = report.max = report.replications.front().value;
  for (const auto& r : report.replications) {
    sum += r.value;
    report.min = std::min(report.min, r.value);
    report.max = std::max(report.max, r.value);
  }
  report.mean = sum / static_cast<double>(report.replications.size());
  return report;
}

}  // namespace gshare
