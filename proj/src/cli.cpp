#include "gshare/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "gshare/config.hpp"
#include "gshare/corpus.hpp"
#include "gshare/eval.hpp"
#include "gshare/groups.hpp"
#include "gshare/model.hpp"
#include "text_util.hpp"

namespace gshare {

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Token lists from a dataset-format file ("label<TAB>tokens") or a plain
/// token file (one or more whitespace-separated words per line).
std::vector<TokenList> read_token_source(const std::string& path) {
  std::vector<TokenList> docs;
  detail::for_each_line(detail::read_file(path), [&](std::string_view line) {
    const auto tab = line.find('\t');
    auto toks = detail::split_ws(tab == std::string_view::npos ? line : line.substr(tab + 1));
    if (!toks.empty()) docs.push_back(std::move(toks));
  });
  return docs;
}

int cmd_build_groups(const std::string& kind_name, const std::string& in_path,
                     const std::string& vocab_path, const std::string& out_path,
                     std::size_t prefix_depth, std::ostream& out) {
  const auto kind = parse_resource_kind(kind_name);
  const auto vocab = build_vocabulary(read_token_source(vocab_path));
  GroupBuildStats stats;
  const auto table = load_groups(kind, in_path, vocab, prefix_depth, &stats);
  write_text(out_path, to_canonical_tsv(table, vocab));
  const double coverage =
      vocab.size() ? 100.0 * static_cast<double>(table.covered_words()) / vocab.size() : 0.0;
  out << "groups\t" << table.num_groups() << '\n'
      << "vocabulary\t" << vocab.size() << '\n'
      << "covered_words\t" << table.covered_words() << '\n'
      << "coverage_percent\t" << fixed(coverage, 2) << '\n'
      << "resource_lines\t" << stats.lines << '\n'
      << "oov_skipped\t" << stats.oov_skipped << '\n'
      << "multiword_skipped\t" << stats.multiword_skipped << '\n'
      << "objective_skipped\t" << stats.objective_skipped << '\n'
      << "empty_groups_dropped\t" << stats.empty_groups_dropped << '\n';
  for (const auto& [k, n] : table.membership_histogram()) {
    out << "words_in_" << k << "_groups\t" << n << '\n';
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_path, std::ostream& out) {
  const RunConfig cfg = load_run_config(config_path);
  const auto loaded = load_run_data(cfg);
  std::vector<std::size_t> all(loaded.data.dataset.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  double last = 0.0;
  const Model model = train_model(loaded.data, all, cfg.model, cfg.training,
                                  [&](std::size_t epoch, double loss) {
                                    out << "epoch " << epoch << " loss " << fixed(loss, 10) << '\n';
                                    last = loss;
                                  });
  save_checkpoint(model, loaded.vocab, out_path);
  out << "final_loss " << fixed(last, 10) << '\n' << "checkpoint " << out_path << '\n';
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& out_path,
                 const std::string& summary_path, std::size_t jobs, std::ostream& out) {
  RunConfig cfg = load_run_config(config_path);
  if (jobs > 0) cfg.jobs = jobs;
  const auto loaded = load_run_data(cfg);
  const auto report = run_experiment(cfg.experiment(), loaded.data, to_config_text(cfg));
  if (out_path.empty()) {
    out << report.to_text();
  } else {
    write_text(out_path, report.to_text());
    out << "report " << out_path << '\n';
  }
  if (!summary_path.empty()) write_text(summary_path, report.summary());
  out << "mean " << fixed(report.mean) << " min " << fixed(report.min) << " max "
      << fixed(report.max) << '\n';
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& in_path,
                const std::string& out_path, const std::string& vocab_path, std::ostream& out) {
  const auto ck = load_checkpoint(checkpoint);
  if (!vocab_path.empty()) {
    const auto expected = build_vocabulary(read_token_source(vocab_path));
    if (expected.fingerprint() != ck.vocab.fingerprint()) {
      throw std::runtime_error("vocabulary of '" + vocab_path +
                               "' does not match the checkpoint vocabulary");
    }
  }
  std::vector<std::vector<WordId>> docs;
  std::size_t line_no = 0;
  detail::for_each_line(detail::read_file(in_path), [&](std::string_view line) {
    ++line_no;
    if (detail::trim(line).empty()) return;
    const auto tab = line.find('\t');
    const auto toks = detail::split_ws(tab == std::string_view::npos ? line : line.substr(tab + 1));
    if (toks.empty()) throw ParseError(in_path, line_no, "document has no tokens");
    std::vector<WordId> ids;
    for (const auto& t : toks) ids.push_back(ck.vocab.lookup(t));
    docs.push_back(std::move(ids));
  });
  const auto pred = ck.model.predict(docs);
  std::ostringstream text;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    text << pred.labels[i] << '\t' << fixed(pred.positive_scores[i], 10) << '\n';
  }
  if (out_path.empty() || out_path == "-") {
    out << text.str();
  } else {
    write_text(out_path, text.str());
  }
  return 0;
}

}  // namespace

std::string render_sharing(const std::string& checkpoint, const std::string& word) {
  const auto ck = load_checkpoint(checkpoint);
  const auto id = ck.vocab.find(word);
  if (!id) throw std::runtime_error("word '" + word + "' is not in the checkpoint vocabulary");
  const auto& model = ck.model;
  if (model.config().channel2 != Channel2Mode::group_init_share) {
    throw std::runtime_error("checkpoint was trained with channel2 = " +
                             std::string(to_string(model.config().channel2)) +
                             "; sharing layout exists only for group_init_share");
  }
  const auto& table = *model.groups();
  const auto& layout = model.params().shared.layout();
  std::ostringstream out;
  out << "word\t" << word << " (id " << *id << ")\n";
  const auto& gs = table.groups_of(*id);
  out << "K\t" << gs.size() << '\n';
  if (layout.is_private(*id)) {
    out << "private row: word belongs to no group; its E^s row is an independent parameter\n";
    return out.str();
  }
  for (auto g : gs) {
    out << "group\t" << table.key(g) << "\tid=" << g << "\tmembers=" << table.members(g).size()
        << '\n';
  }
  out << "dim\tgroup\tsign\tshared_with\n";
  constexpr std::size_t kMaxListed = 8;
  for (std::size_t j = 0; j < layout.dim(); ++j) {
    const auto g = layout.group(*id, j);
    out << j << '\t' << table.key(static_cast<GroupId>(g)) << '\t'
        << (layout.sign(*id, j) > 0 ? "+1" : "-1") << '\t';
    std::size_t listed = 0, extra = 0;
    for (auto other : table.members(static_cast<GroupId>(g))) {
      if (other == *id || layout.group(other, j) != g) continue;
      if (listed < kMaxListed) {
        out << (listed ? " " : "") << ck.vocab.word(other);
        ++listed;
      } else {
        ++extra;
      }
    }
    if (listed == 0) out << '-';
    if (extra) out << " (+" << extra << " more)";
    out << '\n';
  }
  return out.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grouped weight-sharing text classifier"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gshare 0.1.0");

  std::string kind, in_path, vocab_path, out_path, config_path, checkpoint, word, summary_path;
  std::size_t prefix_depth = 3;
  std::size_t jobs = 0;

  auto* build = app.add_subcommand("build-groups", "Compile a lexical resource into canonical group TSV");
  build->add_option("--kind", kind, "Resource kind: tsv|brown|mesh|sentilex")
      ->required()
      ->check(CLI::IsMember({"tsv", "brown", "mesh", "sentilex"}));
  build->add_option("--in", in_path, "Resource file")->required()->check(CLI::ExistingFile);
  build->add_option("--vocab", vocab_path, "Dataset or token file defining the vocabulary")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--out", out_path, "Output TSV path")->required();
  build->add_option("--prefix-depth", prefix_depth, "Tree-number components kept for mesh keys")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train one model on the full dataset");
  train->add_option("--config", config_path, "Run config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "Checkpoint path")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Replicated k-fold cross validation");
  evaluate->add_option("--config", config_path, "Run config file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out_path, "Report path (default: stdout)");
  evaluate->add_option("--summary", summary_path, "key=value summary path");
  evaluate->add_option("--jobs", jobs, "Worker threads (0: use run.jobs from the config)")
      ->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Label documents with a trained checkpoint");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  predict->add_option("--in", in_path, "Documents, one per line (optional 'label<TAB>' prefix)")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", out_path, "Output 'label<TAB>score' path (default: stdout)");
  predict->add_option("--vocab", vocab_path, "Dataset whose vocabulary must match the checkpoint");

  auto* inspect = app.add_subcommand("inspect-sharing", "Show G(w), h^w(j) and b(w,j) for a word");
  inspect->add_option("--checkpoint", checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  inspect->add_option("--word", word, "Vocabulary word")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*build) return cmd_build_groups(kind, in_path, vocab_path, out_path, prefix_depth, out);
    if (*train) return cmd_train(config_path, out_path, out);
    if (*evaluate) return cmd_evaluate(config_path, out_path, summary_path, jobs, out);
    if (*predict) return cmd_predict(checkpoint, in_path, out_path, vocab_path, out);
    if (*inspect) {
      out << render_sharing(checkpoint, word);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"gshare"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace gshare
