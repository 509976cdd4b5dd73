#include "gshare/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "gshare/random.hpp"
#include "text_util.hpp"

namespace gshare {

namespace pt = boost::property_tree;

bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.data == b.data && a.model == b.model && a.training == b.training &&
         a.folds == b.folds && a.replications == b.replications && a.metric == b.metric &&
         a.stratified == b.stratified && a.seed == b.seed && a.jobs == b.jobs;
}

ExperimentConfig RunConfig::experiment() const {
  ExperimentConfig e;
  e.model = model;
  e.training = training;
  e.folds = folds;
  e.replications = replications;
  e.seed = seed;
  e.metric = metric;
  e.stratified = stratified;
  e.jobs = jobs;
  return e;
}

void RunConfig::validate() const {
  experiment().validate();
  if (data.embeddings.empty() && data.embedding_dim == 0) {
    throw std::invalid_argument("config: set data.embeddings or data.embedding_dim");
  }
  if (model.uses_groups() && data.groups.empty()) {
    throw std::invalid_argument("config: model.channel2 = " + std::string(to_string(model.channel2)) +
                                " needs data.groups");
  }
  if (data.prefix_depth == 0) throw std::invalid_argument("config: data.prefix_depth must be >= 1");
}

namespace {

std::string_view to_string(VocabOrder o) {
  return o == VocabOrder::sorted ? "sorted" : "first_occurrence";
}

VocabOrder parse_vocab_order(std::string_view s) {
  if (s == "first_occurrence") return VocabOrder::first_occurrence;
  if (s == "sorted") return VocabOrder::sorted;
  throw std::invalid_argument("unknown vocab_order '" + std::string(s) + "'");
}

std::string_view to_string(EmbeddingFormat f) {
  return f == EmbeddingFormat::binary ? "binary" : "text";
}

bool parse_bool(const std::string& key, std::string_view s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config: " + key + " expects a boolean, got '" + std::string(s) + "'");
}

std::uint64_t parse_u64(const std::string& key, std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" +
                                std::string(s) + "'");
  }
  return v;
}

double parse_real(const std::string& key, std::string_view s) {
  double v = 0.0;
  if (!detail::parse_double(s, v)) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::size_t> parse_list(const std::string& key, std::string_view s) {
  std::vector<std::size_t> out;
  for (auto part : detail::split(s, ',')) out.push_back(parse_u64(key, detail::trim(part)));
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f;
    auto add = [&](std::string section, std::string key, Setter s, Getter g) {
      f.push_back({std::move(section), std::move(key), std::move(s), std::move(g)});
    };
    add("data", "dataset", [](RunConfig& c, const std::string& v) { c.data.dataset = v; },
        [](const RunConfig& c) { return c.data.dataset; });
    add("data", "embeddings", [](RunConfig& c, const std::string& v) { c.data.embeddings = v; },
        [](const RunConfig& c) { return c.data.embeddings; });
    add("data", "embeddings_format",
        [](RunConfig& c, const std::string& v) { c.data.embeddings_format = parse_embedding_format(v); },
        [](const RunConfig& c) { return std::string(to_string(c.data.embeddings_format)); });
    add("data", "embedding_dim",
        [](RunConfig& c, const std::string& v) { c.data.embedding_dim = parse_u64("data.embedding_dim", v); },
        [](const RunConfig& c) { return std::to_string(c.data.embedding_dim); });
    add("data", "oov_scale",
        [](RunConfig& c, const std::string& v) { c.data.oov_scale = parse_real("data.oov_scale", v); },
        [](const RunConfig& c) { return detail::format_double(c.data.oov_scale); });
    add("data", "vocab_order",
        [](RunConfig& c, const std::string& v) { c.data.vocab_order = parse_vocab_order(v); },
        [](const RunConfig& c) { return std::string(to_string(c.data.vocab_order)); });
    add("data", "groups", [](RunConfig& c, const std::string& v) { c.data.groups = v; },
        [](const RunConfig& c) { return c.data.groups; });
    add("data", "groups_kind",
        [](RunConfig& c, const std::string& v) { c.data.groups_kind = parse_resource_kind(v); },
        [](const RunConfig& c) { return std::string(to_string(c.data.groups_kind)); });
    add("data", "prefix_depth",
        [](RunConfig& c, const std::string& v) { c.data.prefix_depth = parse_u64("data.prefix_depth", v); },
        [](const RunConfig& c) { return std::to_string(c.data.prefix_depth); });

    add("model", "channel2",
        [](RunConfig& c, const std::string& v) { c.model.channel2 = parse_channel2_mode(v); },
        [](const RunConfig& c) { return std::string(to_string(c.model.channel2)); });
    add("model", "filter_heights",
        [](RunConfig& c, const std::string& v) { c.model.filter_heights = parse_list("model.filter_heights", v); },
        [](const RunConfig& c) { return join(c.model.filter_heights); });
    add("model", "filters_per_height",
        [](RunConfig& c, const std::string& v) {
          c.model.filters_per_height = parse_u64("model.filters_per_height", v);
        },
        [](const RunConfig& c) { return std::to_string(c.model.filters_per_height); });
    add("model", "num_classes",
        [](RunConfig& c, const std::string& v) {
          c.model.num_classes = static_cast<int>(parse_u64("model.num_classes", v));
        },
        [](const RunConfig& c) { return std::to_string(c.model.num_classes); });
    add("model", "dropout",
        [](RunConfig& c, const std::string& v) { c.model.dropout_rate = parse_real("model.dropout", v); },
        [](const RunConfig& c) { return detail::format_double(c.model.dropout_rate); });
    add("model", "signing",
        [](RunConfig& c, const std::string& v) { c.model.signing_enabled = parse_bool("model.signing", v); },
        [](const RunConfig& c) { return std::string(c.model.signing_enabled ? "true" : "false"); });
    add("model", "adadelta_rho",
        [](RunConfig& c, const std::string& v) { c.model.adadelta.rho = parse_real("model.adadelta_rho", v); },
        [](const RunConfig& c) { return detail::format_double(c.model.adadelta.rho); });
    add("model", "adadelta_epsilon",
        [](RunConfig& c, const std::string& v) {
          c.model.adadelta.epsilon = parse_real("model.adadelta_epsilon", v);
        },
        [](const RunConfig& c) { return detail::format_double(c.model.adadelta.epsilon); });
    add("model", "random_init_scale",
        [](RunConfig& c, const std::string& v) {
          c.model.random_init_scale = parse_real("model.random_init_scale", v);
        },
        [](const RunConfig& c) { return detail::format_double(c.model.random_init_scale); });

    add("train", "epochs",
        [](RunConfig& c, const std::string& v) { c.training.epochs = parse_u64("train.epochs", v); },
        [](const RunConfig& c) { return std::to_string(c.training.epochs); });
    add("train", "batch_size",
        [](RunConfig& c, const std::string& v) { c.training.batch_size = parse_u64("train.batch_size", v); },
        [](const RunConfig& c) { return std::to_string(c.training.batch_size); });
    add("train", "downsample",
        [](RunConfig& c, const std::string& v) { c.training.downsample = parse_bool("train.downsample", v); },
        [](const RunConfig& c) { return std::string(c.training.downsample ? "true" : "false"); });

    add("eval", "folds", [](RunConfig& c, const std::string& v) { c.folds = parse_u64("eval.folds", v); },
        [](const RunConfig& c) { return std::to_string(c.folds); });
    add("eval", "replications",
        [](RunConfig& c, const std::string& v) { c.replications = parse_u64("eval.replications", v); },
        [](const RunConfig& c) { return std::to_string(c.replications); });
    add("eval", "metric", [](RunConfig& c, const std::string& v) { c.metric = parse_metric(v); },
        [](const RunConfig& c) { return std::string(to_string(c.metric)); });
    add("eval", "stratified",
        [](RunConfig& c, const std::string& v) { c.stratified = parse_bool("eval.stratified", v); },
        [](const RunConfig& c) { return std::string(c.stratified ? "true" : "false"); });

    add("run", "seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64("run.seed", v); },
        [](const RunConfig& c) { return std::to_string(c.seed); });
    add("run", "jobs", [](RunConfig& c, const std::string& v) { c.jobs = parse_u64("run.jobs", v); },
        [](const RunConfig& c) { return std::to_string(c.jobs); });
    return f;
  }();
  return kFields;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  std::map<std::string, const Field*> by_name;
  std::set<std::string> sections;
  for (const auto& f : fields()) {
    by_name[f.section + "." + f.key] = &f;
    sections.insert(f.section);
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (!sections.count(section)) {
      if (!body.data().empty()) {
        throw std::invalid_argument("config: key '" + section + "' outside a section");
      }
      throw std::invalid_argument("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      auto it = by_name.find(section + "." + key);
      if (it == by_name.end()) {
        throw std::invalid_argument("config: unknown key '" + key + "' in [" + section + "]");
      }
      it->second->set(c, std::string(detail::trim(value.data())));
    }
  }
  c.model.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c = parse_run_config(detail::read_file(path));
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.data.dataset);
  resolve(c.data.embeddings);
  resolve(c.data.groups);
  return c;
}

std::string to_config_text(const RunConfig& config) {
  std::ostringstream out;
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << f.section << "]\n";
      current = f.section;
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

LoadedData load_run_data(const RunConfig& config) {
  config.validate();
  if (config.data.dataset.empty()) throw std::invalid_argument("config: data.dataset is required");
  LoadedData out;
  const auto raw = read_raw_dataset(config.data.dataset);
  out.vocab = build_vocabulary(token_lists(raw), config.data.vocab_order);
  out.data.dataset = encode(raw, out.vocab, config.data.dataset);

  const OovPolicy oov{OovPolicy::Kind::uniform, config.data.oov_scale,
                      derive_seed(config.seed, "oov")};
  if (!config.data.embeddings.empty()) {
    out.data.pretrained = load_pretrained(config.data.embeddings, config.data.embeddings_format,
                                          out.vocab, oov, &out.embedding_stats);
  } else {
    out.data.pretrained = Matrix(out.vocab.rows(), config.data.embedding_dim);
    for (WordId w = 0; w < out.vocab.pad_id(); ++w) fill_oov_row(out.data.pretrained.row(w), oov, w);
    out.embedding_stats.oov = out.vocab.size();
  }
  if (!config.data.groups.empty()) {
    out.data.groups = load_groups(config.data.groups_kind, config.data.groups, out.vocab,
                                  config.data.prefix_depth, &out.group_stats);
  }
  return out;
}

}  // namespace gshare
