#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "gshare/model.hpp"
#include "gshare/random.hpp"
#include "text_util.hpp"

namespace gshare {

namespace {

constexpr char kMagic[8] = {'G', 'S', 'H', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buf_ += s;
  }
  template <typename T>
  void array(const std::vector<T>& v) {
    pod<std::uint64_t>(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
  }
  void array(std::span<const double> v) {
    pod<std::uint64_t>(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void matrix(const Matrix& m) {
    pod<std::uint64_t>(m.rows());
    pod<std::uint64_t>(m.cols());
    buf_.append(reinterpret_cast<const char*>(m.values().data()), m.size() * sizeof(double));
  }
  void adadelta(const AdadeltaState& s) {
    array(s.sq_grad);
    array(s.sq_update);
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  template <typename T>
  std::vector<T> array() {
    const auto n = pod<std::uint64_t>();
    if (n > (data_.size() - pos_) / sizeof(T)) fail();
    std::vector<T> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return v;
  }
  Matrix matrix() {
    const auto r = pod<std::uint64_t>();
    const auto c = pod<std::uint64_t>();
    if (c != 0 && r > (data_.size() - pos_) / sizeof(double) / c) fail();
    Matrix m(r, c);
    std::memcpy(m.values().data(), data_.data() + pos_, m.size() * sizeof(double));
    pos_ += m.size() * sizeof(double);
    return m;
  }
  AdadeltaState adadelta() {
    AdadeltaState s;
    s.sq_grad = array<double>();
    s.sq_update = array<double>();
    if (s.sq_grad.size() != s.sq_update.size()) fail();
    return s;
  }
  bool done() const { return pos_ == data_.size(); }
  [[noreturn]] void fail() const {
    throw std::runtime_error("checkpoint: truncated or corrupt " + what_ + " section");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail();
  }
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

void write_banks(Writer& w, const std::vector<ConvFilterBank>& banks,
                 const std::vector<BankState>& states) {
  w.pod<std::uint64_t>(banks.size());
  for (std::size_t i = 0; i < banks.size(); ++i) {
    w.pod<std::uint64_t>(banks[i].height);
    w.pod<std::uint64_t>(banks[i].dim);
    w.matrix(banks[i].weights);
    w.array(banks[i].bias);
    w.adadelta(states[i].weights);
    w.adadelta(states[i].bias);
  }
}

void read_banks(Reader& r, std::vector<ConvFilterBank>& banks, std::vector<BankState>& states) {
  const auto n = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    ConvFilterBank b;
    b.height = r.pod<std::uint64_t>();
    b.dim = r.pod<std::uint64_t>();
    b.weights = r.matrix();
    b.bias = r.array<double>();
    BankState st;
    st.weights = r.adadelta();
    st.bias = r.adadelta();
    if (b.weights.cols() != b.height * b.dim || b.bias.size() != b.weights.rows() ||
        st.weights.size() != b.weights.size() || st.bias.size() != b.bias.size()) {
      r.fail();
    }
    banks.push_back(std::move(b));
    states.push_back(std::move(st));
  }
}

}  // namespace

void save_checkpoint(const Model& model, const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  if (path.empty()) throw std::invalid_argument("save_checkpoint: empty path");
  if (vocab.rows() != model.rows()) {
    throw std::invalid_argument("save_checkpoint: vocabulary does not match the model rows");
  }
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto& o = model.optimizer();
  std::vector<std::pair<std::string, std::string>> sections;

  {
    Writer w;
    w.array(std::vector<std::uint64_t>(cfg.filter_heights.begin(), cfg.filter_heights.end()));
    w.pod<std::uint64_t>(cfg.filters_per_height);
    w.pod<std::int32_t>(cfg.num_classes);
    w.pod<double>(cfg.dropout_rate);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(cfg.channel2));
    w.pod<std::uint8_t>(cfg.signing_enabled ? 1 : 0);
    w.pod<std::uint64_t>(cfg.seed);
    w.pod<double>(cfg.adadelta.rho);
    w.pod<double>(cfg.adadelta.epsilon);
    w.pod<double>(cfg.random_init_scale);
    w.pod<std::uint64_t>(model.step());
    sections.emplace_back("CONF", w.take());
  }
  {
    Writer w;
    w.pod<std::uint64_t>(vocab.fingerprint());
    w.pod<std::uint64_t>(vocab.size());
    for (const auto& word : vocab.words()) w.str(word);
    sections.emplace_back("VOCB", w.take());
  }
  {
    Writer w;
    const auto& h = model.hash_spec();
    w.pod<std::uint64_t>(h.seed);
    w.pod<std::uint8_t>(h.signing_enabled ? 1 : 0);
    w.pod<std::uint32_t>(h.mixer_version);
    sections.emplace_back("HASH", w.take());
  }
  {
    Writer w;
    w.matrix(p.pretrained);
    w.adadelta(o.pretrained);
    sections.emplace_back("EMBP", w.take());
  }
  if (model.groups()) {
    Writer w;
    const auto& t = *model.groups();
    w.pod<std::uint64_t>(t.num_words());
    w.pod<std::uint64_t>(t.num_groups());
    for (GroupId g = 0; g < t.num_groups(); ++g) {
      w.str(t.key(g));
      w.array(t.members(g));
    }
    sections.emplace_back("GRPT", w.take());
  }
  switch (cfg.channel2) {
    case Channel2Mode::none:
      break;
    case Channel2Mode::random:
    case Channel2Mode::group_init_no_share: {
      Writer w;
      w.matrix(p.channel2);
      w.adadelta(o.channel2);
      sections.emplace_back("CH2M", w.take());
      break;
    }
    case Channel2Mode::group_init_share: {
      Writer w;
      const auto& l = p.shared.layout();
      w.pod<std::uint64_t>(l.rows());
      w.pod<std::uint64_t>(l.dim());
      w.pod<std::uint64_t>(l.num_groups());
      w.array(l.group_array());
      w.array(l.sign_array());
      sections.emplace_back("LAYT", w.take());
      Writer g;
      g.matrix(p.group_values);
      g.adadelta(o.group_values);
      sections.emplace_back("GRPV", g.take());
      Writer e;
      e.matrix(p.shared.values());
      e.adadelta(o.channel2);
      sections.emplace_back("ESHR", e.take());
      break;
    }
  }
  for (std::size_t c = 0; c < cfg.num_channels(); ++c) {
    Writer w;
    write_banks(w, p.banks[c], o.banks[c]);
    sections.emplace_back(c == 0 ? "BNK1" : "BNK2", w.take());
  }
  {
    Writer w;
    w.matrix(p.softmax_w);
    w.array(p.softmax_b);
    w.adadelta(o.softmax_w);
    w.adadelta(o.softmax_b);
    sections.emplace_back("SOFT", w.take());
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, sizeof kMagic);
  Writer head;
  head.pod<std::uint32_t>(kFormatVersion);
  head.pod<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  const auto h = head.take();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [tag, payload] : sections) {
    Writer sh;
    sh.pod<std::uint64_t>(payload.size());
    const auto size = sh.take();
    out.write(tag.data(), 4);
    out.write(size.data(), static_cast<std::streamsize>(size.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (path.empty()) throw std::invalid_argument("load_checkpoint: empty path");
  const std::string data = detail::read_file(path);
  if (data.size() < sizeof kMagic || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("'" + path.string() + "' is not a checkpoint (bad magic)");
  }
  Reader top(std::string_view(data).substr(sizeof kMagic), "header");
  const auto version = top.pod<std::uint32_t>();
  if (version != kFormatVersion) {
    throw std::runtime_error("checkpoint format version " + std::to_string(version) +
                             " is not supported (expected " + std::to_string(kFormatVersion) + ")");
  }
  const auto count = top.pod<std::uint32_t>();
  std::map<std::string, std::string_view> sections;
  std::vector<std::string> order;
  std::size_t pos = sizeof kMagic + 8;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (data.size() - pos < 12) throw std::runtime_error("checkpoint: truncated section table");
    std::string tag = data.substr(pos, 4);
    std::uint64_t size = 0;
    std::memcpy(&size, data.data() + pos + 4, sizeof size);
    pos += 12;
    if (data.size() - pos < size) throw std::runtime_error("checkpoint: truncated section " + tag);
    sections[tag] = std::string_view(data).substr(pos, size);
    order.push_back(tag);
    pos += size;
  }
  if (pos != data.size()) throw std::runtime_error("checkpoint: trailing bytes");
  auto section = [&](const std::string& tag) {
    auto it = sections.find(tag);
    if (it == sections.end()) throw std::runtime_error("checkpoint: missing section " + tag);
    return Reader(it->second, tag);
  };

  ModelConfig cfg;
  std::uint64_t step = 0;
  {
    auto r = section("CONF");
    const auto heights = r.array<std::uint64_t>();
    cfg.filter_heights.assign(heights.begin(), heights.end());
    cfg.filters_per_height = r.pod<std::uint64_t>();
    cfg.num_classes = r.pod<std::int32_t>();
    cfg.dropout_rate = r.pod<double>();
    const auto mode = r.pod<std::uint8_t>();
    if (mode > static_cast<std::uint8_t>(Channel2Mode::group_init_share)) r.fail();
    cfg.channel2 = static_cast<Channel2Mode>(mode);
    cfg.signing_enabled = r.pod<std::uint8_t>() != 0;
    cfg.seed = r.pod<std::uint64_t>();
    cfg.adadelta.rho = r.pod<double>();
    cfg.adadelta.epsilon = r.pod<double>();
    cfg.random_init_scale = r.pod<double>();
    step = r.pod<std::uint64_t>();
  }
  std::vector<std::string> words;
  std::uint64_t fingerprint = 0;
  {
    auto r = section("VOCB");
    fingerprint = r.pod<std::uint64_t>();
    const auto n = r.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) words.push_back(r.str());
  }
  Vocabulary vocab(std::move(words));
  if (vocab.fingerprint() != fingerprint) {
    throw std::runtime_error("checkpoint: vocabulary fingerprint mismatch");
  }
  HashSpec hash;
  {
    auto r = section("HASH");
    hash.seed = r.pod<std::uint64_t>();
    hash.signing_enabled = r.pod<std::uint8_t>() != 0;
    hash.mixer_version = r.pod<std::uint32_t>();
    if (hash.mixer_version != kMixerVersion) {
      throw std::runtime_error("checkpoint: hash mixer version " +
                               std::to_string(hash.mixer_version) + " is not supported");
    }
  }

  ModelParams p;
  OptimizerState o;
  {
    auto r = section("EMBP");
    p.pretrained = r.matrix();
    o.pretrained = r.adadelta();
  }
  if (p.pretrained.rows() != vocab.rows()) {
    throw std::runtime_error("checkpoint: embedding rows do not match the stored vocabulary");
  }
  std::optional<GroupTable> groups;
  if (sections.count("GRPT")) {
    auto r = section("GRPT");
    const auto n_words = r.pod<std::uint64_t>();
    const auto n_groups = r.pod<std::uint64_t>();
    std::vector<std::string> keys;
    std::vector<std::vector<WordId>> members;
    for (std::uint64_t g = 0; g < n_groups; ++g) {
      keys.push_back(r.str());
      members.push_back(r.array<WordId>());
    }
    groups = GroupTable::from_members(n_words, std::move(keys), std::move(members));
  }
  switch (cfg.channel2) {
    case Channel2Mode::none:
      break;
    case Channel2Mode::random:
    case Channel2Mode::group_init_no_share: {
      auto r = section("CH2M");
      p.channel2 = r.matrix();
      o.channel2 = r.adadelta();
      break;
    }
    case Channel2Mode::group_init_share: {
      auto r = section("LAYT");
      const auto rows = r.pod<std::uint64_t>();
      const auto dim = r.pod<std::uint64_t>();
      const auto n_groups = r.pod<std::uint64_t>();
      auto garr = r.array<std::int32_t>();
      auto sarr = r.array<std::int8_t>();
      auto layout = SharingLayout::from_arrays(rows, dim, n_groups, std::move(garr), std::move(sarr));
      auto gv = section("GRPV");
      p.group_values = gv.matrix();
      o.group_values = gv.adadelta();
      auto es = section("ESHR");
      Matrix values = es.matrix();
      o.channel2 = es.adadelta();
      p.shared = SharedEmbedding(std::move(layout), std::move(values));
      break;
    }
  }
  for (std::size_t c = 0; c < cfg.num_channels(); ++c) {
    auto r = section(c == 0 ? "BNK1" : "BNK2");
    read_banks(r, p.banks[c], o.banks[c]);
  }
  {
    auto r = section("SOFT");
    p.softmax_w = r.matrix();
    p.softmax_b = r.array<double>();
    o.softmax_w = r.adadelta();
    o.softmax_b = r.adadelta();
  }
  return Checkpoint{Model(std::move(cfg), std::move(p), std::move(o), step, std::move(groups), hash),
                    std::move(vocab), std::move(order)};
}

}  // namespace gshare
