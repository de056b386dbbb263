#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "btlab/experiments.hpp"

namespace btlab {

// ---------------------------------------------------------------------------
// Metrics CSV

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "epoch",   "step",           "total",     "invariance",         "redundancy",
      "lr",      "mean_abs_offdiag", "mean_diag", "min_std",          "entropy_proxy",
      "conditional_logdet", "probe_top1", "wall_clock"};
  return cols;
}

std::string metrics_header() {
  std::string out;
  for (const auto& c : metrics_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

namespace {

// %.17g round-trips every double and is locale-independent for these values.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    // stod rejects "nan"/"inf" spelled by printf on some platforms; handle them.
    if (s == "nan" || s == "-nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw FormatError("metrics: bad number '" + s + "' in " + where);
  }
}

}  // namespace

std::string metrics_row(const MetricsRecord& r) {
  std::string out = std::to_string(r.epoch) + ',' + std::to_string(r.step);
  for (double v : {r.total, r.invariance, r.redundancy, r.lr, r.mean_abs_offdiag, r.mean_diag,
                   r.min_std, r.entropy_proxy}) {
    out += ',' + fmt(v);
  }
  out += ',' + (r.conditional ? fmt(*r.conditional) : std::string());
  out += ',' + (r.probe_top1 ? fmt(*r.probe_top1) : std::string());
  out += ',' + fmt(r.wall_clock);
  return out;
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("metrics: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw FormatError("metrics: '" + path + "' is empty");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  std::string missing;
  for (const auto& c : metrics_columns()) {
    if (!index.count(c)) missing += (missing.empty() ? "" : ", ") + c;
  }
  if (!missing.empty()) {
    throw FormatError("metrics: '" + path + "' is missing columns: " + missing);
  }

  std::vector<MetricsRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError("metrics: " + path + ":" + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    }
    const std::string where = path + ":" + std::to_string(line_no);
    auto cell = [&](const char* name) -> const std::string& { return cells[index.at(name)]; };
    auto num = [&](const char* name) { return parse_double(cell(name), where); };
    MetricsRecord r;
    r.epoch = static_cast<std::size_t>(num("epoch"));
    r.step = static_cast<std::uint64_t>(num("step"));
    r.total = num("total");
    r.invariance = num("invariance");
    r.redundancy = num("redundancy");
    r.lr = num("lr");
    r.mean_abs_offdiag = num("mean_abs_offdiag");
    r.mean_diag = num("mean_diag");
    r.min_std = num("min_std");
    r.entropy_proxy = num("entropy_proxy");
    if (!cell("conditional_logdet").empty()) r.conditional = num("conditional_logdet");
    if (!cell("probe_top1").empty()) r.probe_top1 = num("probe_top1");
    r.wall_clock = num("wall_clock");
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// BTCK checkpoints

namespace {

constexpr char kMagic[4] = {'B', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }

  void name(const std::string& s) {
    if (s.size() > 0xffff) throw FormatError("checkpoint: name too long: " + s.substr(0, 40));
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s);
  }

  void tensor(const NamedTensor& t) {
    name(t.name);
    if (t.shape.size() > 0xff) throw FormatError("checkpoint: too many dims for " + t.name);
    if (shape_numel(t.shape) != t.data.size()) {
      throw FormatError("checkpoint: tensor '" + t.name + "' shape does not match its data");
    }
    u8(static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) u32(checked32(d));
    for (double v : t.data) f64(v);
  }

  static std::uint32_t checked32(std::size_t v) {
    if (v > 0xffffffffULL) throw FormatError("checkpoint: value exceeds u32");
    return static_cast<std::uint32_t>(v);
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Parser {
 public:
  explicit Parser(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::uint64_t le(int n, const char* what) {
    need(n, what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::uint8_t u8(const char* w) { return static_cast<std::uint8_t>(le(1, w)); }
  std::uint16_t u16(const char* w) { return static_cast<std::uint16_t>(le(2, w)); }
  std::uint32_t u32(const char* w) { return static_cast<std::uint32_t>(le(4, w)); }
  std::uint64_t u64(const char* w) { return le(8, w); }
  double f64(const char* w) {
    const std::uint64_t bits = u64(w);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::string name(const char* what) { return bytes(u16(what), what); }

  NamedTensor tensor(const char* section) {
    NamedTensor t;
    t.name = name(section);
    const std::uint8_t ndim = u8(section);
    std::size_t numel = 1;
    for (std::uint8_t i = 0; i < ndim; ++i) {
      t.shape.push_back(u32(section));
      numel *= t.shape.back();
    }
    // Bound the allocation by what the file can actually hold.
    if (numel > (b_.size() - pos_) / 8) {
      throw FormatError(std::string("checkpoint: truncated ") + section + " '" + t.name + "'");
    }
    t.data.resize(numel);
    for (auto& v : t.data) v = f64(section);
    return t;
  }

  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint: truncated file in ") + what);
    }
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kVersion);
  w.u32(Writer::checked32(ck.config_json.size()));
  w.bytes(ck.config_json);
  w.u32(Writer::checked32(ck.tensors.size()));
  for (const auto& t : ck.tensors) w.tensor(t);
  w.u32(Writer::checked32(ck.buffers.size()));
  for (const auto& t : ck.buffers) w.tensor(t);
  w.u32(ck.epoch);
  w.u64(ck.step);
  w.u32(Writer::checked32(ck.rng_states.size()));
  for (const auto& [name, state] : ck.rng_states) {
    w.name(name);
    w.u64(state);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Parser p(bytes);
  if (p.bytes(4, "magic") != std::string(kMagic, 4)) {
    throw FormatError("checkpoint: bad magic (not a BTCK file)");
  }
  const std::uint32_t version = p.u32("version");
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                      " (expected " + std::to_string(kVersion) + ")");
  }
  Checkpoint ck;
  ck.config_json = p.bytes(p.u32("config length"), "config");
  const std::uint32_t n_tensors = p.u32("tensor count");
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    ck.tensors.push_back(p.tensor("tensor"));
    if (!seen.insert(ck.tensors.back().name).second) {
      throw FormatError("checkpoint: duplicate tensor '" + ck.tensors.back().name + "'");
    }
  }
  const std::uint32_t n_buffers = p.u32("buffer count");
  for (std::uint32_t i = 0; i < n_buffers; ++i) {
    ck.buffers.push_back(p.tensor("buffer"));
    if (!seen.insert(ck.buffers.back().name).second) {
      throw FormatError("checkpoint: duplicate buffer '" + ck.buffers.back().name + "'");
    }
  }
  ck.epoch = p.u32("epoch");
  ck.step = p.u64("step");
  const std::uint32_t n_rng = p.u32("rng count");
  for (std::uint32_t i = 0; i < n_rng; ++i) {
    std::string name = p.name("rng state");
    ck.rng_states.emplace_back(std::move(name), p.u64("rng state"));
  }
  if (p.remaining() != 0) {
    throw FormatError("checkpoint: " + std::to_string(p.remaining()) + " trailing bytes");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("checkpoint: cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint make_checkpoint(const RunConfig& config, SiameseModel& model,
                           std::vector<ParamGroup>* groups, std::uint32_t epoch,
                           std::uint64_t step) {
  Checkpoint ck;
  ck.config_json = config_to_json(config);
  for (const auto& p : model.parameters()) {
    const auto d = p.tensor->data();
    ck.tensors.push_back({p.name, p.tensor->shape(), {d.begin(), d.end()}});
  }
  for (const auto& b : model.buffers()) {
    ck.buffers.push_back({b.name, {b.values->size()}, *b.values});
  }
  if (groups) {
    for (const auto& b : momentum_buffers(*groups)) {
      ck.buffers.push_back({b.name, {b.values->size()}, *b.values});
    }
  }
  ck.epoch = epoch;
  ck.step = step;
  // Every stochastic draw in training comes from a stream keyed by
  // (seed, purpose, epoch, ...), so the seed plus the epoch counter is the
  // complete generator state.
  ck.rng_states = {{"splitmix64.seed", config.seed}, {"splitmix64.next_epoch", epoch}};
  return ck;
}

void restore_checkpoint(const Checkpoint& ck, SiameseModel& model,
                        std::vector<ParamGroup>* groups) {
  std::map<std::string, const NamedTensor*> tensors, buffers;
  for (const auto& t : ck.tensors) tensors[t.name] = &t;
  for (const auto& b : ck.buffers) buffers[b.name] = &b;

  auto params = model.parameters();
  auto model_buffers = model.buffers();
  std::vector<NamedBuffer> opt_buffers;
  if (groups) opt_buffers = momentum_buffers(*groups);

  // Validate everything first so a bad checkpoint leaves no partial state.
  for (const auto& p : params) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) throw FormatError("checkpoint: missing tensor '" + p.name + "'");
    if (it->second->shape != p.tensor->shape()) {
      throw ShapeError("checkpoint: tensor '" + p.name + "' has shape " +
                       shape_str(it->second->shape) + ", model expects " +
                       shape_str(p.tensor->shape()));
    }
  }
  if (tensors.size() != params.size()) {
    for (const auto& [name, t] : tensors) {
      bool known = false;
      for (const auto& p : params) known = known || p.name == name;
      if (!known) throw FormatError("checkpoint: unexpected tensor '" + name + "'");
    }
  }
  auto check_buffer = [&](const NamedBuffer& b) {
    auto it = buffers.find(b.name);
    if (it == buffers.end()) throw FormatError("checkpoint: missing buffer '" + b.name + "'");
    if (it->second->data.size() != b.values->size()) {
      throw ShapeError("checkpoint: buffer '" + b.name + "' has " +
                       std::to_string(it->second->data.size()) + " values, expected " +
                       std::to_string(b.values->size()));
    }
  };
  for (const auto& b : model_buffers) check_buffer(b);
  for (const auto& b : opt_buffers) check_buffer(b);

  for (const auto& p : params) {
    auto dst = p.tensor->mutable_data();
    const auto& src = tensors.at(p.name)->data;
    std::copy(src.begin(), src.end(), dst.begin());
  }
  for (const auto& b : model_buffers) *b.values = buffers.at(b.name)->data;
  for (const auto& b : opt_buffers) *b.values = buffers.at(b.name)->data;
}

}  // namespace btlab
