#include "hybrec/model_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "hybrec/errors.hpp"
#include "hybrec/text_encoder.hpp"

namespace hybrec {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  void str16(std::string_view s) {
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s);
  }
  void matrix(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double v : m.values()) f64(v);
  }
  void qmatrix(const QuantizedMatrix& q) {
    u64(q.rows);
    u64(q.cols);
    for (std::int8_t v : q.qvalues) u8(static_cast<std::uint8_t>(v));
    for (double s : q.scales) f64(s);
  }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string_view take(std::size_t n) {
    if (n > data_.size() - pos_) throw DataError("model file: truncated " + what_);
    const auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str16() { return std::string(take(u16())); }
  std::size_t count(std::size_t elem_bytes) {
    const std::uint64_t n = u64();
    if (elem_bytes > 0 && n > (data_.size() - pos_) / elem_bytes) throw DataError("model file: bad length in " + what_);
    return static_cast<std::size_t>(n);
  }
  Matrix matrix() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (cols != 0 && rows > (data_.size() - pos_) / 8 / cols) throw DataError("model file: bad matrix in " + what_);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = f64();
    return m;
  }
  QuantizedMatrix qmatrix() {
    QuantizedMatrix q;
    q.rows = u64();
    q.cols = u64();
    if (q.cols != 0 && q.rows > (data_.size() - pos_) / q.cols) throw DataError("model file: bad matrix in " + what_);
    q.qvalues.resize(q.rows * q.cols);
    for (auto& v : q.qvalues) v = static_cast<std::int8_t>(u8());
    q.scales.resize(q.rows);
    for (double& s : q.scales) s = f64();
    return q;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::uint64_t le(int n) {
    const auto s = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

void write_head(Writer& w, const PredictionHead& h) {
  w.matrix(h.hidden);
  w.matrix(h.hidden_bias);
  w.matrix(h.out);
  w.matrix(h.out_bias);
}

}  // namespace

void attach_int8(ModelFile& file) {
  file.int8_gnn.clear();
  for (const Matrix& w : file.params.effective_gnn_weights()) file.int8_gnn.push_back(quantize_per_row(w));
  file.int8_head = QuantizedHead::from(file.params.effective_head());
}

std::string serialize_model(const ModelFile& file) {
  const ModelParams& p = file.params;
  std::vector<std::pair<std::string, std::string>> sections;
  const auto add = [&](std::string name, auto&& fill) {
    Writer w;
    fill(w);
    sections.emplace_back(std::move(name), w.take());
  };
  add("meta", [&](Writer& w) {
    for (std::size_t v : {p.dims.d_g, p.dims.d_s, p.dims.d_h, p.dims.layers, p.dims.num_buckets}) w.u64(v);
    w.u8(static_cast<std::uint8_t>(p.variant));
    w.u64(p.text_seed);
  });
  add("graph", [&](Writer& w) {
    w.u64(file.user_ids.size());
    for (auto id : file.user_ids) w.i64(id);
    w.u64(file.item_ids.size());
    for (auto id : file.item_ids) w.i64(id);
  });
  add("gnn", [&](Writer& w) {
    w.u64(p.gnn_weights.size());
    for (const auto& m : p.gnn_weights) w.matrix(m);
  });
  add("node_table", [&](Writer& w) { w.matrix(p.node_table); });
  // The seeded table is regenerated on load; only a tuned one is stored.
  const bool text_tuned = p.is_trainable("text_table") ||
                          p.text_table != make_text_table(p.dims.num_buckets, p.dims.d_s, p.text_seed);
  if (text_tuned) add("text_table", [&](Writer& w) { w.matrix(p.text_table); });
  add("head", [&](Writer& w) { write_head(w, p.head); });
  add("trainable", [&](Writer& w) {
    w.u64(p.trainable.size());
    for (const auto& [name, flag] : p.trainable) {
      w.str16(name);
      w.u8(flag ? 1 : 0);
    }
  });
  if (!p.lora.empty()) {
    add("lora", [&](Writer& w) {
      w.u64(p.lora.size());
      for (const auto& [target, ad] : p.lora) {
        w.str16(target);
        w.u64(ad.rank);
        w.f64(ad.alpha);
        w.matrix(ad.a);
        w.matrix(ad.b);
      }
    });
  }
  if (!file.int8_gnn.empty()) {
    add("int8.gnn", [&](Writer& w) {
      w.u64(file.int8_gnn.size());
      for (const auto& q : file.int8_gnn) w.qmatrix(q);
    });
  }
  if (file.int8_head) {
    add("int8.head", [&](Writer& w) {
      w.qmatrix(file.int8_head->hidden);
      w.matrix(file.int8_head->hidden_bias);
      w.qmatrix(file.int8_head->out);
      w.matrix(file.int8_head->out_bias);
    });
  }

  Writer w;
  w.bytes(kModelMagic);
  w.u8(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    w.str16(name);
    w.u64(payload.size());
    w.bytes(payload);
  }
  return w.take();
}

ModelFile deserialize_model(std::string_view bytes) {
  Reader r(bytes, "header");
  if (r.take(kModelMagic.size()) != kModelMagic) throw DataError("model file: bad magic");
  const std::uint8_t version = r.u8();
  if (version != kModelFormatVersion) {
    throw DataError("model file: unsupported format version " + std::to_string(version));
  }
  ModelFile file;
  ModelParams& p = file.params;
  bool have_meta = false, have_text = false;
  const std::uint32_t n_sections = r.u32();
  for (std::uint32_t s = 0; s < n_sections; ++s) {
    const std::string name = r.str16();
    const std::size_t len = r.count(1);
    Reader sec(r.take(len), "section " + name);
    if (name == "meta") {
      p.dims.d_g = sec.u64();
      p.dims.d_s = sec.u64();
      p.dims.d_h = sec.u64();
      p.dims.layers = sec.u64();
      p.dims.num_buckets = sec.u64();
      const std::uint8_t v = sec.u8();
      if (v > static_cast<std::uint8_t>(Variant::hybrid)) throw DataError("model file: bad variant");
      p.variant = static_cast<Variant>(v);
      p.text_seed = sec.u64();
      have_meta = true;
    } else if (name == "graph") {
      file.user_ids.resize(sec.count(8));
      for (auto& id : file.user_ids) id = sec.i64();
      file.item_ids.resize(sec.count(8));
      for (auto& id : file.item_ids) id = sec.i64();
    } else if (name == "gnn") {
      p.gnn_weights.resize(sec.count(16));
      for (auto& m : p.gnn_weights) m = sec.matrix();
    } else if (name == "node_table") {
      p.node_table = sec.matrix();
    } else if (name == "text_table") {
      p.text_table = sec.matrix();
      have_text = true;
    } else if (name == "head") {
      p.head.hidden = sec.matrix();
      p.head.hidden_bias = sec.matrix();
      p.head.out = sec.matrix();
      p.head.out_bias = sec.matrix();
    } else if (name == "trainable") {
      const std::size_t n = sec.count(3);
      for (std::size_t i = 0; i < n; ++i) {
        std::string key = sec.str16();
        p.trainable[std::move(key)] = sec.u8() != 0;
      }
    } else if (name == "lora") {
      const std::size_t n = sec.count(1);
      for (std::size_t i = 0; i < n; ++i) {
        std::string target = sec.str16();
        LoraAdapter ad;
        ad.rank = sec.u64();
        ad.alpha = sec.f64();
        ad.a = sec.matrix();
        ad.b = sec.matrix();
        p.lora[std::move(target)] = std::move(ad);
      }
    } else if (name == "int8.gnn") {
      file.int8_gnn.resize(sec.count(16));
      for (auto& q : file.int8_gnn) q = sec.qmatrix();
    } else if (name == "int8.head") {
      QuantizedHead q;
      q.hidden = sec.qmatrix();
      q.hidden_bias = sec.matrix();
      q.out = sec.qmatrix();
      q.out_bias = sec.matrix();
      file.int8_head = std::move(q);
    } else {
      continue;  // unknown section
    }
    if (!sec.done()) throw DataError("model file: trailing bytes in section " + name);
  }
  if (!have_meta) throw DataError("model file: missing meta section");
  if (p.gnn_weights.size() != p.dims.layers || p.head.hidden.rows() != p.dims.fused_width() ||
      p.head.hidden.cols() != p.dims.d_h || p.node_table.cols() != p.dims.d_g) {
    throw DataError("model file: weight shapes disagree with meta");
  }
  for (const auto& [target, ad] : p.lora) {
    if (ad.rank == 0 || ad.a.rows() != ad.rank || ad.b.cols() != ad.rank) {
      throw DataError("model file: malformed LoRA adapter " + target);
    }
  }
  if (!have_text) p.text_table = make_text_table(p.dims.num_buckets, p.dims.d_s, p.text_seed);
  return file;
}

void save_model(const std::filesystem::path& path, const ModelFile& file) {
  const std::string bytes = serialize_model(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model to " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing model to " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace hybrec
