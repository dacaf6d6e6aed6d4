#include "geoattack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace geoattack {
namespace {

constexpr char kMagic[8] = {'G', 'E', 'O', 'A', 'T', 'K', 'C', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void pod(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void raw(const void* p, std::size_t n) { bytes_.append(static_cast<const char*>(p), n); }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void tensor(const std::string& name, std::span<const double> values) {
    str(name);
    pod<std::uint64_t>(values.size());
    raw(values.data(), values.size() * sizeof(double));
  }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void tensor(const std::string& expected_name, std::span<double> out) {
    const std::string name = str();
    if (name != expected_name) throw CheckpointError("checkpoint tensor '" + name + "' where '" + expected_name + "' expected");
    const auto n = pod<std::uint64_t>();
    if (n != out.size())
      throw CheckpointError("checkpoint tensor '" + name + "' has " + std::to_string(n) + " elements, expected " +
                            std::to_string(out.size()));
    need(n * sizeof(double));
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Classifier& classifier, const std::filesystem::path& path) {
  const ModelParams& p = classifier.params();
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(classifier.kind()));
  w.pod<std::uint64_t>(classifier.vocab().hash());
  w.pod<std::uint64_t>(classifier.vocab().size());
  w.pod<std::uint64_t>(p.embedding.dim());
  w.pod<std::uint64_t>(classifier.hidden_dim());
  w.pod<std::uint64_t>(classifier.num_classes());
  for (std::size_t c = 0; c < classifier.num_classes(); ++c)
    w.str(c < classifier.label_names().size() ? classifier.label_names()[c] : std::to_string(c));
  std::vector<std::uint64_t> widths, filters;
  if (const auto* conv = std::get_if<ConvEncoder>(&p.encoder)) {
    for (std::size_t g = 0; g < conv->widths.size(); ++g) {
      widths.push_back(conv->widths[g]);
      filters.push_back(conv->kernels[g].rows);
    }
  }
  w.pod<std::uint64_t>(widths.size());
  for (auto x : widths) w.pod(x);
  w.pod<std::uint64_t>(filters.size());
  for (auto x : filters) w.pod(x);

  std::size_t count = 3;
  for_each_tensor(p.encoder, [&](const std::string&, std::span<const double>) { ++count; });
  w.pod<std::uint64_t>(count);
  w.tensor("embedding", p.embedding.rows.data);
  for_each_tensor(p.encoder, [&](const std::string& name, std::span<const double> t) { w.tensor(name, t); });
  w.tensor("head.weight", p.head.weight.data);
  w.tensor("head.bias", p.head.bias);
  w.pod<std::uint64_t>(fnv1a64(w.bytes()));

  // Write-then-rename so a failed write never leaves a partial checkpoint.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Classifier load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const Vocabulary> vocab) {
  if (!vocab) throw CheckpointError("load_checkpoint needs a vocabulary");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();

  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("not a checkpoint file (or truncated): " + path.string());
  const std::string_view body(bytes.data(), bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (stored != fnv1a64(body)) throw CheckpointError("checkpoint checksum mismatch (corrupt or truncated): " + path.string());

  Reader r(body.substr(sizeof(kMagic)));
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const auto kind = static_cast<EncoderKind>(r.pod<std::uint32_t>());
  if (static_cast<std::uint32_t>(kind) > 2) throw CheckpointError("unknown encoder kind in checkpoint");
  const auto vocab_hash = r.pod<std::uint64_t>();
  const auto vocab_size = r.pod<std::uint64_t>();
  if (vocab_hash != vocab->hash() || vocab_size != vocab->size())
    throw CheckpointError("vocabulary hash mismatch: checkpoint was trained with a different vocabulary");
  const auto dim = r.pod<std::uint64_t>();
  const auto hidden = r.pod<std::uint64_t>();
  const auto classes = r.pod<std::uint64_t>();
  if (dim == 0 || hidden == 0 || classes < 2 || classes > (1u << 20)) throw CheckpointError("bad checkpoint dimensions");
  std::vector<std::string> labels;
  for (std::uint64_t c = 0; c < classes; ++c) labels.push_back(r.str());
  std::vector<std::uint64_t> widths(r.pod<std::uint64_t>());
  if (widths.size() > 64) throw CheckpointError("bad checkpoint conv layout");
  for (auto& x : widths) x = r.pod<std::uint64_t>();
  std::vector<std::uint64_t> filters(r.pod<std::uint64_t>());
  if (filters.size() != widths.size()) throw CheckpointError("bad checkpoint conv layout");
  for (auto& x : filters) x = r.pod<std::uint64_t>();

  ModelParams p;
  p.embedding = EmbeddingTable(vocab_size, dim);
  switch (kind) {
    case EncoderKind::Convolutional: {
      ConvEncoder enc;
      enc.input_dim = dim;
      for (std::size_t g = 0; g < widths.size(); ++g) {
        enc.widths.push_back(widths[g]);
        enc.kernels.emplace_back(filters[g], widths[g] * dim);
        enc.biases.emplace_back(filters[g], 0.0);
      }
      p.encoder = std::move(enc);
      break;
    }
    case EncoderKind::Recurrent: {
      RecurrentEncoder enc;
      enc.input_dim = dim;
      enc.hidden = hidden;
      enc.w_input = Matrix(4 * hidden, dim);
      enc.w_hidden = Matrix(4 * hidden, hidden);
      enc.bias.assign(4 * hidden, 0.0);
      p.encoder = std::move(enc);
      break;
    }
    case EncoderKind::Bag:
      p.encoder = BagEncoder{dim};
      break;
  }
  p.head = AffineHead(Matrix(classes, hidden), Vec(classes, 0.0));

  std::size_t expected = 3;
  for_each_tensor(p.encoder, [&](const std::string&, std::span<double>) { ++expected; });
  if (r.pod<std::uint64_t>() != expected) throw CheckpointError("checkpoint tensor count mismatch");
  r.tensor("embedding", p.embedding.rows.data);
  for_each_tensor(p.encoder, [&](const std::string& name, std::span<double> t) { r.tensor(name, t); });
  r.tensor("head.weight", p.head.weight.data);
  r.tensor("head.bias", p.head.bias);
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  try {
    return Classifier(std::move(p), std::move(vocab), std::move(labels));
  } catch (const ModelError& e) {
    throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

}  // namespace geoattack
