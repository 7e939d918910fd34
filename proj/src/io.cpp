#include "pclnet/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <png.h>

#include "pclnet/error.hpp"

namespace pclnet::io {

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) fail(ErrorKind::io, "failed writing " + path.string());
  }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "file not found: " + path_);
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  void expect_magic(const char* magic, std::size_t n) {
    need(n);
    if (std::memcmp(buf_.data() + pos_, magic, n) != 0)
      fail(ErrorKind::format, path_ + ": bad magic bytes");
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void version() {
    const auto v = u32();
    if (v != kVersion) fail(ErrorKind::format, path_ + ": unsupported version " + std::to_string(v));
  }
  /// Guards element counts taken from the header against the file length.
  void need_elements(std::uint64_t count, std::size_t width) {
    if (count > (buf_.size() - pos_) / width) fail(ErrorKind::format, path_ + ": truncated payload");
  }
  void finish() const {
    if (pos_ != buf_.size()) fail(ErrorKind::format, path_ + ": trailing bytes");
  }
  const std::string& path() const { return path_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail(ErrorKind::format, path_ + ": unexpected end of file");
  }
  std::string path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_scene(const fs::path& path, const PolSARScene& scene) {
  Writer w;
  w.bytes("T3BIN\0", 6);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(scene.height()));
  w.u32(static_cast<std::uint32_t>(scene.width()));
  for (const auto& t : scene.pixels())
    for (double v : t.stored()) w.f32(v);
  w.save(path);
}

PolSARScene read_scene(const fs::path& path) {
  Reader r(path);
  r.expect_magic("T3BIN\0", 6);
  r.version();
  const auto h = r.u32(), w = r.u32();
  const std::uint64_t count = std::uint64_t{h} * w;
  r.need_elements(count * kPolChannels, 4);
  std::vector<CoherencyMatrix> pixels(count);
  for (auto& px : pixels) {
    std::array<double, kPolChannels> v;
    for (double& x : v) x = r.f32();
    px = CoherencyMatrix(v);
  }
  r.finish();
  return PolSARScene(static_cast<int>(h), static_cast<int>(w), std::move(pixels));
}

void write_labels(const fs::path& path, const LabelMap& labels) {
  Writer w;
  w.bytes("LBL\0", 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(labels.height()));
  w.u32(static_cast<std::uint32_t>(labels.width()));
  w.u32(static_cast<std::uint32_t>(labels.num_classes()));
  for (auto l : labels.labels()) w.i32(l);
  w.save(path);
}

LabelMap read_labels(const fs::path& path) {
  Reader r(path);
  r.expect_magic("LBL\0", 4);
  r.version();
  const auto h = r.u32(), w = r.u32(), c = r.u32();
  const std::uint64_t count = std::uint64_t{h} * w;
  r.need_elements(count, 4);
  std::vector<std::int32_t> labels(count);
  for (auto& l : labels) l = r.i32();
  r.finish();
  try {
    return LabelMap(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(labels));
  } catch (const Error& e) {
    fail(ErrorKind::format, r.path() + ": " + e.what());
  }
}

void write_patches(const fs::path& path, const PretrainDataset& dataset) {
  Writer w;
  w.bytes("PDS\0", 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  w.u32(kPolChannels);
  w.u32(static_cast<std::uint32_t>(dataset.patch_size));
  for (const auto& p : dataset.samples) {
    require(p.channels() == kPolChannels && p.height() == dataset.patch_size &&
                p.width() == dataset.patch_size,
            "dataset patch shape does not match its header");
    for (double v : p.values()) w.f32(v);
  }
  w.save(path);
}

PretrainDataset read_patches(const fs::path& path) {
  Reader r(path);
  r.expect_magic("PDS\0", 4);
  r.version();
  const auto count = r.u32(), channels = r.u32(), size = r.u32();
  if (channels == 0 || size == 0) fail(ErrorKind::format, r.path() + ": empty patch shape");
  const std::uint64_t per = std::uint64_t{channels} * size * size;
  r.need_elements(per * count, 4);
  PretrainDataset ds;
  ds.patch_size = static_cast<int>(size);
  ds.samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<double> v(per);
    for (double& x : v) x = r.f32();
    ds.samples.emplace_back(static_cast<int>(channels), static_cast<int>(size),
                            static_cast<int>(size), std::move(v));
  }
  r.finish();
  return ds;
}

void read_manifest(const fs::path& path, PretrainDataset& dataset) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("sample_id,row,col,cluster_id", 0) != 0)
    fail(ErrorKind::format, path.string() + ": unexpected manifest header");
  dataset.provenance.clear();
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t id;
    Provenance p;
    if (std::sscanf(line.c_str(), "%zu,%d,%d,%d", &id, &p.row, &p.col, &p.cluster) != 4 ||
        id != expected++)
      fail(ErrorKind::format, path.string() + ": malformed manifest line '" + line + "'");
    dataset.provenance.push_back(p);
  }
  if (!dataset.samples.empty() && dataset.provenance.size() != dataset.samples.size())
    fail(ErrorKind::format, path.string() + ": manifest and patch counts differ");
}

void write_checkpoint(const fs::path& path, const std::vector<NamedTensor>& tensors) {
  Writer w;
  w.bytes("CKPT", 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::uint64_t n = 1;
    for (auto d : t.dims) n *= d;
    require(n == t.values.size(), "checkpoint tensor " + t.name + " payload does not match dims");
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    for (double v : t.values) w.f32(v);
  }
  w.save(path);
}

std::vector<NamedTensor> read_checkpoint(const fs::path& path) {
  if (!fs::is_regular_file(path)) fail(ErrorKind::io, "checkpoint not found: " + path.string());
  Reader r(path);
  r.expect_magic("CKPT", 4);
  r.version();
  const auto count = r.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str(r.u32());
    const auto rank = r.u32();
    r.need_elements(rank, 4);
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.u32());
      n *= t.dims.back();
    }
    r.need_elements(n, 4);
    t.values.resize(n);
    for (double& v : t.values) v = r.f32();
    out.push_back(std::move(t));
  }
  r.finish();
  return out;
}

namespace {
NamedTensor named(const Param& p) {
  NamedTensor t{p.name, {}, p.value};
  for (int d : p.dims) t.dims.push_back(static_cast<std::uint32_t>(d));
  return t;
}

Param as_param(const NamedTensor& t) {
  Param p{t.name, {}, t.values};
  for (auto d : t.dims) p.dims.push_back(static_cast<int>(d));
  return p;
}

const NamedTensor& lookup(const std::vector<NamedTensor>& ts, const std::string& name,
                          const fs::path& path) {
  for (const auto& t : ts)
    if (t.name == name) return t;
  fail(ErrorKind::format, path.string() + ": missing tensor " + name);
}
}  // namespace

void write_encoder(const fs::path& path, const FrozenEncoder& encoder) {
  std::vector<NamedTensor> ts;
  for (const auto& p : encoder.conv) ts.push_back(named(p));
  ts.push_back({"input.mean", {kPolChannels}, {encoder.stats.mean.begin(), encoder.stats.mean.end()}});
  ts.push_back({"input.std", {kPolChannels}, {encoder.stats.stddev.begin(), encoder.stats.stddev.end()}});
  ts.push_back({"input.patch_size", {1}, {static_cast<double>(encoder.patch_size)}});
  write_checkpoint(path, ts);
}

FrozenEncoder read_encoder(const fs::path& path) {
  const auto ts = read_checkpoint(path);
  FrozenEncoder enc;
  for (int i = 1;; ++i) {
    const std::string prefix = "conv" + std::to_string(i);
    const auto w = std::find_if(ts.begin(), ts.end(), [&](auto& t) { return t.name == prefix + ".weight"; });
    if (w == ts.end()) break;
    enc.conv.push_back(as_param(*w));
    enc.conv.push_back(as_param(lookup(ts, prefix + ".bias", path)));
  }
  if (enc.conv.empty()) fail(ErrorKind::format, path.string() + ": no conv layers in checkpoint");
  const auto& mean = lookup(ts, "input.mean", path);
  const auto& sd = lookup(ts, "input.std", path);
  const auto& ps = lookup(ts, "input.patch_size", path);
  if (mean.values.size() != kPolChannels || sd.values.size() != kPolChannels || ps.values.size() != 1)
    fail(ErrorKind::format, path.string() + ": malformed input statistics");
  std::copy(mean.values.begin(), mean.values.end(), enc.stats.mean.begin());
  std::copy(sd.values.begin(), sd.values.end(), enc.stats.stddev.begin());
  enc.patch_size = static_cast<int>(ps.values[0]);
  return enc;
}

void write_classifier(const fs::path& path, const LinearClassifier& c) {
  c.validate();
  write_checkpoint(path, {{"classifier.weight",
                           {static_cast<std::uint32_t>(c.num_classes), static_cast<std::uint32_t>(c.feature_dim)},
                           c.weights},
                          {"classifier.bias", {static_cast<std::uint32_t>(c.num_classes)}, c.bias}});
}

LinearClassifier read_classifier(const fs::path& path) {
  const auto ts = read_checkpoint(path);
  const auto& w = lookup(ts, "classifier.weight", path);
  const auto& b = lookup(ts, "classifier.bias", path);
  if (w.dims.size() != 2 || b.dims.size() != 1 || b.dims[0] != w.dims[0])
    fail(ErrorKind::format, path.string() + ": malformed classifier tensors");
  LinearClassifier c;
  c.num_classes = static_cast<int>(w.dims[0]);
  c.feature_dim = static_cast<int>(w.dims[1]);
  c.weights = w.values;
  c.bias = b.values;
  c.validate();
  return c;
}

const std::vector<Rgb>& class_palette() {
  static const std::vector<Rgb> palette = {
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},
      {245, 130, 48},  {145, 30, 180},  {70, 240, 240},  {240, 50, 230},
      {210, 245, 60},  {250, 190, 190}, {0, 128, 128},   {230, 190, 255},
      {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195},
  };
  return palette;
}

void write_label_png(const fs::path& path, const LabelMap& labels) {
  require(labels.height() > 0 && labels.width() > 0, "cannot write an empty label map");
  std::vector<png_byte> rgb(labels.size() * 3);
  const auto& palette = class_palette();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = labels.labels()[i];
    const Rgb c = l == 0 ? Rgb{0, 0, 0} : palette[static_cast<std::size_t>(l - 1) % palette.size()];
    rgb[3 * i] = c.r;
    rgb[3 * i + 1] = c.g;
    rgb[3 * i + 2] = c.b;
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(labels.width());
  image.height = static_cast<png_uint_32>(labels.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr))
    fail(ErrorKind::io, "cannot write PNG " + path.string() + ": " + image.message);
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << content;
  if (!out) fail(ErrorKind::io, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pclnet::io
