#include "shapeinv/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "shapeinv/hash.hpp"
#include "shapeinv/io.hpp"

namespace shapeinv {

namespace {

constexpr std::string_view kMagic = "SINV";

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void widths(const std::vector<std::size_t>& w) {
    u32(static_cast<std::uint32_t>(w.size()));
    for (std::size_t x : w) u64(x);
  }
  void tensor(const std::string& name, const Mat& m) {
    str(name);
    u32(2);
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  std::string& bytes() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<std::size_t> widths() {
    const std::uint32_t n = u32();
    if (n > 64) fail("implausible layer count");
    std::vector<std::size_t> w(n);
    for (auto& x : w) x = static_cast<std::size_t>(u64());
    return w;
  }
  Tensor tensor() {
    Tensor t;
    t.name = str();
    if (u32() != 2) fail("tensor " + t.name + " is not rank 2");
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (cols != 0 && rows > (in_.size() - pos_) / 8 / cols) fail("tensor " + t.name + " overruns payload");
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = f64();
    return t;
  }
  bool done() const { return pos_ == in_.size(); }

  [[noreturn]] static void fail(const std::string& what) { throw Error(ErrorCode::CheckpointError, what); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail("truncated checkpoint");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint64_t checksum(std::string_view payload) {
  Fnv1a h;
  h.str(payload);
  return h.value();
}

void write_params(Writer& w, const NetParams& p) {
  for (const Tensor& t : p.tensors()) w.tensor(t.name, t.value);
}

Mat as_row(const Vec& v) { return v.transpose(); }

}  // namespace

Checkpoint init_checkpoint(const GeneratorArch& g, const DiscriminatorArch& d, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0xC0FFEE);
  Checkpoint c;
  c.generator_arch = g;
  c.discriminator_arch = d;
  c.generator = Generator::init_params(g, rng);
  c.discriminator = Discriminator::init_params(d, rng);
  c.seed = seed;
  return c;
}

Generator make_generator(const Checkpoint& c) { return Generator(c.generator_arch, c.generator); }
Discriminator make_discriminator(const Checkpoint& c) {
  return Discriminator(c.discriminator_arch, c.discriminator);
}

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.u64(c.generator_arch.latent_dim);
  w.u64(c.generator_arch.points);
  w.widths(c.generator_arch.hidden);
  w.f64(c.generator_arch.slope);
  w.widths(c.discriminator_arch.point_widths);
  w.widths(c.discriminator_arch.head_widths);
  w.f64(c.discriminator_arch.slope);
  w.u64(c.seed);
  w.u64(c.config_hash);
  w.u64(c.epochs_done);
  w.u64(c.generator_opt.step);
  w.u64(c.discriminator_opt.step);
  w.u32(static_cast<std::uint32_t>(c.generator.count()));
  w.u32(static_cast<std::uint32_t>(c.discriminator.count()));
  w.u32(static_cast<std::uint32_t>(c.extras.count()));
  write_params(w, c.generator);
  write_params(w, c.discriminator);
  write_params(w, c.extras);
  w.tensor("opt.g.m", as_row(c.generator_opt.m));
  w.tensor("opt.g.v", as_row(c.generator_opt.v));
  w.tensor("opt.d.m", as_row(c.discriminator_opt.m));
  w.tensor("opt.d.v", as_row(c.discriminator_opt.v));
  const std::string payload = std::move(w.bytes());

  Writer file;
  file.bytes().append(kMagic);
  file.u32(kCheckpointVersion);
  file.u64(payload.size());
  file.bytes().append(payload);
  file.u64(checksum(payload));
  return std::move(file.bytes());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 24 || bytes.substr(0, 4) != kMagic) Reader::fail("not a checkpoint (bad magic)");
  Reader head(bytes.substr(4, 12));
  const std::uint32_t version = head.u32();
  if (version != kCheckpointVersion) {
    Reader::fail("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t len = head.u64();
  if (len != bytes.size() - 24) Reader::fail("payload length does not match file size");
  const std::string_view payload = bytes.substr(16, len);
  if (Reader(bytes.substr(16 + len)).u64() != checksum(payload)) Reader::fail("checksum mismatch");

  Reader r(payload);
  Checkpoint c;
  c.generator_arch.latent_dim = r.u64();
  c.generator_arch.points = r.u64();
  c.generator_arch.hidden = r.widths();
  c.generator_arch.slope = r.f64();
  c.discriminator_arch.point_widths = r.widths();
  c.discriminator_arch.head_widths = r.widths();
  c.discriminator_arch.slope = r.f64();
  c.seed = r.u64();
  c.config_hash = r.u64();
  c.epochs_done = r.u64();
  c.generator_opt.step = r.u64();
  c.discriminator_opt.step = r.u64();
  const std::uint32_t ng = r.u32();
  const std::uint32_t nd = r.u32();
  const std::uint32_t ne = r.u32();
  auto read_params = [&](std::uint32_t n) {
    std::vector<Tensor> t;
    for (std::uint32_t i = 0; i < n; ++i) t.push_back(r.tensor());
    return NetParams(std::move(t));
  };
  c.generator = read_params(ng);
  c.discriminator = read_params(nd);
  c.extras = read_params(ne);
  auto moment = [&](const char* name) {
    Tensor t = r.tensor();
    if (t.name != name || t.value.rows() > 1) Reader::fail(std::string("expected tensor ") + name);
    return Vec(Eigen::Map<const Vec>(t.value.data(), t.value.size()));
  };
  c.generator_opt.m = moment("opt.g.m");
  c.generator_opt.v = moment("opt.g.v");
  c.discriminator_opt.m = moment("opt.d.m");
  c.discriminator_opt.v = moment("opt.d.v");
  if (!r.done()) Reader::fail("trailing bytes in payload");

  try {
    (void)make_generator(c);
    (void)make_discriminator(c);
  } catch (const Error& e) {
    Reader::fail(std::string("tensors do not match the stored architecture: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace shapeinv
