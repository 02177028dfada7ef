#include "spherekick/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace spherekick {

namespace {

constexpr char magic[8] = {'S', 'P', 'H', 'K', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u32(std::uint32_t v) { bytes(v, 4); }
  void u64(std::uint64_t v) { bytes(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  const std::vector<char>& data() const { return buf_; }

 private:
  void bytes(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}
  std::uint64_t bytes(int n, const char* field) {
    if (pos_ + std::size_t(n) > buf_.size()) {
      throw Error(Errc::format, "checkpoint truncated while reading field '" + std::string(field) + "'");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf_[pos_ + std::size_t(i)])) << (8 * i);
    pos_ += std::size_t(n);
    return v;
  }
  std::uint32_t u32(const char* field) { return std::uint32_t(bytes(4, field)); }
  std::uint64_t u64(const char* field) { return bytes(8, field); }
  double f64(const char* field) { return std::bit_cast<double>(u64(field)); }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const FlowState& state, const CheckpointMeta& meta, const std::filesystem::path& path) {
  const SpectralScalar& w = state.vorticity;
  if (w.truncation() != meta.truncation) throw Error(Errc::dimension, "checkpoint meta N differs from state");
  Writer out;
  out.raw(magic, sizeof magic);
  out.u32(checkpoint_version);
  out.u32(std::uint32_t(meta.truncation));
  out.f64(meta.nu);
  out.f64(meta.omega);
  out.f64(meta.t);
  out.u64(std::uint64_t(meta.k));
  out.u64(meta.seed);
  out.u64(meta.chain_index);
  out.u64(meta.rng_position);
  const int N = meta.truncation;
  out.u64(SpectralScalar::coeff_count(N));
  for (int n = 0; n <= N; ++n) {
    for (int m = 0; m <= n; ++m) {
      out.f64(w(n, m).real());
      out.f64(w(n, m).imag());
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot write checkpoint '" + path.string() + "'");
  f.write(out.data().data(), std::streamsize(out.data().size()));
  if (!f) throw Error(Errc::io, "write failed for checkpoint '" + path.string() + "'");
}

void save_checkpoint(const ChainState& chain, const SolverParams& params, const std::filesystem::path& path) {
  CheckpointMeta meta;
  meta.truncation = chain.state.vorticity.truncation();
  meta.nu = params.nu;
  meta.omega = params.omega;
  meta.t = chain.state.t;
  meta.k = chain.k;
  meta.seed = chain.rng.master_seed();
  meta.chain_index = chain.rng.stream_index();
  meta.rng_position = chain.rng.position();
  save_checkpoint(chain.state, meta, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open checkpoint '" + path.string() + "'");
  std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader in(std::move(buf));

  char got[8];
  for (char& c : got) c = char(in.bytes(1, "magic"));
  if (std::memcmp(got, magic, sizeof magic) != 0) throw Error(Errc::format, "checkpoint field 'magic' is wrong");
  const std::uint32_t version = in.u32("version");
  if (version != checkpoint_version) {
    throw Error(Errc::format, "checkpoint field 'version' is " + std::to_string(version) + ", expected " +
                                  std::to_string(checkpoint_version));
  }
  Checkpoint cp;
  CheckpointMeta& meta = cp.meta;
  meta.truncation = int(std::int32_t(in.u32("N")));
  if (meta.truncation < 1 || meta.truncation > 4096) {
    throw Error(Errc::format, "checkpoint field 'N' has invalid value " + std::to_string(meta.truncation));
  }
  meta.nu = in.f64("nu");
  if (!(meta.nu >= 0.0) || !std::isfinite(meta.nu)) throw Error(Errc::format, "checkpoint field 'nu' is invalid");
  meta.omega = in.f64("omega");
  if (!(meta.omega >= 0.0) || !std::isfinite(meta.omega)) {
    throw Error(Errc::format, "checkpoint field 'omega' is invalid");
  }
  meta.t = in.f64("t");
  if (!std::isfinite(meta.t)) throw Error(Errc::format, "checkpoint field 't' is invalid");
  meta.k = (long long)(in.u64("k"));
  meta.seed = in.u64("seed");
  meta.chain_index = in.u64("chain_index");
  meta.rng_position = in.u64("rng_position");
  const std::uint64_t count = in.u64("payload_count");
  if (count != SpectralScalar::coeff_count(meta.truncation)) {
    throw Error(Errc::format, "checkpoint field 'payload_count' is " + std::to_string(count) + ", expected " +
                                  std::to_string(SpectralScalar::coeff_count(meta.truncation)));
  }
  SpectralScalar w(meta.truncation);
  for (int n = 0; n <= meta.truncation; ++n) {
    for (int m = 0; m <= n; ++m) {
      const double re = in.f64("payload");
      const double im = in.f64("payload");
      w(n, m) = complex_t(re, im);
    }
  }
  if (!in.at_end()) throw Error(Errc::format, "checkpoint has trailing bytes after field 'payload'");
  cp.state = FlowState{std::move(w), meta.t};
  return cp;
}

ChainState restore_chain(const Checkpoint& cp) {
  ChainState c;
  c.state = cp.state;
  c.k = cp.meta.k;
  c.rng = RngStream(cp.meta.seed, cp.meta.chain_index);
  c.rng.seek(cp.meta.rng_position);
  return c;
}

}  // namespace spherekick
