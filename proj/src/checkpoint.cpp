#include <bit>
#include <cstdio>
#include <cstring>

#include "aed/seq2seq.hpp"
#include "aed/tensor_io.hpp"

// Checkpoint layout (all integers and floats little-endian):
//
//   "AEDM"                      magic
//   u16 version
//   u8  flags                   bit 0: bidirectional encoder
//   u64 feature_dim, target_dim, encoder_hidden, decoder_hidden,
//       head_hidden, horizon, lookback, seed
//   u64 generation
//   i64 trained_at_s
//   u32 id length, id bytes
//   f64 tensors                 Seq2SeqParams::tensors() order, row-major
//   u32 feature count, then per channel: u32 channel index, f64 min, f64 max
//   u32 target count, same layout
//   u64 FNV-1a checksum of every preceding byte
namespace aed {

namespace {

constexpr char kMagic[4] = {'A', 'E', 'D', 'M'};

void put_ranges(std::vector<std::uint8_t>& out, const std::vector<ChannelRange>& ranges) {
  put_u32(out, static_cast<std::uint32_t>(ranges.size()));
  for (const auto& r : ranges) {
    put_u32(out, static_cast<std::uint32_t>(r.channel));
    put_f64(out, r.min);
    put_f64(out, r.max);
  }
}

std::vector<ChannelRange> get_ranges(ByteReader& in) {
  const auto n = in.u32();
  std::vector<ChannelRange> out;
  for (std::uint32_t i = 0; i < n && !in.truncated(); ++i) {
    const auto ch = in.u32();
    ChannelRange r;
    r.min = in.f64();
    r.max = in.f64();
    if (in.truncated()) break;
    if (ch >= kChannelCount) {
      throw CheckpointError(CheckpointError::Kind::invalid, "checkpoint names unknown channel index " + std::to_string(ch));
    }
    r.channel = static_cast<Channel>(ch);
    out.push_back(r);
  }
  return out;
}

[[noreturn]] void truncated() {
  throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint is truncated");
}

}  // namespace

std::string make_model_id(const Seq2SeqParams& params, std::uint64_t generation) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto t : params.tensors()) {
    h = fnv1a({reinterpret_cast<const std::uint8_t*>(t.data()), t.size_bytes()}, h);
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), "aedm-%016llx-g%llu", static_cast<unsigned long long>(h),
                static_cast<unsigned long long>(generation));
  return buf;
}

std::vector<std::uint8_t> encode_checkpoint(const ForecastModel& model) {
  const auto& p = model.params;
  const auto& c = p.config;
  p.validate();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u16(out, kCheckpointVersion);
  out.push_back(c.bidirectional ? 1 : 0);
  for (auto d : {c.feature_dim, c.target_dim, c.encoder_hidden, c.decoder_hidden, c.head_hidden, c.horizon, c.lookback}) {
    put_u64(out, static_cast<std::uint64_t>(d));
  }
  put_u64(out, c.seed);
  put_u64(out, model.generation);
  put_u64(out, static_cast<std::uint64_t>(model.trained_at_s));
  put_u32(out, static_cast<std::uint32_t>(model.model_id.size()));
  out.insert(out.end(), model.model_id.begin(), model.model_id.end());
  for (auto t : p.tensors()) {
    for (double v : t) put_f64(out, v);
  }
  put_ranges(out, model.norm.features);
  put_ranges(out, model.norm.targets);
  put_u64(out, fnv1a(out));
  return out;
}

ForecastModel decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < sizeof(kMagic)) truncated();
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(Kind::bad_magic, "not a model checkpoint (bad magic)");
  }
  ByteReader in(bytes);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) in.u8();
  const auto version = in.u16();
  if (in.truncated()) truncated();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                      " is not supported (expected " +
                                                      std::to_string(kCheckpointVersion) + ")");
  }

  ForecastModel m;
  ModelConfig cfg;
  const auto flags = in.u8();
  cfg.bidirectional = (flags & 1) != 0;
  Eigen::Index* dims[] = {&cfg.feature_dim, &cfg.target_dim, &cfg.encoder_hidden, &cfg.decoder_hidden,
                          &cfg.head_hidden, &cfg.horizon,     &cfg.lookback};
  for (auto* d : dims) *d = static_cast<Eigen::Index>(in.u64());
  cfg.seed = in.u64();
  m.generation = in.u64();
  m.trained_at_s = static_cast<std::int64_t>(in.u64());
  const auto id_len = in.u32();
  if (in.truncated() || in.remaining() < id_len) truncated();
  m.model_id.assign(reinterpret_cast<const char*>(bytes.data() + in.position()), id_len);
  for (std::uint32_t i = 0; i < id_len; ++i) in.u8();

  // Reject absurd headers before allocating tensors for them.
  constexpr Eigen::Index kMaxDim = 1 << 20;
  for (auto* d : dims) {
    if (*d > kMaxDim) {
      if (static_cast<std::uint64_t>(*d) > in.remaining()) truncated();
      throw CheckpointError(Kind::invalid, "checkpoint header has an implausible dimension");
    }
  }
  try {
    m.params = zero_model(cfg);
  } catch (const DataError& e) {
    throw CheckpointError(Kind::invalid, std::string("checkpoint header is invalid: ") + e.what());
  }
  if (in.remaining() < m.params.parameter_count() * 8) truncated();
  for (auto t : m.params.tensors()) {
    for (auto& v : t) v = in.f64();
  }
  m.norm.features = get_ranges(in);
  m.norm.targets = get_ranges(in);
  const auto body_end = in.position();
  const auto stored = in.u64();
  if (in.truncated()) truncated();
  if (in.remaining() != 0) throw CheckpointError(Kind::invalid, "trailing bytes after checkpoint checksum");
  const auto actual = fnv1a({bytes.data(), body_end});
  if (stored != actual) throw CheckpointError(Kind::checksum_mismatch, "checkpoint checksum mismatch");

  if (m.norm.features.size() != static_cast<std::size_t>(cfg.feature_dim) ||
      m.norm.targets.size() != static_cast<std::size_t>(cfg.target_dim)) {
    throw CheckpointError(Kind::invalid, "checkpoint normalization does not match model dimensions");
  }
  return m;
}

void save_checkpoint(const ForecastModel& model, const std::filesystem::path& path) {
  write_file_bytes(encode_checkpoint(model), path);
}

ForecastModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace aed
