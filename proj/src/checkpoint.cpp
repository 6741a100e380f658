#include "dualrnn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dualrnn {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 4;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw io_error("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw io_error("checkpoint truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& is) {
  const uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string get_string(std::istream& is) {
  const uint64_t n = get_u64(is);
  if (n > (1ull << 30)) throw io_error("checkpoint string field is implausibly large");
  std::string s(static_cast<size_t>(n), '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw io_error("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model, const RunConfig& cfg) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("cannot write checkpoint '" + path + "'");
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, kVersion);
  put_string(os, config_echo(cfg));
  put_u64(os, model.rng().seed());
  put_u64(os, model.rng().position());
  const ParamStore<float>& store = model.params();
  put_u64(os, store.count());
  for (size_t i = 0; i < store.count(); ++i) {
    const auto& e = store.entry(static_cast<int>(i));
    put_string(os, e.name);
    put_u32(os, static_cast<uint32_t>(e.value.shape().rank));
    for (int d = 0; d < e.value.shape().rank; ++d)
      put_u64(os, static_cast<uint64_t>(e.value.shape().d[static_cast<size_t>(d)]));
    put_u32(os, kDtypeF32);
    for (int64_t j = 0; j < e.value.size(); ++j) put_f32(os, e.value[j]);
  }
  if (!os) throw io_error("failed while writing checkpoint '" + path + "'");
}

Model<float> load_checkpoint(const std::string& path, RunConfig* echoed) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw io_error("'" + path + "' is not a checkpoint file");
  const uint32_t version = get_u32(is);
  if (version != kVersion)
    throw io_error("checkpoint version " + std::to_string(version) + " is not supported");
  const RunConfig cfg = parse_config_text(get_string(is));
  const uint64_t rng_seed = get_u64(is);
  const uint64_t rng_pos = get_u64(is);

  Model<float> model(cfg.model());
  const uint64_t n = get_u64(is);
  if (n != model.params().count())
    throw io_error("checkpoint holds " + std::to_string(n) + " parameters, model expects " +
                   std::to_string(model.params().count()));
  for (uint64_t i = 0; i < n; ++i) {
    const std::string name = get_string(is);
    const uint32_t rank = get_u32(is);
    if (rank < 1 || rank > 3) throw io_error("parameter '" + name + "' has bad rank");
    Shape s;
    s.rank = static_cast<int>(rank);
    for (uint32_t d = 0; d < rank; ++d) s.d[d] = static_cast<int64_t>(get_u64(is));
    if (get_u32(is) != kDtypeF32)
      throw io_error("parameter '" + name + "' has an unsupported dtype");
    auto& entry = model.params()[name];
    if (entry.value.shape() != s)
      throw io_error("parameter '" + name + "' is " + s.str() + " in the checkpoint but " +
                     entry.value.shape().str() + " in the model");
    for (int64_t j = 0; j < entry.value.size(); ++j) entry.value[j] = get_f32(is);
  }
  model.rng().restore(rng_seed, rng_pos);
  if (echoed) *echoed = cfg;
  return model;
}

}  // namespace dualrnn
