#include "rearrange/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "rearrange/errors.hpp"

namespace rearrange {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'E', 'M'};

template <class T>
void put(std::string& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > b_.size()) throw CheckpointError(std::string("checkpoint truncated reading ") + what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      crc32(c, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::string save_checkpoint(const EBMParams& p) {
  const auto shapes = parameter_shapes(p.kind);
  if (shapes.size() != p.tensors.size()) throw CheckpointError("parameter list does not match the concept's layout");
  std::string out(kMagic, 4);
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(p.kind));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensors.size()));
  for (const auto& t : p.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& t : p.tensors) {
    for (double v : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  put<std::uint32_t>(out, crc_of(out));
  return out;
}

EBMParams load_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 + 2 + 2 + 4 + 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.get<std::uint32_t>("crc") != crc_of(body)) throw CheckpointError("checkpoint CRC mismatch");

  Reader r(body.substr(4));
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto tag = r.get<std::uint16_t>("concept");
  bool known = false;
  for (ConceptKind k : kAllConcepts) known = known || static_cast<std::uint16_t>(k) == tag;
  if (!known) throw CheckpointError("unknown concept tag " + std::to_string(tag));
  EBMParams p;
  p.kind = static_cast<ConceptKind>(tag);
  const auto expected = parameter_shapes(p.kind);
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != expected.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " tensors, concept needs " +
                          std::to_string(expected.size()));
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto rank = r.get<std::uint32_t>("rank");
    ad::Shape s;
    for (std::uint32_t d = 0; d < rank; ++d) s.push_back(r.get<std::uint32_t>("dim"));
    if (s != expected[i]) {
      throw CheckpointError("tensor " + std::to_string(i) + " has shape " + ad::shape_string(s) + ", expected " +
                            ad::shape_string(expected[i]));
    }
    total += ad::shape_size(s);
  }
  if (body.size() - 4 - r.pos() != 4 * total) {
    throw CheckpointError("checkpoint payload is " + std::to_string(body.size() - 4 - r.pos()) + " bytes, shape table needs " +
                          std::to_string(4 * total));
  }
  for (const auto& s : expected) {
    ad::NumArray t(s);
    for (double& v : t.data()) v = static_cast<double>(std::bit_cast<float>(r.get<std::uint32_t>("weight")));
    p.tensors.push_back(std::move(t));
  }
  return p;
}

void write_checkpoint(const std::filesystem::path& path, const EBMParams& p) {
  const std::string bytes = save_checkpoint(p);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("short write to " + path.string());
}

EBMParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingAssetError("missing checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return load_checkpoint(ss.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

EBMParams round_to_float(const EBMParams& p) {
  EBMParams out = p;
  for (auto& t : out.tensors) {
    for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  }
  return out;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, ConceptKind kind) {
  return dir / (std::string(concept_name(kind)) + ".srem");
}

}  // namespace rearrange
