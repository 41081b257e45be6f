#include "bexrl/ad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bexrl/util/error.hpp"

namespace bexrl::ad {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail(ErrorKind::kParse, "checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out = "BXRL";
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string meta = ckpt.metadata.dump();
  put<std::uint64_t>(out, meta.size());
  out += meta;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.values()) put<double>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(4) != "BXRL") fail(ErrorKind::kParse, "not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kParse, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto meta_len = r.get<std::uint64_t>();
  try {
    ckpt.metadata = nlohmann::ordered_json::parse(r.take(meta_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("checkpoint metadata: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.take(name_len);
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = r.get<double>();
    ckpt.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) fail(ErrorKind::kParse, "trailing bytes after checkpoint tensor table");
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.empty()) fail(ErrorKind::kIo, "empty checkpoint path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint '" + path.string() + "'");
  out << encode_checkpoint(ckpt);
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace bexrl::ad
