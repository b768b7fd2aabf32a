#include "longrisk/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "longrisk/version.hpp"

namespace longrisk {

namespace {

constexpr char kMagic[8] = {'L', 'N', 'G', 'R', 'I', 'S', 'K', '\0'};

template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = sizeof(T); i-- > 0;) buf.push_back(static_cast<char>(bytes[i]));
  } else {
    buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  template <typename T>
  T get_le() {
    if (pos_ + sizeof(T) > bytes_.size()) fail("truncated file");
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
        std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_bytes(std::size_t n) {
    if (pos_ + n > bytes_.size()) fail("truncated file");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError("checkpoint " + path_ + ": " + why);
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params,
                     const nlohmann::json& meta) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(buf, kCheckpointFormatVersion);
  const std::string meta_str = meta.is_null() ? std::string("{}") : meta.dump();
  put_le<std::uint64_t>(buf, meta_str.size());
  buf += meta_str;
  put_le<std::uint64_t>(buf, params.size());
  for (const auto& [name, tensor] : params) {
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) put_le<std::uint64_t>(buf, d);
    for (double v : tensor.data()) put_le<double>(buf, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  Reader r(bytes, path);
  const std::string magic = r.get_bytes(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    r.fail("bad magic, not a checkpoint file");
  }
  const auto version = r.get_le<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    r.fail("unsupported format version " + std::to_string(version) +
           " (this build reads version " +
           std::to_string(kCheckpointFormatVersion) + ")");
  }
  Checkpoint ckpt;
  const auto meta_len = r.get_le<std::uint64_t>();
  const std::string meta_str = r.get_bytes(meta_len);
  ckpt.meta = nlohmann::json::parse(meta_str, nullptr, false);
  if (ckpt.meta.is_discarded()) r.fail("metadata block is not valid JSON");
  const auto n_entries = r.get_le<std::uint64_t>();
  ckpt.entries.reserve(n_entries);
  for (std::uint64_t e = 0; e < n_entries; ++e) {
    Checkpoint::Entry entry;
    const auto name_len = r.get_le<std::uint32_t>();
    entry.name = r.get_bytes(name_len);
    const auto ndim = r.get_le<std::uint32_t>();
    entry.shape.resize(ndim);
    std::size_t numel = 1;
    for (auto& d : entry.shape) {
      d = static_cast<std::size_t>(r.get_le<std::uint64_t>());
      numel *= d;
    }
    entry.data.resize(numel);
    for (auto& v : entry.data) v = r.get_le<double>();
    ckpt.entries.push_back(std::move(entry));
  }
  return ckpt;
}

}  // namespace longrisk
