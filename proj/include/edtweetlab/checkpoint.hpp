#ifndef EDTWEETLAB_CHECKPOINT_HPP_
#define EDTWEETLAB_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "edtweetlab/tensor.hpp"
#include "edtweetlab/util.hpp"

namespace edtweetlab {

// On-disk model container: a free-form text metadata blob plus named tensor
// blobs. Layout (all integers little-endian; doubles IEEE 754):
//   8 bytes   magic "EDTWLCKP"
//   u32       container version
//   u64       meta length, then meta bytes
//   u32       tensor count, then per tensor:
//               u32 name length, name bytes,
//               u32 rank, rank x u64 dims, f64 data (row-major)
struct Checkpoint {
  std::string meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return t;
    }
    throw FormatError("checkpoint: missing tensor " + name);
  }

  bool has_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return true;
    }
    return false;
  }
};

inline constexpr char kCheckpointMagic[8] = {'E', 'D', 'T', 'W', 'L', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(uint_bytes(4)); }
  std::uint64_t u64() { return uint_bytes(8); }

  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw FormatError("checkpoint: truncated file");
    std::string out(data_.substr(pos_, n));
    pos_ += n;
    return out;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::uint64_t uint_bytes(int n) {
    if (pos_ + static_cast<std::size_t>(n) > data_.size()) {
      throw FormatError("checkpoint: truncated file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, ckpt.meta.size());
  out += ckpt.meta;
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, 2);
    detail::put_u64(out, tensor.rows());
    detail::put_u64(out, tensor.cols());
    for (std::size_t i = 0; i < tensor.size(); ++i) detail::put_f64(out, tensor[i]);
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(std::string_view data) {
  detail::ByteReader r(data);
  if (r.bytes(sizeof(kCheckpointMagic)) !=
      std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw FormatError("checkpoint: bad magic");
  }
  std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  std::uint64_t meta_len = r.u64();
  ckpt.meta = r.bytes(meta_len);
  std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.bytes(r.u32());
    std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 2) throw FormatError("checkpoint: unsupported tensor rank");
    std::uint64_t rows = r.u64();
    std::uint64_t cols = rank == 2 ? r.u64() : 1;
    if (rows * cols > (1ull << 32)) throw FormatError("checkpoint: tensor too large");
    Tensor t(rows, cols);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = r.f64();
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_CHECKPOINT_HPP_
