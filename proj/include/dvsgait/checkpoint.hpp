#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dvsgait/nn.hpp"

namespace dvsgait {

// CKPT1 container (little-endian): magic "CKPT1", u32 blob count, then per
// blob {u32 name length, name, u32 rank, rank * u32 dims, f32 payload}.
// Text metadata (the run configuration) rides along as a rank-1 blob with
// one byte per f32 value, so a checkpoint is self-describing.
struct CheckpointBlob {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline void save_checkpoint(const std::vector<CheckpointBlob>& blobs, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::data_error, "cannot open " + path + " for writing");
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) f.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  f.write("CKPT1", 5);
  put_u32(static_cast<std::uint32_t>(blobs.size()));
  for (const auto& b : blobs) {
    put_u32(static_cast<std::uint32_t>(b.name.size()));
    f.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u32(static_cast<std::uint32_t>(b.dims.size()));
    for (auto d : b.dims) put_u32(d);
    for (float v : b.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(bits);
    }
  }
  if (!f) throw Error(ErrorKind::data_error, "short write to " + path);
}

inline std::vector<CheckpointBlob> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::data_error, "cannot open " + path);
  auto get_u32 = [&]() -> std::uint32_t {
    char buf[4];
    if (!f.read(buf, 4)) throw Error(ErrorKind::data_error, path + ": truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[i])) << (8 * i);
    return v;
  };
  char magic[5];
  if (!f.read(magic, 5) || std::string(magic, 5) != "CKPT1")
    throw Error(ErrorKind::data_error, path + ": bad CKPT1 magic");

  std::vector<CheckpointBlob> blobs(get_u32());
  for (auto& b : blobs) {
    b.name.resize(get_u32());
    if (!f.read(b.name.data(), static_cast<std::streamsize>(b.name.size())))
      throw Error(ErrorKind::data_error, path + ": truncated blob name");
    b.dims.resize(get_u32());
    for (auto& d : b.dims) d = get_u32();
    b.data.resize(b.numel());
    for (auto& v : b.data) {
      const std::uint32_t bits = get_u32();
      std::memcpy(&v, &bits, 4);
    }
  }
  return blobs;
}

inline CheckpointBlob blob_from_tensor(const std::string& name, const Tensor& t) {
  CheckpointBlob b;
  b.name = name;
  for (std::size_t i = 0; i < t.rank(); ++i) b.dims.push_back(static_cast<std::uint32_t>(t.dim(i)));
  b.data.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) b.data.push_back(static_cast<float>(t[i]));
  return b;
}

inline CheckpointBlob blob_from_text(const std::string& name, const std::string& text) {
  CheckpointBlob b;
  b.name = name;
  b.dims.push_back(static_cast<std::uint32_t>(text.size()));
  b.data.reserve(text.size());
  for (unsigned char c : text) b.data.push_back(static_cast<float>(c));
  return b;
}

inline std::string text_from_blob(const CheckpointBlob& b) {
  std::string s;
  s.reserve(b.data.size());
  for (float v : b.data) s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return s;
}

// Copies blob values into the registered parameters by name; every parameter
// must be present with matching element count.
inline void restore_params(const ParamList& params, const std::vector<CheckpointBlob>& blobs) {
  std::map<std::string, const CheckpointBlob*> by_name;
  for (const auto& b : blobs) by_name[b.name] = &b;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw Error(ErrorKind::data_error, "checkpoint is missing parameter " + p.name);
    const CheckpointBlob& b = *it->second;
    if (b.numel() != p.value->size())
      throw Error(ErrorKind::data_error, "checkpoint shape mismatch for " + p.name);
    for (std::size_t i = 0; i < b.data.size(); ++i)
      (*p.value)[i] = static_cast<double>(b.data[i]);
  }
}

}  // namespace dvsgait
