#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dvsgait/errors.hpp"
#include "dvsgait/tensor.hpp"

namespace dvsgait {

// Grayscale intensity frames in [0, 1] with strictly increasing microsecond
// timestamps. The simulator treats intensity as linear light.
struct FrameSequence {
  std::vector<Tensor> frames;  // each {H, W}
  std::vector<std::uint64_t> timestamps_us;

  std::size_t height() const { return frames.empty() ? 0 : frames.front().dim(0); }
  std::size_t width() const { return frames.empty() ? 0 : frames.front().dim(1); }
  std::size_t size() const { return frames.size(); }

  void validate() const {
    if (frames.size() != timestamps_us.size() || frames.size() < 2)
      throw Error(ErrorKind::invalid_argument,
                  "frame sequence needs >= 2 frames with matching timestamps");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].rank() != 2 || frames[i].dim(0) != height() || frames[i].dim(1) != width())
        throw Error(ErrorKind::invalid_argument, "frame " + std::to_string(i) + " shape mismatch");
      for (std::size_t j = 0; j < frames[i].size(); ++j) {
        const double v = frames[i][j];
        if (!std::isfinite(v) || v < 0.0)
          throw Error(ErrorKind::invalid_argument,
                      "frame " + std::to_string(i) + " has negative or non-finite intensity");
      }
      if (i > 0 && timestamps_us[i] <= timestamps_us[i - 1])
        throw Error(ErrorKind::invalid_argument, "timestamps must be strictly increasing");
    }
  }
};

// ITU-R BT.601 luma. Input {3, H, W} with values in [0, 1].
inline Tensor grayscale(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3)
    throw Error(ErrorKind::invalid_argument, "grayscale: expected a 3-channel frame");
  const std::size_t h = rgb.dim(1), w = rgb.dim(2);
  Tensor out({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      out.at(y, x) = 0.299 * rgb.at(0, y, x) + 0.587 * rgb.at(1, y, x) + 0.114 * rgb.at(2, y, x);
  return out;
}

// --- PGM (P5) ------------------------------------------------------------
// 8-bit (maxval 255) or 16-bit (maxval 65535, big-endian samples per the
// Netpbm convention). Values map linearly to [0, 1].

inline void write_pgm(const Tensor& frame, const std::string& path, int bits = 8) {
  if (frame.rank() != 2) throw Error(ErrorKind::invalid_argument, "write_pgm: expected {H, W}");
  if (bits != 8 && bits != 16)
    throw Error(ErrorKind::invalid_argument, "write_pgm: bits must be 8 or 16");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::data_error, "cannot open " + path + " for writing");
  const std::size_t h = frame.dim(0), w = frame.dim(1);
  const long maxval = (bits == 8) ? 255 : 65535;
  f << "P5\n" << w << " " << h << "\n" << maxval << "\n";
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const long v = std::clamp(std::lround(frame[i] * static_cast<double>(maxval)), 0L, maxval);
    if (bits == 8) {
      f.put(static_cast<char>(v));
    } else {
      f.put(static_cast<char>((v >> 8) & 0xff));
      f.put(static_cast<char>(v & 0xff));
    }
  }
  if (!f) throw Error(ErrorKind::data_error, "short write to " + path);
}

inline Tensor read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::data_error, "cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw Error(ErrorKind::format_error, path + ": not a binary PGM (P5)");
  auto next_int = [&]() -> long {
    // skip whitespace and '#' comment lines
    int c = f.get();
    while (c == '#' || std::isspace(c)) {
      if (c == '#')
        while (c != '\n' && c != EOF) c = f.get();
      c = f.get();
    }
    long v = 0;
    bool any = false;
    while (c >= '0' && c <= '9') {
      v = v * 10 + (c - '0');
      any = true;
      c = f.get();
    }
    if (!any) throw Error(ErrorKind::format_error, path + ": malformed PGM header");
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535))
    throw Error(ErrorKind::format_error, path + ": unsupported PGM geometry or maxval");
  Tensor frame({static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  for (std::size_t i = 0; i < frame.size(); ++i) {
    long v;
    if (maxval == 255) {
      const int b = f.get();
      if (b == EOF) throw Error(ErrorKind::format_error, path + ": truncated pixel data");
      v = b;
    } else {
      const int hi = f.get(), lo = f.get();
      if (hi == EOF || lo == EOF)
        throw Error(ErrorKind::format_error, path + ": truncated pixel data");
      v = (hi << 8) | lo;
    }
    frame[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return frame;
}

// Directory layout: zero-padded "*.pgm" frames plus a "timestamps.txt"
// sidecar holding one integer microsecond timestamp per line.
inline FrameSequence read_frame_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      names.push_back(entry.path().string());
  }
  if (names.empty()) throw Error(ErrorKind::data_error, dir + ": no .pgm frames found");
  std::sort(names.begin(), names.end());

  FrameSequence seq;
  for (const std::string& name : names) seq.frames.push_back(read_pgm(name));

  const std::string ts_path = (fs::path(dir) / "timestamps.txt").string();
  std::ifstream ts(ts_path);
  if (!ts) throw Error(ErrorKind::data_error, "missing timestamp sidecar " + ts_path);
  std::uint64_t t;
  while (ts >> t) seq.timestamps_us.push_back(t);
  if (seq.timestamps_us.size() != seq.frames.size())
    throw Error(ErrorKind::data_error,
                ts_path + ": timestamp count does not match frame count");
  seq.validate();
  return seq;
}

inline void write_frame_dir(const FrameSequence& seq, const std::string& dir, int bits = 8) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.pgm", i);
    write_pgm(seq.frames[i], (fs::path(dir) / name).string(), bits);
  }
  std::ofstream ts((fs::path(dir) / "timestamps.txt").string(), std::ios::trunc);
  for (std::uint64_t t : seq.timestamps_us) ts << t << "\n";
}

}  // namespace dvsgait
