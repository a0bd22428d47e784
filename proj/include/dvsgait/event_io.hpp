#pragma once

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dvsgait/errors.hpp"
#include "dvsgait/event.hpp"

namespace dvsgait {

// EVS1 container (little-endian):
//   0   magic "EVS1"
//   4   u16 width
//   6   u16 height
//   8   u64 t_start (absolute microseconds)
//   16  u64 duration
//   24  u64 count
//   32  count * 16-byte records {u16 x, u16 y, u64 t, i8 p, 3 pad}
// A ".csv" extension selects the plain-text mode instead: optional
// "# key=value" metadata lines, an "x,y,t,p" header row, one event per line.

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& what) : b_(bytes), what_(what) {}

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint8_t>(b_[pos_]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(b_[pos_ + 1])) << 8);
    pos_ += 2;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::int8_t i8() {
    need(1);
    return static_cast<std::int8_t>(b_[pos_++]);
  }

  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

  std::uint64_t pos() const { return pos_; }
  std::uint64_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > b_.size())
      throw FormatError(what_ + ": unexpected end of file", pos_);
  }

  const std::string& b_;
  std::string what_;
  std::uint64_t pos_ = 0;
};

inline bool has_csv_extension(const std::string& path) {
  if (path.size() < 4) return false;
  std::string tail = path.substr(path.size() - 4);
  for (char& c : tail) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return tail == ".csv";
}

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::data_error, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace detail

inline void write_events(const EventStream& stream, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::data_error, "cannot open " + path + " for writing");

  if (detail::has_csv_extension(path)) {
    f << "# width=" << stream.width() << " height=" << stream.height()
      << " t_start=" << stream.t_start() << " duration=" << stream.duration() << "\n";
    f << "x,y,t,p\n";
    for (const Event& e : stream.events())
      f << e.x << "," << e.y << "," << e.t << "," << static_cast<int>(e.p) << "\n";
    return;
  }

  std::string buf;
  buf.reserve(32 + 16 * stream.size());
  buf += "EVS1";
  detail::put_u16(buf, stream.width());
  detail::put_u16(buf, stream.height());
  detail::put_u64(buf, stream.t_start());
  detail::put_u64(buf, stream.duration());
  detail::put_u64(buf, stream.size());
  for (const Event& e : stream.events()) {
    detail::put_u16(buf, e.x);
    detail::put_u16(buf, e.y);
    detail::put_u64(buf, e.t);
    buf.push_back(static_cast<char>(e.p));
    buf.append(3, '\0');
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw Error(ErrorKind::data_error, "short write to " + path);
}

namespace detail {

inline EventStream read_events_evs1(const std::string& bytes, const std::string& path) {
  ByteReader r(bytes, path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "EVS1") != 0)
    throw FormatError(path + ": bad magic", 0);
  r.skip(4);
  const std::uint16_t w = r.u16();
  const std::uint16_t h = r.u16();
  const std::uint64_t t_start = r.u64();
  const std::uint64_t duration = r.u64();
  const std::uint64_t count = r.u64();

  std::vector<Event> events;
  events.reserve(count);
  std::uint64_t prev_t = t_start;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t rec_off = r.pos();
    Event e;
    e.x = r.u16();
    e.y = r.u16();
    e.t = r.u64();
    e.p = r.i8();
    r.skip(3);
    if (e.p != 1 && e.p != -1)
      throw FormatError(path + ": record " + std::to_string(i) + " has invalid polarity " +
                            std::to_string(e.p),
                        rec_off + 12);
    if (e.x >= w || e.y >= h)
      throw FormatError(path + ": record " + std::to_string(i) + " outside sensor geometry",
                        rec_off);
    if (e.t < prev_t)
      throw FormatError(path + ": record " + std::to_string(i) + " breaks timestamp order",
                        rec_off + 4);
    if (e.t < t_start || e.t > t_start + duration)
      throw FormatError(path + ": record " + std::to_string(i) + " outside exposure window",
                        rec_off + 4);
    prev_t = e.t;
    events.push_back(e);
  }
  if (r.remaining() != 0)
    throw FormatError(path + ": trailing bytes after last record", r.pos());
  return EventStream(std::move(events), w, h, t_start, duration);
}

inline EventStream read_events_csv(const std::string& text, const std::string& path) {
  std::uint64_t offset = 0;
  bool have_meta = false, have_header = false;
  std::uint64_t width = 0, height = 0, t_start = 0, duration = 0;
  std::vector<Event> events;

  std::istringstream in(text);
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    const std::uint64_t line_off = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string kv;
      while (meta >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq);
        const std::uint64_t val = std::stoull(kv.substr(eq + 1));
        if (key == "width") width = val;
        else if (key == "height") height = val;
        else if (key == "t_start") t_start = val;
        else if (key == "duration") duration = val;
        have_meta = true;
      }
      continue;
    }
    if (!have_header) {
      if (line != "x,y,t,p")
        throw FormatError(path + ": expected header row 'x,y,t,p'", line_off);
      have_header = true;
      continue;
    }
    Event e;
    long long x, y, p;
    unsigned long long t;
    if (std::sscanf(line.c_str(), "%lld,%lld,%llu,%lld", &x, &y, &t, &p) != 4)
      throw FormatError(path + ": record " + std::to_string(record) + " is not 'x,y,t,p'",
                        line_off);
    if (p != 1 && p != -1)
      throw FormatError(path + ": record " + std::to_string(record) + " has invalid polarity",
                        line_off);
    if (x < 0 || y < 0 || x > 0xffff || y > 0xffff)
      throw FormatError(path + ": record " + std::to_string(record) + " coordinate out of range",
                        line_off);
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.t = t;
    e.p = static_cast<std::int8_t>(p);
    if (!events.empty() && e.t < events.back().t)
      throw FormatError(path + ": record " + std::to_string(record) + " breaks timestamp order",
                        line_off);
    events.push_back(e);
    ++record;
  }
  if (!have_header) throw FormatError(path + ": missing header row", 0);

  if (!have_meta) {
    // no metadata lines: infer geometry and window from the data
    for (const Event& e : events) {
      width = std::max<std::uint64_t>(width, e.x + 1ULL);
      height = std::max<std::uint64_t>(height, e.y + 1ULL);
    }
    if (!events.empty()) {
      t_start = events.front().t;
      duration = events.back().t - events.front().t;
    }
  }
  return EventStream(std::move(events), static_cast<std::uint16_t>(width),
                     static_cast<std::uint16_t>(height), t_start, duration);
}

}  // namespace detail

inline EventStream read_events(const std::string& path) {
  const std::string bytes = detail::slurp(path);
  try {
    if (detail::has_csv_extension(path)) return detail::read_events_csv(bytes, path);
    return detail::read_events_evs1(bytes, path);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::format_error, path + ": " + e.what());
  }
}

}  // namespace dvsgait
