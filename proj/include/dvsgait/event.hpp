#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dvsgait/errors.hpp"

namespace dvsgait {

// One DVS record: pixel (x, y), absolute timestamp in microseconds, polarity
// +1 (brighter) or -1 (darker). Never 0.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;
  std::int8_t p = 1;
};

inline bool canonical_event_order(const Event& a, const Event& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  if (a.x != b.x) return a.x < b.x;
  return a.p < b.p;
}

// Time-sorted event sequence over an exposure window [t_start, t_start + duration],
// bound to a fixed sensor geometry. Immutable by convention after construction.
class EventStream {
 public:
  EventStream() = default;

  EventStream(std::vector<Event> events, std::uint16_t width, std::uint16_t height,
              std::uint64_t t_start, std::uint64_t duration_us)
      : events_(std::move(events)),
        width_(width),
        height_(height),
        t_start_(t_start),
        duration_(duration_us) {
    validate();
  }

  const std::vector<Event>& events() const { return events_; }
  std::uint16_t width() const { return width_; }
  std::uint16_t height() const { return height_; }
  std::uint64_t t_start() const { return t_start_; }
  std::uint64_t duration() const { return duration_; }
  std::uint64_t t_end() const { return t_start_ + duration_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  void validate() const {
    std::uint64_t prev = t_start_;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const Event& e = events_[i];
      if (e.x >= width_ || e.y >= height_)
        throw Error(ErrorKind::invalid_stream,
                    "event " + std::to_string(i) + " outside sensor geometry");
      if (e.p != 1 && e.p != -1)
        throw Error(ErrorKind::invalid_stream,
                    "event " + std::to_string(i) + " has polarity " + std::to_string(e.p));
      if (e.t < prev)
        throw Error(ErrorKind::invalid_stream,
                    "event " + std::to_string(i) + " breaks timestamp order");
      if (e.t < t_start_ || e.t > t_end())
        throw Error(ErrorKind::invalid_stream,
                    "event " + std::to_string(i) + " outside exposure window");
      prev = e.t;
    }
  }

 private:
  std::vector<Event> events_;
  std::uint16_t width_ = 0;
  std::uint16_t height_ = 0;
  std::uint64_t t_start_ = 0;
  std::uint64_t duration_ = 0;
};

}  // namespace dvsgait
