#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dvsgait/event.hpp"
#include "dvsgait/frames.hpp"
#include "dvsgait/rng.hpp"
#include "dvsgait/tensor.hpp"

namespace dvsgait {

// v2e-style synthesis knobs. A pixel fires when its (optionally low-passed)
// log intensity moves threshold_c away from the per-pixel reference level.
struct SimConfig {
  double threshold_c = 0.2;        // log-intensity contrast threshold
  double cutoff_hz = 300.0;        // first-order photoreceptor low-pass, 0 = off
  double noise_rate_hz = 1.0;      // per-pixel Poisson noise rate, 0 = off
  std::uint64_t refractory_us = 100;  // per-pixel dead time after an emitted event
  std::uint32_t interp_factor = 4;    // temporal upsampling before thresholding
  double log_eps = 1e-3;           // additive constant inside the logarithm
  std::uint64_t seed = 0;

  void validate() const {
    if (!(threshold_c > 0.0))
      throw Error(ErrorKind::invalid_argument, "sim: threshold_c must be > 0");
    if (interp_factor < 1)
      throw Error(ErrorKind::invalid_argument, "sim: interp_factor must be >= 1");
    if (!(log_eps > 0.0)) throw Error(ErrorKind::invalid_argument, "sim: log_eps must be > 0");
    if (cutoff_hz < 0.0 || noise_rate_hz < 0.0)
      throw Error(ErrorKind::invalid_argument, "sim: rates must be >= 0");
  }
};

// Element-wise ln(I + log_eps).
inline Tensor log_intensity(const Tensor& frame, double log_eps) {
  Tensor out = frame;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(frame[i] >= 0.0))
      throw Error(ErrorKind::invalid_argument, "log_intensity: negative intensity");
    out[i] = std::log(frame[i] + log_eps);
  }
  return out;
}

// Inserts factor-1 frames between each adjacent pair, linearly interpolated
// in the log domain (so a ramp that is linear in log stays exactly linear
// through the inserted samples). Timestamps interpolate with integer floor
// division; adjacent frames must be at least `factor` microseconds apart.
inline FrameSequence interpolate_frames(const FrameSequence& seq, std::uint32_t factor,
                                        double log_eps) {
  if (factor < 1) throw Error(ErrorKind::invalid_argument, "interpolate: factor must be >= 1");
  seq.validate();
  if (factor == 1) return seq;

  FrameSequence out;
  out.frames.reserve((seq.size() - 1) * factor + 1);
  out.timestamps_us.reserve(out.frames.capacity());
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const std::uint64_t ta = seq.timestamps_us[i], tb = seq.timestamps_us[i + 1];
    if (tb - ta < factor)
      throw Error(ErrorKind::invalid_argument,
                  "interpolate: frame spacing shorter than interpolation factor");
    const Tensor la = log_intensity(seq.frames[i], log_eps);
    const Tensor lb = log_intensity(seq.frames[i + 1], log_eps);
    out.frames.push_back(seq.frames[i]);
    out.timestamps_us.push_back(ta);
    for (std::uint32_t j = 1; j < factor; ++j) {
      const double w = static_cast<double>(j) / static_cast<double>(factor);
      Tensor mid = la;
      for (std::size_t q = 0; q < mid.size(); ++q)
        mid[q] = std::max(0.0, std::exp((1.0 - w) * la[q] + w * lb[q]) - log_eps);
      out.frames.push_back(std::move(mid));
      out.timestamps_us.push_back(ta + (static_cast<std::uint64_t>(j) * (tb - ta)) / factor);
    }
  }
  out.frames.push_back(seq.frames.back());
  out.timestamps_us.push_back(seq.timestamps_us.back());
  return out;
}

// First-order IIR low-pass y_n = y_{n-1} + a (x_n - y_{n-1}) with
// a = dt / (dt + 1 / (2 pi fc)), dt in seconds from the timestamps.
// y_0 = x_0; cutoff 0 bypasses the filter.
inline std::vector<double> lowpass_filter(const std::vector<double>& values,
                                          const std::vector<std::uint64_t>& timestamps_us,
                                          double cutoff_hz) {
  if (cutoff_hz < 0.0) throw Error(ErrorKind::invalid_argument, "lowpass: cutoff must be >= 0");
  if (cutoff_hz == 0.0 || values.empty()) return values;
  const double tau_s = 1.0 / (6.283185307179586477 * cutoff_hz);
  std::vector<double> out(values.size());
  out[0] = values[0];
  for (std::size_t n = 1; n < values.size(); ++n) {
    const double dt = static_cast<double>(timestamps_us[n] - timestamps_us[n - 1]) * 1e-6;
    const double a = dt / (dt + tau_s);
    out[n] = out[n - 1] + a * (values[n] - out[n - 1]);
  }
  return out;
}

inline std::vector<Tensor> lowpass_filter(const std::vector<Tensor>& log_frames,
                                          const std::vector<std::uint64_t>& timestamps_us,
                                          double cutoff_hz) {
  if (cutoff_hz == 0.0 || log_frames.empty()) return log_frames;
  const double tau_s = 1.0 / (6.283185307179586477 * cutoff_hz);
  std::vector<Tensor> out = log_frames;
  for (std::size_t n = 1; n < out.size(); ++n) {
    const double dt = static_cast<double>(timestamps_us[n] - timestamps_us[n - 1]) * 1e-6;
    const double a = dt / (dt + tau_s);
    for (std::size_t i = 0; i < out[n].size(); ++i)
      out[n][i] = out[n - 1][i] + a * (log_frames[n][i] - out[n - 1][i]);
  }
  return out;
}

// Adds per-pixel homogeneous Poisson events (fair-coin polarity) over the
// stream's window. Draws are keyed by (seed, x, y) so the result does not
// depend on pixel iteration order. Rate 0 returns the input unchanged.
inline EventStream inject_noise(const EventStream& stream, double rate_hz, std::uint64_t seed) {
  if (rate_hz < 0.0) throw Error(ErrorKind::invalid_argument, "inject_noise: rate must be >= 0");
  if (rate_hz == 0.0) return stream;

  const double window_s = static_cast<double>(stream.duration()) * 1e-6;
  std::vector<Event> merged = stream.events();
  for (std::uint16_t y = 0; y < stream.height(); ++y) {
    for (std::uint16_t x = 0; x < stream.width(); ++x) {
      Rng rng = keyed_rng(seed, x, y);
      const std::uint64_t n = rng.poisson(rate_hz * window_s);
      for (std::uint64_t i = 0; i < n; ++i) {
        Event e;
        e.x = x;
        e.y = y;
        e.t = stream.t_start() + rng.below(stream.duration() + 1);
        e.p = rng.coin() ? 1 : -1;
        merged.push_back(e);
      }
    }
  }
  std::stable_sort(merged.begin(), merged.end(), canonical_event_order);
  return EventStream(std::move(merged), stream.width(), stream.height(), stream.t_start(),
                     stream.duration());
}

namespace detail {

// Per-pixel threshold scan. The reference level is kept as base + n * c with
// an integer step counter, so repeated +-c moves accumulate no rounding drift
// and a signal that lands exactly on a level fires exactly once.
struct CrossingScanner {
  double base = 0.0;
  long steps = 0;
  std::int64_t last_event_us = std::numeric_limits<std::int64_t>::min() / 2;

  void scan_segment(double ta_us, double va, double tb_us, double vb, double c,
                    std::uint64_t refractory_us, std::uint16_t x, std::uint16_t y,
                    std::vector<Event>& out) {
    for (;;) {
      const double up = base + static_cast<double>(steps + 1) * c;
      const double dn = base + static_cast<double>(steps - 1) * c;
      int dir;
      double level;
      if (vb >= up) {
        dir = 1;
        level = up;
      } else if (vb <= dn) {
        dir = -1;
        level = dn;
      } else {
        break;
      }
      const double tc = ta_us + (level - va) / (vb - va) * (tb_us - ta_us);
      std::int64_t t_evt = std::llround(tc);
      t_evt = std::clamp(t_evt, static_cast<std::int64_t>(std::llround(ta_us)),
                         static_cast<std::int64_t>(std::llround(tb_us)));
      if (t_evt - last_event_us >= static_cast<std::int64_t>(refractory_us)) {
        Event e;
        e.x = x;
        e.y = y;
        e.t = static_cast<std::uint64_t>(t_evt);
        e.p = static_cast<std::int8_t>(dir);
        out.push_back(e);
        last_event_us = t_evt;
      }
      // a suppressed crossing still advances the reference level
      steps += dir;
    }
  }
};

}  // namespace detail

// Full synthesis pipeline: temporal upsampling (linear in log), log
// conversion, optional photoreceptor low-pass, linear-in-time threshold
// crossing with refractory dead time, optional Poisson noise. Deterministic
// for fixed (seq, cfg).
inline EventStream generate_events(const FrameSequence& input, const SimConfig& cfg) {
  cfg.validate();
  input.validate();

  const FrameSequence seq = (cfg.interp_factor > 1)
                                ? interpolate_frames(input, cfg.interp_factor, cfg.log_eps)
                                : input;
  std::vector<Tensor> logs;
  logs.reserve(seq.size());
  for (const Tensor& fr : seq.frames) logs.push_back(log_intensity(fr, cfg.log_eps));
  if (cfg.cutoff_hz > 0.0) logs = lowpass_filter(logs, seq.timestamps_us, cfg.cutoff_hz);

  const std::size_t h = seq.height(), w = seq.width();
  std::vector<Event> events;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t pix = y * w + x;
      detail::CrossingScanner scan;
      scan.base = logs[0][pix];  // reference starts at the first filtered sample
      for (std::size_t n = 1; n < logs.size(); ++n) {
        scan.scan_segment(static_cast<double>(seq.timestamps_us[n - 1]), logs[n - 1][pix],
                          static_cast<double>(seq.timestamps_us[n]), logs[n][pix],
                          cfg.threshold_c, cfg.refractory_us, static_cast<std::uint16_t>(x),
                          static_cast<std::uint16_t>(y), events);
      }
    }
  }
  std::stable_sort(events.begin(), events.end(), canonical_event_order);

  const std::uint64_t t0 = input.timestamps_us.front();
  const std::uint64_t dur = input.timestamps_us.back() - t0;
  EventStream stream(std::move(events), static_cast<std::uint16_t>(w),
                     static_cast<std::uint16_t>(h), t0, dur);
  if (cfg.noise_rate_hz > 0.0) return inject_noise(stream, cfg.noise_rate_hz, cfg.seed);
  return stream;
}

}  // namespace dvsgait
