#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "dvsgait/frames.hpp"
#include "dvsgait/rng.hpp"

namespace dvsgait {

// Procedural walking-figure corpus. Each identity owns a fixed set of gait
// latents; sequences vary only in start position, illumination and noise, so
// the latents are the only identity signal.
//
// Latents are laid out on a bit grid so the two streams carry complementary
// information: body width and stride amplitude shape the long-term
// accumulation (static cues), limb frequency and phase shape the slice
// timing (dynamic cues). Identities 2k / 2k+1 share all shape bits and
// differ in the motion bits only.
struct ToyGaitConfig {
  std::size_t n_identities = 8;
  std::size_t sequences_per_identity = 6;
  std::size_t frames_per_sequence = 32;
  std::size_t frame_size = 64;
  std::uint64_t frame_dt_us = 16000;
  std::uint64_t seed = 7;
  std::size_t bright_sequences = 3;  // leading sequences per identity are bright
  double brightness_bright = 1.0;
  double brightness_dim = 0.35;
  double background = 0.10;
  double body_intensity = 0.95;

  void validate() const {
    if (n_identities < 2)
      throw Error(ErrorKind::invalid_argument, "toy: need at least two identities");
    if (frames_per_sequence < 8)
      throw Error(ErrorKind::invalid_argument, "toy: need at least eight frames");
    if (frame_size < 32) throw Error(ErrorKind::invalid_argument, "toy: frame size too small");
    if (bright_sequences > sequences_per_identity)
      throw Error(ErrorKind::invalid_argument, "toy: bright_sequences exceeds sequences");
  }
};

struct ToyIdentity {
  double freq_hz;
  double phase;
  double amplitude;   // leg swing, radians
  double body_width;  // pixels
};

struct ToySequence {
  FrameSequence frames;
  int label = 0;
  std::string sample_id;
  std::string condition;  // "bright" or "dim"
  double brightness = 1.0;
};

inline ToyIdentity toy_identity_latents(const ToyGaitConfig& cfg, std::size_t id) {
  Rng rng = keyed_rng(cfg.seed, 0x1d, id);
  ToyIdentity lat;
  lat.freq_hz = (id & 1) ? 13.0 : 9.0;
  lat.phase = ((id >> 0) & 1) ? 3.14159265358979 : 0.0;
  lat.body_width = ((id >> 1) & 1) ? 9.0 : 5.0;
  lat.amplitude = ((id >> 2) & 1) ? 0.85 : 0.5;
  // small per-identity jitter keeps latents unique past eight identities
  lat.freq_hz += rng.uniform(-0.3, 0.3);
  lat.amplitude += rng.uniform(-0.03, 0.03);
  lat.body_width += rng.uniform(-0.4, 0.4);
  return lat;
}

namespace detail {

inline double segment_coverage(double px, double py, double ax, double ay, double bx, double by,
                               double half_width) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  const double d = std::sqrt(dx * dx + dy * dy);
  return std::clamp(half_width + 0.75 - d, 0.0, 1.0);  // soft 0.75 px edge
}

inline double box_coverage(double px, double py, double cx, double cy, double hw, double hh) {
  const double dx = std::abs(px - cx) - hw;
  const double dy = std::abs(py - cy) - hh;
  const double d = std::max(dx, dy);
  return std::clamp(0.75 - d, 0.0, 1.0);
}

}  // namespace detail

// Torso rectangle translating left to right with two counter-swinging legs.
inline Tensor render_toy_frame(const ToyGaitConfig& cfg, const ToyIdentity& lat,
                               double t_seconds, double duration_s, double start_x,
                               double brightness) {
  const double s = static_cast<double>(cfg.frame_size) / 64.0;  // geometry scale
  const double cx = start_x + (40.0 * s) * (t_seconds / duration_s);
  const double torso_cy = 23.0 * s, torso_hh = 9.0 * s;
  const double hip_y = torso_cy + torso_hh;
  const double leg_len = 16.0 * s;
  const double theta = lat.amplitude * std::sin(6.28318530717958648 * lat.freq_hz * t_seconds +
                                                lat.phase);

  Tensor frame({cfg.frame_size, cfg.frame_size});
  const double lx1 = cx + leg_len * std::sin(theta), ly1 = hip_y + leg_len * std::cos(theta);
  const double lx2 = cx - leg_len * std::sin(theta), ly2 = hip_y + leg_len * std::cos(-theta);
  for (std::size_t y = 0; y < cfg.frame_size; ++y) {
    for (std::size_t x = 0; x < cfg.frame_size; ++x) {
      const double px = static_cast<double>(x), py = static_cast<double>(y);
      double cov = detail::box_coverage(px, py, cx, torso_cy, lat.body_width * s * 0.5, torso_hh);
      cov = std::max(cov, detail::segment_coverage(px, py, cx, hip_y, lx1, ly1, 1.1 * s));
      cov = std::max(cov, detail::segment_coverage(px, py, cx, hip_y, lx2, ly2, 1.1 * s));
      frame.at(y, x) =
          brightness * (cfg.background + (cfg.body_intensity - cfg.background) * cov);
    }
  }
  return frame;
}

inline std::vector<ToySequence> generate_toy_dataset(const ToyGaitConfig& cfg) {
  cfg.validate();
  std::vector<ToySequence> out;
  const double duration_s =
      static_cast<double>((cfg.frames_per_sequence - 1) * cfg.frame_dt_us) * 1e-6;
  for (std::size_t id = 0; id < cfg.n_identities; ++id) {
    const ToyIdentity lat = toy_identity_latents(cfg, id);
    for (std::size_t sq = 0; sq < cfg.sequences_per_identity; ++sq) {
      Rng rng = keyed_rng(cfg.seed, 0x5e9 + id, sq);
      const bool bright = sq < cfg.bright_sequences;
      ToySequence seq;
      seq.label = static_cast<int>(id);
      seq.brightness = bright ? cfg.brightness_bright : cfg.brightness_dim;
      seq.condition = bright ? "bright" : "dim";
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%03zu_%02zu_%s", id, sq, seq.condition.c_str());
      seq.sample_id = buf;

      const double start_x = 10.0 * (static_cast<double>(cfg.frame_size) / 64.0) +
                             rng.uniform(-2.0, 2.0);
      // per-sequence walking speed jitter decorrelates the spatial stride
      // pattern from the limb frequency, so accumulation alone cannot read
      // the motion latents
      const double speed_factor = rng.uniform(0.85, 1.15);
      for (std::size_t fi = 0; fi < cfg.frames_per_sequence; ++fi) {
        const double t = static_cast<double>(fi * cfg.frame_dt_us) * 1e-6;
        seq.frames.frames.push_back(render_toy_frame(cfg, lat, t, duration_s / speed_factor,
                                                     start_x, seq.brightness));
        seq.frames.timestamps_us.push_back(fi * cfg.frame_dt_us);
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace dvsgait
