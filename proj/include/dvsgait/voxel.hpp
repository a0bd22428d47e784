#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dvsgait/event.hpp"
#include "dvsgait/tensor.hpp"

namespace dvsgait {

// Bilinear temporal accumulation of one exposure window. Channel 0 holds
// positive polarity, channel 1 negative. Entries are sums of the kernel
// weights max(0, 1 - |t_i - t_k| / dT) over contributing events.
struct VoxelGrid {
  Tensor data;  // {2, K, H, W}
  double delta_t_us = 0.0;
  std::uint64_t origin_us = 0;

  std::size_t bins() const { return data.dim(1); }
  std::size_t height() const { return data.dim(2); }
  std::size_t width() const { return data.dim(3); }
  double mass() const { return data.sum(); }

  double& at(std::size_t pol, std::size_t k, std::size_t y, std::size_t x) {
    return data.at(pol, k, y, x);
  }
  double at(std::size_t pol, std::size_t k, std::size_t y, std::size_t x) const {
    return data.at(pol, k, y, x);
  }
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

// Short-term slices E_d (fine bins, one grid per sub-window) plus the
// long-term grid E_s over the whole window. Sub-windows tile the window
// exactly, in order, without overlap.
struct TwoScaleSlices {
  std::vector<VoxelGrid> dynamic;
  VoxelGrid static_grid;
};

namespace detail {

// Event indices in deterministic deposition order: stable sort by (t, y, x, p)
// so that floating-point accumulation is reproducible run to run.
inline std::vector<std::size_t> deposition_order(const std::vector<Event>& events) {
  std::vector<std::size_t> idx(events.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return canonical_event_order(events[a], events[b]);
  });
  return idx;
}

// Deposit kernel mass for the bins of a grid anchored at window_start with
// bin width dt_us. Events whose kernel reaches past the grid's bin range
// shed only their in-range portion.
inline void deposit(VoxelGrid& grid, const std::vector<Event>& events,
                    const std::vector<std::size_t>& order, std::uint64_t window_start,
                    double dt_us) {
  const std::size_t k_bins = grid.bins();
  for (std::size_t i : order) {
    const Event& e = events[i];
    const double rel = (static_cast<double>(e.t) - static_cast<double>(window_start)) / dt_us;
    const double pos = rel - 0.5;  // distance to bin centers t_k = start + (k + 0.5) dT
    const double k0f = std::floor(pos);
    const double frac = pos - k0f;
    const long k0 = static_cast<long>(k0f);
    const std::size_t pol = (e.p > 0) ? 0 : 1;
    if (k0 >= 0 && k0 < static_cast<long>(k_bins))
      grid.at(pol, static_cast<std::size_t>(k0), e.y, e.x) += 1.0 - frac;
    if (k0 + 1 >= 0 && k0 + 1 < static_cast<long>(k_bins))
      grid.at(pol, static_cast<std::size_t>(k0 + 1), e.y, e.x) += frac;
  }
}

}  // namespace detail

inline VoxelGrid make_zero_grid(std::size_t k_bins, std::size_t height, std::size_t width,
                                double dt_us, std::uint64_t origin_us) {
  VoxelGrid g;
  g.data.reshape({2, k_bins, height, width});
  g.delta_t_us = dt_us;
  g.origin_us = origin_us;
  return g;
}

inline VoxelGrid voxelize(const EventStream& stream, std::size_t k_bins) {
  if (k_bins == 0) throw Error(ErrorKind::invalid_argument, "voxelize: K must be >= 1");
  if (stream.duration() == 0)
    throw Error(ErrorKind::invalid_argument, "voxelize: window length must be > 0");
  stream.validate();
  const double dt = static_cast<double>(stream.duration()) / static_cast<double>(k_bins);
  VoxelGrid grid = make_zero_grid(k_bins, stream.height(), stream.width(), dt, stream.t_start());
  const auto order = detail::deposition_order(stream.events());
  detail::deposit(grid, stream.events(), order, stream.t_start(), dt);
  return grid;
}

// Splits the window into num_slices sub-windows (the last absorbs any
// remainder microseconds) and voxelizes each with k_dynamic bins; the static
// grid covers the whole window with k_static bins. Slice bins are anchored to
// their sub-window but accumulate from the full stream, so kernel mass near an
// interior boundary lands in the adjacent slice's edge bin instead of being
// clipped; summed slice mass therefore matches a single fine voxelization.
inline TwoScaleSlices two_scale_split(const EventStream& stream, std::size_t num_slices,
                                      std::size_t k_dynamic, std::size_t k_static) {
  if (num_slices == 0)
    throw Error(ErrorKind::invalid_argument, "two_scale_split: need at least one slice");
  if (k_dynamic == 0 || k_static == 0)
    throw Error(ErrorKind::invalid_argument, "two_scale_split: K must be >= 1");
  if (stream.duration() < num_slices)
    throw Error(ErrorKind::invalid_argument, "two_scale_split: window shorter than slice count");
  stream.validate();

  const std::uint64_t base = stream.duration() / num_slices;
  const auto order = detail::deposition_order(stream.events());

  TwoScaleSlices out;
  out.dynamic.reserve(num_slices);
  for (std::size_t i = 0; i < num_slices; ++i) {
    const std::uint64_t a = stream.t_start() + i * base;
    const std::uint64_t b = (i + 1 == num_slices) ? stream.t_end() : a + base;
    const double dt = static_cast<double>(b - a) / static_cast<double>(k_dynamic);
    VoxelGrid g = make_zero_grid(k_dynamic, stream.height(), stream.width(), dt, a);
    detail::deposit(g, stream.events(), order, a, dt);
    out.dynamic.push_back(std::move(g));
  }

  const double dt_s = static_cast<double>(stream.duration()) / static_cast<double>(k_static);
  out.static_grid =
      make_zero_grid(k_static, stream.height(), stream.width(), dt_s, stream.t_start());
  detail::deposit(out.static_grid, stream.events(), order, stream.t_start(), dt_s);
  return out;
}

inline VoxelGrid crop_grid(const VoxelGrid& grid, const Rect& bbox) {
  const int gw = static_cast<int>(grid.width());
  const int gh = static_cast<int>(grid.height());
  const int x0 = std::max(bbox.x, 0);
  const int y0 = std::max(bbox.y, 0);
  const int x1 = std::min(bbox.x + bbox.w, gw);
  const int y1 = std::min(bbox.y + bbox.h, gh);
  if (x0 >= x1 || y0 >= y1)
    throw Error(ErrorKind::invalid_argument, "crop_grid: bbox does not intersect grid");

  VoxelGrid out = make_zero_grid(grid.bins(), static_cast<std::size_t>(y1 - y0),
                                 static_cast<std::size_t>(x1 - x0), grid.delta_t_us,
                                 grid.origin_us);
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t k = 0; k < grid.bins(); ++k)
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          out.at(p, k, static_cast<std::size_t>(y - y0), static_cast<std::size_t>(x - x0)) =
              grid.at(p, k, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  return out;
}

namespace detail {

// Half-pixel-center bilinear sampling with clamped borders. Identity when
// source and target sizes match.
inline void resample_plane(const double* src, std::size_t sh, std::size_t sw, double* dst,
                           std::size_t th, std::size_t tw) {
  const double sy_scale = static_cast<double>(sh) / static_cast<double>(th);
  const double sx_scale = static_cast<double>(sw) / static_cast<double>(tw);
  for (std::size_t ty = 0; ty < th; ++ty) {
    const double sy = (static_cast<double>(ty) + 0.5) * sy_scale - 0.5;
    const double fy0 = std::floor(sy);
    const double fy = sy - fy0;
    const long y0 = std::clamp(static_cast<long>(fy0), 0L, static_cast<long>(sh) - 1);
    const long y1 = std::clamp(static_cast<long>(fy0) + 1, 0L, static_cast<long>(sh) - 1);
    for (std::size_t tx = 0; tx < tw; ++tx) {
      const double sx = (static_cast<double>(tx) + 0.5) * sx_scale - 0.5;
      const double fx0 = std::floor(sx);
      const double fx = sx - fx0;
      const long x0 = std::clamp(static_cast<long>(fx0), 0L, static_cast<long>(sw) - 1);
      const long x1 = std::clamp(static_cast<long>(fx0) + 1, 0L, static_cast<long>(sw) - 1);
      const double v00 = src[y0 * static_cast<long>(sw) + x0];
      const double v01 = src[y0 * static_cast<long>(sw) + x1];
      const double v10 = src[y1 * static_cast<long>(sw) + x0];
      const double v11 = src[y1 * static_cast<long>(sw) + x1];
      dst[ty * tw + tx] =
          (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
    }
  }
}

}  // namespace detail

// Zero-pads the shorter spatial side symmetrically to a square (any odd pixel
// goes to the bottom/right), then bilinearly resamples every polarity/bin
// plane to target x target. Keeps body proportion; content never stretches.
inline VoxelGrid pad_and_resize(const VoxelGrid& grid, std::size_t target) {
  const std::size_t h = grid.height(), w = grid.width();
  if (h == 0 || w == 0 || target == 0)
    throw Error(ErrorKind::invalid_argument, "pad_and_resize: degenerate size");
  const std::size_t side = std::max(h, w);
  const std::size_t pad_top = (side - h) / 2;
  const std::size_t pad_left = (side - w) / 2;

  std::vector<double> square(side * side);
  VoxelGrid out = make_zero_grid(grid.bins(), target, target, grid.delta_t_us, grid.origin_us);
  for (std::size_t p = 0; p < 2; ++p) {
    for (std::size_t k = 0; k < grid.bins(); ++k) {
      std::fill(square.begin(), square.end(), 0.0);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          square[(y + pad_top) * side + (x + pad_left)] = grid.at(p, k, y, x);
      detail::resample_plane(square.data(), side, side, &out.data.at(p, k, 0, 0), target, target);
    }
  }
  return out;
}

}  // namespace dvsgait
