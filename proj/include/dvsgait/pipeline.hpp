#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dvsgait/event.hpp"
#include "dvsgait/model.hpp"
#include "dvsgait/sim.hpp"
#include "dvsgait/voxel.hpp"

namespace dvsgait {

// Frames or events -> two-scale slices -> pad-and-resize -> network tensors.
struct PipelineConfig {
  SimConfig sim;
  std::size_t num_slices = 6;
  std::size_t k_dynamic = 4;
  std::size_t k_static = 8;
  std::size_t target_size = 64;
  bool normalize = true;     // per-sample peak normalization of each scale
  double dyn_gain = 12.0;    // lifts normalized voxel mass to LIF threshold scale
  double static_gain = 4.0;
};

namespace detail {

inline Tensor grid_to_tensor(const VoxelGrid& grid, double gain, bool normalize, double peak) {
  const std::size_t c = 2 * grid.bins(), h = grid.height(), w = grid.width();
  Tensor t({c, h, w});
  const double scale = gain * (normalize && peak > 0.0 ? 1.0 / peak : 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = grid.data[i] * scale;
  return t;
}

// Mean of the strongest entries; a single hot noise pixel must not crush the
// body signal when the grid is scaled.
inline double grid_peak(const VoxelGrid& grid) {
  std::vector<double> top;
  for (std::size_t i = 0; i < grid.data.size(); ++i)
    if (grid.data[i] > 0.0) top.push_back(grid.data[i]);
  if (top.empty()) return 0.0;
  const std::size_t k = std::min<std::size_t>(32, top.size());
  std::partial_sort(top.begin(), top.begin() + k, top.end(), std::greater<double>());
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += top[i];
  return acc / static_cast<double>(k);
}

}  // namespace detail

// The dynamic slices share one normalization constant so their relative
// masses (the temporal signature) survive; the static grid is normalized on
// its own, which also flattens bright/dim count differences.
inline SampleTensors tensors_from_stream(const EventStream& stream, const PipelineConfig& cfg,
                                         int label, const std::string& sample_id) {
  TwoScaleSlices split =
      two_scale_split(stream, cfg.num_slices, cfg.k_dynamic, cfg.k_static);

  SampleTensors out;
  out.label = label;
  out.sample_id = sample_id;

  std::vector<VoxelGrid> resized;
  double dyn_peak = 0.0;
  for (const VoxelGrid& g : split.dynamic) {
    VoxelGrid r = pad_and_resize(g, cfg.target_size);
    dyn_peak = std::max(dyn_peak, detail::grid_peak(r));
    resized.push_back(std::move(r));
  }
  for (const VoxelGrid& g : resized)
    out.dyn_slices.push_back(detail::grid_to_tensor(g, cfg.dyn_gain, cfg.normalize, dyn_peak));

  VoxelGrid rs = pad_and_resize(split.static_grid, cfg.target_size);
  out.static_grid =
      detail::grid_to_tensor(rs, cfg.static_gain, cfg.normalize, detail::grid_peak(rs));
  return out;
}

// Synthesizes events first; the sim seed is decorrelated per sample so noise
// draws are independent across the corpus yet reproducible.
inline SampleTensors tensors_from_frames(const FrameSequence& frames, const PipelineConfig& cfg,
                                         int label, const std::string& sample_id,
                                         std::uint64_t sample_index) {
  SimConfig sim = cfg.sim;
  std::uint64_t mix = sim.seed;
  sim.seed = splitmix64(mix) ^ (0x9e3779b97f4a7c15ULL * (sample_index + 1));
  EventStream stream = generate_events(frames, sim);
  return tensors_from_stream(stream, cfg, label, sample_id);
}

}  // namespace dvsgait
