#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dvsgait/nn.hpp"
#include "dvsgait/tensor.hpp"

namespace dvsgait {

struct StaticStreamConfig {
  std::size_t in_channels = 16;  // 2 * K_static
  std::size_t input_size = 64;
  std::size_t c1 = 16;
  std::size_t c2 = 32;
  std::size_t c3 = 64;
  std::size_t embed_dim = 32;
  std::size_t teacher_dim = 64;

  void validate() const {
    if (input_size % 8 != 0)
      throw Error(ErrorKind::invalid_argument, "static stream: input must be divisible by 8");
  }
};

// Convolutional shape encoder over the long-term slice: three blocks of
// 3x3 conv -> tanh -> 2x average pool, then a pooled affine embedding head
// and a 1x1-conv alignment head projected to the teacher feature width.
class StaticEncoder {
 public:
  struct Record {
    Conv3x3Record c1, c2, c3;
    Tensor a1, a2, a3;  // tanh outputs
    Tensor p1, p2, p3;  // pooled maps
    Conv1x1Record align;
    AffineRecord head;
    Tensor pooled_vec;
  };

  struct Output {
    Tensor embedding;  // F_s
    Tensor aligned;    // z_evs, width = teacher_dim
  };

  StaticEncoder() = default;

  explicit StaticEncoder(const StaticStreamConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    conv1_.init_shapes(cfg.c1, cfg.in_channels);
    conv2_.init_shapes(cfg.c2, cfg.c1);
    conv3_.init_shapes(cfg.c3, cfg.c2);
    align_.init_shapes(cfg.teacher_dim, cfg.c3);
    head_.init_shapes(cfg.embed_dim, cfg.c3);
  }

  void init_weights(Rng& rng) {
    conv1_.init_weights(rng);
    conv2_.init_weights(rng);
    conv3_.init_weights(rng);
    align_.init_weights(rng);
    head_.init_weights(rng);
  }

  const StaticStreamConfig& config() const { return cfg_; }

  Output forward(const Tensor& grid, Record& rec) const {
    if (grid.rank() != 3 || grid.dim(0) != cfg_.in_channels || grid.dim(1) != cfg_.input_size ||
        grid.dim(2) != cfg_.input_size)
      throw Error(ErrorKind::invalid_argument, "static stream: input shape mismatch");
    rec.a1 = tanh_forward(conv1_.forward(grid, &rec.c1));
    rec.p1 = avg_pool(rec.a1, 2);
    rec.a2 = tanh_forward(conv2_.forward(rec.p1, &rec.c2));
    rec.p2 = avg_pool(rec.a2, 2);
    rec.a3 = tanh_forward(conv3_.forward(rec.p2, &rec.c3));
    rec.p3 = avg_pool(rec.a3, 2);

    Output out;
    rec.pooled_vec = spatial_mean(rec.p3);
    out.embedding = head_.forward(rec.pooled_vec, &rec.head);
    out.aligned = spatial_mean(align_.forward(rec.p3, &rec.align));
    return out;
  }

  // Both heads share the last feature map; their gradients add there.
  void backward(const Tensor& grad_embed, const Tensor& grad_aligned, Record& rec) {
    Tensor gp3({rec.p3.dim(0), rec.p3.dim(1), rec.p3.dim(2)});
    if (grad_embed.size() > 0) {
      Tensor gvec = head_.backward(grad_embed, rec.head);
      gp3.axpy(1.0, spatial_mean_backward(gvec, rec.p3.dim(1), rec.p3.dim(2)));
    }
    if (grad_aligned.size() > 0) {
      Tensor galign = spatial_mean_backward(grad_aligned, rec.p3.dim(1), rec.p3.dim(2));
      gp3.axpy(1.0, align_.backward(galign, rec.align));
    }
    Tensor ga3 = avg_pool_backward(gp3, 2, rec.a3.dim(1), rec.a3.dim(2));
    Tensor gp2 = conv3_.backward(tanh_backward(ga3, rec.a3), rec.c3);
    Tensor ga2 = avg_pool_backward(gp2, 2, rec.a2.dim(1), rec.a2.dim(2));
    Tensor gp1 = conv2_.backward(tanh_backward(ga2, rec.a2), rec.c2);
    Tensor ga1 = avg_pool_backward(gp1, 2, rec.a1.dim(1), rec.a1.dim(2));
    conv1_.backward(tanh_backward(ga1, rec.a1), rec.c1);
  }

  void collect(ParamList& out, const std::string& prefix) {
    conv1_.collect(out, prefix + "/conv1");
    conv2_.collect(out, prefix + "/conv2");
    conv3_.collect(out, prefix + "/conv3");
    align_.collect(out, prefix + "/align");
    head_.collect(out, prefix + "/head");
  }

 private:
  StaticStreamConfig cfg_;
  Conv3x3 conv1_, conv2_, conv3_;
  Conv1x1 align_;
  Affine head_;
};

// Squared Euclidean distance between the projected event feature and the
// frozen teacher feature.
inline double align_loss(const Tensor& z_evs, const Tensor& z_img) {
  if (z_evs.size() != z_img.size())
    throw Error(ErrorKind::invalid_argument, "align_loss: width mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < z_evs.size(); ++i) {
    const double d = z_evs[i] - z_img[i];
    acc += d * d;
  }
  return acc;
}

// d align_loss / d z_evs = 2 (z_evs - z_img)
inline Tensor align_loss_grad(const Tensor& z_evs, const Tensor& z_img) {
  Tensor g = z_evs;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (z_evs[i] - z_img[i]);
  return g;
}

// --- teacher features ------------------------------------------------------

// Frozen per-sample teacher vectors keyed by sample id; all the same width.
struct TeacherFeatureSet {
  std::map<std::string, Tensor> features;
  std::size_t dim = 0;
  std::string teacher_name;

  const Tensor& get(const std::string& sample_id) const {
    auto it = features.find(sample_id);
    if (it == features.end())
      throw Error(ErrorKind::data_error, "teacher features: unknown sample id " + sample_id);
    return it->second;
  }
};

// Deterministic stand-in for an external frozen teacher: flatten the 64x64
// gray frame, project through a frozen seeded Gaussian matrix, squash with
// tanh. Distinct frames map to distinct vectors almost surely.
inline Tensor pseudo_teacher(const Tensor& gray_frame, std::size_t teacher_dim,
                             std::uint64_t seed) {
  if (gray_frame.rank() != 2)
    throw Error(ErrorKind::invalid_argument, "pseudo_teacher: expected a {H, W} frame");
  const std::size_t n = gray_frame.size();
  Tensor z({teacher_dim});
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t o = 0; o < teacher_dim; ++o) {
    Rng row = keyed_rng(seed, 0x7e3a11, o);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += row.normal() * gray_frame[i];
    z[o] = std::tanh(acc * scale);
  }
  return z;
}

// TFS1 (little-endian): magic "TFS1", u32 D_t, u32 count, then per record
// {u32 id length, UTF-8 id, D_t * f32}.
inline void write_teacher_features(const TeacherFeatureSet& set, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::data_error, "cannot open " + path + " for writing");
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) f.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  f.write("TFS1", 4);
  put_u32(static_cast<std::uint32_t>(set.dim));
  put_u32(static_cast<std::uint32_t>(set.features.size()));
  for (const auto& [id, vec] : set.features) {
    put_u32(static_cast<std::uint32_t>(id.size()));
    f.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (std::size_t i = 0; i < vec.size(); ++i) {
      const float fv = static_cast<float>(vec[i]);
      std::uint32_t bits;
      static_assert(sizeof(bits) == sizeof(fv));
      std::memcpy(&bits, &fv, 4);
      put_u32(bits);
    }
  }
}

inline TeacherFeatureSet load_teacher_features(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::data_error, "cannot open " + path);
  std::uint64_t offset = 0;
  auto get_u32 = [&]() -> std::uint32_t {
    char buf[4];
    if (!f.read(buf, 4))
      throw Error(ErrorKind::data_error, path + ": truncated at byte " + std::to_string(offset));
    offset += 4;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[i])) << (8 * i);
    return v;
  };
  char magic[4];
  if (!f.read(magic, 4) || std::string(magic, 4) != "TFS1")
    throw Error(ErrorKind::data_error, path + ": bad TFS1 magic");
  offset += 4;

  TeacherFeatureSet set;
  set.dim = get_u32();
  const std::uint32_t count = get_u32();
  if (set.dim == 0) throw Error(ErrorKind::data_error, path + ": feature width 0");
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t id_len = get_u32();
    std::string id(id_len, '\0');
    if (!f.read(id.data(), id_len))
      throw Error(ErrorKind::data_error, path + ": truncated id in record " + std::to_string(r));
    offset += id_len;
    Tensor vec({set.dim});
    for (std::size_t i = 0; i < set.dim; ++i) {
      char buf[4];
      if (!f.read(buf, 4))
        throw Error(ErrorKind::data_error,
                    path + ": sample " + id + " has fewer than " + std::to_string(set.dim) +
                        " feature values");
      offset += 4;
      std::uint32_t bits = 0;
      for (int bi = 0; bi < 4; ++bi)
        bits |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[bi])) << (8 * bi);
      float fv;
      std::memcpy(&fv, &bits, 4);
      if (!std::isfinite(fv))
        throw Error(ErrorKind::data_error, path + ": non-finite feature for sample " + id);
      vec[i] = static_cast<double>(fv);
    }
    set.features[id] = std::move(vec);
  }
  return set;
}

}  // namespace dvsgait
