#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dvsgait/losses.hpp"
#include "dvsgait/mose.hpp"
#include "dvsgait/static_stream.hpp"

namespace dvsgait {

enum class StreamMode { dual, static_only, dynamic_only };

inline StreamMode stream_mode_from_string(const std::string& s) {
  if (s == "dual") return StreamMode::dual;
  if (s == "static") return StreamMode::static_only;
  if (s == "dynamic") return StreamMode::dynamic_only;
  throw Error(ErrorKind::config_error, "streams must be dual|static|dynamic, got " + s);
}

struct ModelConfig {
  StreamMode streams = StreamMode::dual;
  DynamicStreamConfig dyn;
  StaticStreamConfig stat;
  std::size_t embed_dim = 64;  // fused gait descriptor width
  std::size_t n_classes = 8;
  std::uint64_t seed = 1;
};

// One training/eval sample after voxelization: short-term slices for the
// dynamic stream, the long-term grid for the static stream, and an optional
// frozen teacher vector used only by the alignment loss.
struct SampleTensors {
  std::vector<Tensor> dyn_slices;
  Tensor static_grid;
  Tensor teacher;
  int label = -1;
  std::string sample_id;
};

// Dual-stream recognition model: F_gait = normalize(W [F_s; F_d] + b), with
// an affine identity classifier on top for the cross-entropy term. Retrieval
// uses F_gait only.
class GaitModel {
 public:
  struct Record {
    DynamicStream::Record dyn;
    StaticEncoder::Record stat;
    AffineRecord fuse;
    Tensor concat;
    Tensor pre_norm;
    Tensor f_gait;
    double inv_norm = 0.0;
    AffineRecord cls;
  };

  struct Output {
    Tensor f_gait;
    Tensor logits;
    Tensor z_evs;  // empty when the static stream is disabled
  };

  GaitModel() = default;

  explicit GaitModel(const ModelConfig& cfg) : cfg_(cfg) {
    std::size_t fuse_in = 0;
    if (uses_dynamic()) {
      dyn_ = DynamicStream(cfg.dyn);
      fuse_in += dyn_.embed_dim();
    }
    if (uses_static()) {
      stat_ = StaticEncoder(cfg.stat);
      fuse_in += cfg.stat.embed_dim;
    }
    fuse_.init_shapes(cfg.embed_dim, fuse_in);
    classifier_.init_shapes(cfg.n_classes, cfg.embed_dim);
    Rng rng(cfg.seed);
    if (uses_dynamic()) dyn_.init_weights(rng);
    if (uses_static()) stat_.init_weights(rng);
    fuse_.init_weights(rng);
    classifier_.init_weights(rng);
  }

  bool uses_dynamic() const { return cfg_.streams != StreamMode::static_only; }
  bool uses_static() const { return cfg_.streams != StreamMode::dynamic_only; }
  const ModelConfig& config() const { return cfg_; }

  Output forward(const SampleTensors& sample, Record& rec,
                 SpikeMode mode = SpikeMode::hard) const {
    Tensor f_d, f_s;
    Output out;
    if (uses_dynamic()) f_d = dyn_.forward(sample.dyn_slices, rec.dyn, mode);
    if (uses_static()) {
      auto so = stat_.forward(sample.static_grid, rec.stat);
      f_s = so.embedding;
      out.z_evs = so.aligned;
    }
    rec.concat = concat_features(f_s, f_d);
    rec.pre_norm = fuse_.forward(rec.concat, &rec.fuse);

    double norm2 = 0.0;
    for (std::size_t i = 0; i < rec.pre_norm.size(); ++i)
      norm2 += rec.pre_norm[i] * rec.pre_norm[i];
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0))
      throw Error(ErrorKind::degenerate_embedding,
                  "fuse: zero pre-normalization vector for sample " + sample.sample_id);
    rec.inv_norm = 1.0 / norm;
    rec.f_gait = rec.pre_norm;
    rec.f_gait.scale(rec.inv_norm);

    out.f_gait = rec.f_gait;
    out.logits = classifier_.forward(rec.f_gait, &rec.cls);
    return out;
  }

  // grad_z_evs may be empty (alignment off); gradients for disabled streams
  // are ignored.
  void backward(const Tensor& grad_f_gait, const Tensor& grad_logits, const Tensor& grad_z_evs,
                Record& rec) {
    Tensor gf = grad_f_gait;
    if (grad_logits.size() > 0) {
      Tensor gcls = classifier_.backward(grad_logits, rec.cls);
      if (gf.size() == 0) gf = gcls;
      else gf.axpy(1.0, gcls);
    }

    // y = v / ||v||  =>  dv = (g - (g . y) y) / ||v||
    double dot = 0.0;
    for (std::size_t i = 0; i < gf.size(); ++i) dot += gf[i] * rec.f_gait[i];
    Tensor gpre = gf;
    for (std::size_t i = 0; i < gpre.size(); ++i)
      gpre[i] = (gf[i] - dot * rec.f_gait[i]) * rec.inv_norm;

    Tensor gconcat = fuse_.backward(gpre, rec.fuse);

    std::size_t off = 0;
    if (uses_static()) {
      Tensor g_s({cfg_.stat.embed_dim});
      for (std::size_t i = 0; i < g_s.size(); ++i) g_s[i] = gconcat[off + i];
      off += g_s.size();
      stat_.backward(g_s, grad_z_evs, rec.stat);
    }
    if (uses_dynamic()) {
      Tensor g_d({dyn_.embed_dim()});
      for (std::size_t i = 0; i < g_d.size(); ++i) g_d[i] = gconcat[off + i];
      dyn_.backward(g_d, rec.dyn);
    }
  }

  ParamList params() {
    ParamList out;
    if (uses_static()) stat_.collect(out, "static");
    if (uses_dynamic()) dyn_.collect(out, "dynamic");
    fuse_.collect(out, "fuse");
    classifier_.collect(out, "classifier");
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) p.grad->zero();
  }

  DynamicStream& dynamic_stream() { return dyn_; }
  StaticEncoder& static_stream() { return stat_; }
  Affine& fuse_layer() { return fuse_; }
  Affine& classifier() { return classifier_; }

 private:
  Tensor concat_features(const Tensor& f_s, const Tensor& f_d) const {
    Tensor c({(uses_static() ? f_s.size() : 0) + (uses_dynamic() ? f_d.size() : 0)});
    std::size_t off = 0;
    if (uses_static()) {
      if (!f_s.all_finite())
        throw Error(ErrorKind::numeric_error, "fuse: non-finite static feature");
      for (std::size_t i = 0; i < f_s.size(); ++i) c[off++] = f_s[i];
    }
    if (uses_dynamic()) {
      if (!f_d.all_finite())
        throw Error(ErrorKind::numeric_error, "fuse: non-finite dynamic feature");
      for (std::size_t i = 0; i < f_d.size(); ++i) c[off++] = f_d[i];
    }
    return c;
  }

  ModelConfig cfg_;
  DynamicStream dyn_;
  StaticEncoder stat_;
  Affine fuse_;
  Affine classifier_;
};

}  // namespace dvsgait
